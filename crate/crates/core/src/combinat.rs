//! Multi-index combinatorics: lexicographic enumeration and ranking of
//! strictly increasing index tuples, sorting signs, and generalized
//! Kronecker deltas.

use std::fmt;

use crate::error::{Error, Result};

/// Strictly increasing tuple of axis labels. Degree is the tuple length.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct MultiIndex(Vec<usize>);

impl MultiIndex {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        for w in indices.windows(2) {
            if w[0] == w[1] {
                return Err(Error::RepeatedIndex(indices));
            }
            if w[0] > w[1] {
                return Err(Error::Parameter(format!(
                    "multi-index {indices:?} is not increasing"
                )));
            }
        }
        Ok(MultiIndex(indices))
    }

    pub fn empty() -> Self {
        MultiIndex(Vec::new())
    }

    pub fn degree(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    /// Lexicographic rank among all increasing tuples of the same degree in
    /// dimension `n`.
    pub fn rank(&self, n: usize) -> usize {
        rank_slice(&self.0, n)
    }

    pub fn unrank(n: usize, r: usize, mut idx: usize) -> Self {
        let mut out = Vec::with_capacity(r);
        let mut start = 0;
        for slot in 0..r {
            let remaining = r - slot - 1;
            let mut v = start;
            loop {
                let block = binomial(n - v - 1, remaining);
                if idx < block {
                    break;
                }
                idx -= block;
                v += 1;
            }
            out.push(v);
            start = v + 1;
        }
        MultiIndex(out)
    }

    /// Increasing complement in `{0..n-1}`.
    pub fn complement(&self, n: usize) -> Self {
        MultiIndex((0..n).filter(|i| !self.contains(*i)).collect())
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, i) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, ")")
    }
}

pub(crate) fn rank_slice(idx: &[usize], n: usize) -> usize {
    let r = idx.len();
    let mut rank = 0;
    let mut prev = 0;
    for (slot, &v) in idx.iter().enumerate() {
        let remaining = r - slot - 1;
        for skipped in prev..v {
            rank += binomial(n - skipped - 1, remaining);
        }
        prev = v + 1;
    }
    rank
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as usize
}

/// Exact factorial as `u128` (valid for arguments up to 34).
pub fn factorial_exact(m: usize) -> u128 {
    (1..=m as u128).product()
}

pub fn factorial(m: usize) -> f64 {
    factorial_exact(m) as f64
}

/// All strictly increasing `r`-tuples in `{0..n-1}`, lexicographic order.
pub fn enumerate_multi_indices(n: usize, r: isize) -> Result<Vec<MultiIndex>> {
    if r < 0 || r as usize > n {
        return Err(Error::InvalidDegree {
            dim: n,
            degree: r as i64,
        });
    }
    let r = r as usize;
    let mut out = Vec::with_capacity(binomial(n, r));
    let mut cur: Vec<usize> = (0..r).collect();
    if r == 0 {
        out.push(MultiIndex::empty());
        return Ok(out);
    }
    loop {
        out.push(MultiIndex(cur.clone()));
        // advance to the next combination
        let mut pos = r;
        while pos > 0 {
            pos -= 1;
            if cur[pos] < n - r + pos {
                cur[pos] += 1;
                for q in pos + 1..r {
                    cur[q] = cur[q - 1] + 1;
                }
                break;
            }
            if pos == 0 {
                return Ok(out);
            }
        }
    }
}

/// Sorts an arbitrary tuple, returning the increasing multi-index and the
/// sign of the sorting permutation; `None` when an index repeats.
pub fn sort_sign(tuple: &[usize]) -> Option<(MultiIndex, i32)> {
    let mut v = tuple.to_vec();
    let mut sign = 1;
    // insertion sort, counting transpositions
    for i in 1..v.len() {
        let mut j = i;
        while j > 0 && v[j - 1] > v[j] {
            v.swap(j - 1, j);
            sign = -sign;
            j -= 1;
        }
        if j > 0 && v[j - 1] == v[j] {
            return None;
        }
    }
    if v.windows(2).any(|w| w[0] == w[1]) {
        return None;
    }
    Some((MultiIndex(v), sign))
}

/// Sign of a permutation of `0..p` by cycle counting.
pub fn permutation_sign(perm: &[usize]) -> i32 {
    let mut seen = vec![false; perm.len()];
    let mut sign = 1;
    for start in 0..perm.len() {
        if seen[start] {
            continue;
        }
        let mut len = 0;
        let mut j = start;
        while !seen[j] {
            seen[j] = true;
            j = perm[j];
            len += 1;
        }
        if len % 2 == 0 {
            sign = -sign;
        }
    }
    sign
}

/// Generalized Kronecker delta `δ^{upper}_{lower}`: the determinant of the
/// matrix of ordinary deltas.
pub fn generalized_kronecker(upper: &[usize], lower: &[usize]) -> Result<i32> {
    if upper.len() != lower.len() {
        return Err(Error::Arity {
            upper: upper.len(),
            lower: lower.len(),
        });
    }
    let p = upper.len();
    if p <= 4 {
        Ok(delta_determinant(upper, lower))
    } else {
        Ok(delta_matching(upper, lower))
    }
}

fn delta_determinant(upper: &[usize], lower: &[usize]) -> i32 {
    let p = upper.len();
    let d = |a: usize, b: usize| i32::from(upper[a] == lower[b]);
    match p {
        0 => 1,
        1 => d(0, 0),
        _ => {
            // Laplace expansion along the first row
            let mut acc = 0;
            let rest_upper = &upper[1..];
            for col in 0..p {
                if d(0, col) == 0 {
                    continue;
                }
                let minor_lower: Vec<usize> = lower
                    .iter()
                    .enumerate()
                    .filter(|(c, _)| *c != col)
                    .map(|(_, v)| *v)
                    .collect();
                let sign = if col % 2 == 0 { 1 } else { -1 };
                acc += sign * delta_determinant(rest_upper, &minor_lower);
            }
            acc
        }
    }
}

fn delta_matching(upper: &[usize], lower: &[usize]) -> i32 {
    // nonzero only when both tuples are repeat-free and share the same set
    let (su, sgn_u) = match sort_sign(upper) {
        Some(v) => v,
        None => return 0,
    };
    let (sl, sgn_l) = match sort_sign(lower) {
        Some(v) => v,
        None => return 0,
    };
    if su != sl {
        return 0;
    }
    sgn_u * sgn_l
}

/// Splits of an increasing tuple `k` into an increasing part of size `r` and
/// its increasing remainder, with the sign of the shuffle `(part, rest) -> k`.
pub(crate) fn shuffles(k: &[usize], r: usize) -> Vec<(Vec<usize>, Vec<usize>, i32)> {
    let m = k.len();
    let mut out = Vec::with_capacity(binomial(m, r));
    let positions = enumerate_multi_indices(m, r as isize).expect("r <= m");
    for pos in positions {
        let chosen: Vec<usize> = pos.as_slice().iter().map(|&p| k[p]).collect();
        let rest: Vec<usize> = (0..m)
            .filter(|p| !pos.contains(*p))
            .map(|p| k[p])
            .collect();
        // inversions between chosen positions and remaining positions
        let mut inv = 0usize;
        for (slot, &p) in pos.as_slice().iter().enumerate() {
            inv += p - slot;
        }
        let sign = if inv % 2 == 0 { 1 } else { -1 };
        out.push((chosen, rest, sign));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn enumerate_small_cases() {
        let v = enumerate_multi_indices(3, 2).unwrap();
        let raw: Vec<Vec<usize>> = v.iter().map(|m| m.as_slice().to_vec()).collect();
        assert_eq!(raw, vec![vec![0, 1], vec![0, 2], vec![1, 2]]);
        let e = enumerate_multi_indices(5, 0).unwrap();
        assert_eq!(e, vec![MultiIndex::empty()]);
        assert_eq!(enumerate_multi_indices(7, 3).unwrap().len(), 35);
    }

    #[test]
    fn enumerate_rejects_bad_degree() {
        assert!(matches!(
            enumerate_multi_indices(3, 4),
            Err(Error::InvalidDegree { .. })
        ));
        assert!(matches!(
            enumerate_multi_indices(3, -1),
            Err(Error::InvalidDegree { .. })
        ));
    }

    #[test]
    fn construction_rejects_repeats() {
        assert!(matches!(
            MultiIndex::new(vec![1, 1, 3]),
            Err(Error::RepeatedIndex(_))
        ));
        assert!(MultiIndex::new(vec![0, 2, 5]).is_ok());
    }

    #[test]
    fn rank_matches_enumeration_order() {
        for n in 0..=7 {
            for r in 0..=n {
                for (i, m) in enumerate_multi_indices(n, r as isize)
                    .unwrap()
                    .iter()
                    .enumerate()
                {
                    assert_eq!(m.rank(n), i);
                    assert_eq!(&MultiIndex::unrank(n, r, i), m);
                }
            }
        }
    }

    #[test]
    fn kronecker_examples() {
        assert_eq!(generalized_kronecker(&[0, 1], &[0, 1]).unwrap(), 1);
        assert_eq!(generalized_kronecker(&[0, 1], &[1, 0]).unwrap(), -1);
        assert_eq!(generalized_kronecker(&[0, 1], &[0, 0]).unwrap(), 0);
        assert!(matches!(
            generalized_kronecker(&[0, 1], &[0]),
            Err(Error::Arity { .. })
        ));
    }

    #[test]
    fn sort_sign_examples() {
        assert_eq!(
            sort_sign(&[2, 0, 1]),
            Some((MultiIndex(vec![0, 1, 2]), 1))
        );
        assert_eq!(sort_sign(&[1, 0]), Some((MultiIndex(vec![0, 1]), -1)));
        assert_eq!(sort_sign(&[1, 1, 3]), None);
        assert_eq!(sort_sign(&[3, 1, 3]), None);
    }

    #[test]
    fn determinant_and_matching_agree() {
        // both routes on every pair of 4-tuples drawn from {0..4}
        let n: usize = 5;
        let tuples: Vec<Vec<usize>> = (0..n.pow(4))
            .map(|mut c| {
                (0..4)
                    .map(|_| {
                        let v = c % n;
                        c /= n;
                        v
                    })
                    .collect()
            })
            .collect();
        for a in tuples.iter().step_by(7) {
            for b in tuples.iter().step_by(11) {
                assert_eq!(delta_determinant(a, b), delta_matching(a, b), "{a:?} {b:?}");
            }
        }
    }

    #[test]
    fn shuffle_signs() {
        let s = shuffles(&[0, 1, 2], 1);
        assert_eq!(s[0], (vec![0], vec![1, 2], 1));
        assert_eq!(s[1], (vec![1], vec![0, 2], -1));
        assert_eq!(s[2], (vec![2], vec![0, 1], 1));
    }

    fn perm_strategy(p: usize) -> impl Strategy<Value = Vec<usize>> {
        Just((0..p).collect::<Vec<_>>()).prop_shuffle()
    }

    proptest! {
        #[test]
        fn kronecker_equals_cycle_sign(p in 1usize..=7, seed in perm_strategy(7)) {
            let base: Vec<usize> = (0..p).map(|i| 2 * i + 1).collect();
            let perm: Vec<usize> = seed.into_iter().filter(|&v| v < p).collect();
            let permuted: Vec<usize> = perm.iter().map(|&i| base[i]).collect();
            prop_assert_eq!(
                generalized_kronecker(&base, &permuted).unwrap(),
                permutation_sign(&perm)
            );
        }

        #[test]
        fn kronecker_antisymmetric(
            up in proptest::collection::vec(0usize..6, 1..=6),
            a in 0usize..6, b in 0usize..6,
            perm in perm_strategy(6),
        ) {
            let p = up.len();
            let (a, b) = (a % p, b % p);
            prop_assume!(a != b);
            let lo: Vec<usize> = perm.iter().take(p).map(|&i| i).collect();
            let base = generalized_kronecker(&up, &lo).unwrap();
            let mut up2 = up.clone();
            up2.swap(a, b);
            prop_assert_eq!(generalized_kronecker(&up2, &lo).unwrap(), -base);
            let mut lo2 = lo.clone();
            lo2.swap(a, b);
            prop_assert_eq!(generalized_kronecker(&up, &lo2).unwrap(), -base);
        }

        #[test]
        fn rank_unrank_roundtrip(n in 1usize..=9, r in 0usize..=9, i in 0usize..500) {
            prop_assume!(r <= n);
            let total = binomial(n, r);
            let i = i % total;
            prop_assert_eq!(MultiIndex::unrank(n, r, i).rank(n), i);
        }
    }
}
