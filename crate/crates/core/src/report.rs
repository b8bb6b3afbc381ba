//! Verification records: both sides of an identity, residual norms,
//! tolerance and verdict.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Which residual the verdict is computed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    Abs,
    Rel,
}

/// Short numeric summary of one side of a check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub norm: f64,
    pub len: usize,
    pub head: Vec<f64>,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        Summary {
            norm: l2(values),
            len: values.len(),
            head: values.iter().take(4).copied().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub check_id: String,
    pub anchor: String,
    pub suite: String,
    pub inputs_digest: String,
    pub lhs: Summary,
    pub rhs: Summary,
    pub residual_abs: f64,
    pub residual_rel: f64,
    pub measure: Measure,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub seed: Option<u64>,
    pub duration_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

pub(crate) fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Absolute and relative distance between two equally sized vectors. The
/// relative residual is taken against the larger of the two norms; two exact
/// zeros compare as zero.
pub fn residuals(lhs: &[f64], rhs: &[f64]) -> (f64, f64) {
    assert_eq!(lhs.len(), rhs.len(), "residual of mismatched sides");
    let diff: Vec<f64> = lhs.iter().zip(rhs).map(|(a, b)| a - b).collect();
    let abs = l2(&diff);
    let scale = l2(lhs).max(l2(rhs));
    let rel = if abs == 0.0 {
        0.0
    } else if scale == 0.0 {
        f64::MAX
    } else {
        abs / scale
    };
    (abs, rel)
}

impl VerificationReport {
    pub fn compare(
        check_id: impl Into<String>,
        anchor: impl Into<String>,
        lhs: &[f64],
        rhs: &[f64],
        tolerance: f64,
        measure: Measure,
    ) -> Self {
        let (abs, rel) = residuals(lhs, rhs);
        Self::from_residuals(check_id, anchor, lhs, rhs, abs, rel, tolerance, measure)
    }

    /// Builds a record from precomputed residuals (used when the natural norm
    /// is not the coordinate one).
    #[allow(clippy::too_many_arguments)]
    pub fn from_residuals(
        check_id: impl Into<String>,
        anchor: impl Into<String>,
        lhs: &[f64],
        rhs: &[f64],
        abs: f64,
        rel: f64,
        tolerance: f64,
        measure: Measure,
    ) -> Self {
        let residual = match measure {
            Measure::Abs => abs,
            Measure::Rel => rel,
        };
        VerificationReport {
            check_id: check_id.into(),
            anchor: anchor.into(),
            suite: String::new(),
            inputs_digest: String::new(),
            lhs: Summary::of(lhs),
            rhs: Summary::of(rhs),
            residual_abs: abs,
            residual_rel: rel,
            measure,
            residual,
            tolerance,
            pass: residual <= tolerance,
            seed: None,
            duration_ms: 0.0,
            note: None,
        }
    }

    /// A scalar quantity checked against a bound (`value <= tolerance`).
    pub fn bound(
        check_id: impl Into<String>,
        anchor: impl Into<String>,
        value: f64,
        tolerance: f64,
    ) -> Self {
        Self::from_residuals(
            check_id,
            anchor,
            &[value],
            &[0.0],
            value.abs(),
            value.abs(),
            tolerance,
            Measure::Abs,
        )
    }

    /// A report-only record: always passes, carries the value for inspection.
    pub fn observation(check_id: impl Into<String>, anchor: impl Into<String>, value: f64) -> Self {
        let mut r = Self::from_residuals(
            check_id,
            anchor,
            &[value],
            &[value],
            0.0,
            0.0,
            f64::MAX,
            Measure::Abs,
        );
        r.note = Some("reported, not asserted".into());
        r
    }

    pub fn with_suite(mut self, suite: &str) -> Self {
        self.suite = suite.to_string();
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn with_inputs(mut self, description: &str) -> Self {
        self.inputs_digest = digest(description);
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn timed(mut self, start: Instant) -> Self {
        self.duration_ms = start.elapsed().as_secs_f64() * 1e3;
        self
    }

    /// Multiplies the tolerance and recomputes the verdict.
    pub fn scale_tolerance(&mut self, factor: f64) {
        self.tolerance = (self.tolerance * factor).min(f64::MAX);
        self.pass = self.residual <= self.tolerance;
    }

    pub fn line(&self) -> String {
        format!(
            "[{}] {:<48} residual {:>10.3e} (tol {:.1e}, {})",
            if self.pass { "PASS" } else { "FAIL" },
            self.check_id,
            self.residual,
            self.tolerance,
            match self.measure {
                Measure::Abs => "abs",
                Measure::Rel => "rel",
            }
        )
    }
}

pub fn digest(description: &str) -> String {
    let mut h = Sha256::new();
    h.update(description.as_bytes());
    hex::encode(&h.finalize()[..8])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pass_iff_residual_within_tolerance() {
        let r = VerificationReport::compare("c", "a", &[1.0, 2.0], &[1.0, 2.0 + 1e-9], 1e-8, Measure::Abs);
        assert!(r.pass);
        let mut r2 = VerificationReport::compare("c", "a", &[1.0], &[1.1], 1e-3, Measure::Rel);
        assert!(!r2.pass);
        r2.scale_tolerance(1e3);
        assert!(r2.pass);
    }

    #[test]
    fn zero_sides_compare_equal() {
        let (abs, rel) = residuals(&[0.0, 0.0], &[0.0, 0.0]);
        assert_eq!((abs, rel), (0.0, 0.0));
        let (_, rel) = residuals(&[0.0], &[1e-3]);
        assert_eq!(rel, 1.0);
    }

    #[test]
    fn serde_roundtrip_is_lossless() {
        let r = VerificationReport::compare("x", "y", &[0.1, 1.0 / 3.0], &[0.1, 0.333], 1e-2, Measure::Rel)
            .with_seed(7)
            .with_inputs("model=sphere n=5");
        let text = serde_json::to_string(&r).unwrap();
        let back: VerificationReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, r);
    }
}
