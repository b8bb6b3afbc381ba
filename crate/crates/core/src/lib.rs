//! Double forms, curvature invariants of Riemannian metrics and numerical
//! checks of their identities and linearizations.

pub mod combinat;
pub mod dform;
pub mod chart;
pub mod error;
pub mod functional;
pub mod invariants;
pub mod jet;
pub mod linearize;
pub mod models;
pub mod report;
pub mod sampling;
pub mod suites;

pub use dform::{DoubleForm, MetricAtPoint};
pub use error::{Error, Result};
pub use report::{Measure, VerificationReport};
