//! Proper composite losses, strong properness certification, and exact
//! verification of bipartite ranking regret bounds on finite distributions.
//!
//! Every expectation in this crate is a finite sum over the support of a
//! [`FiniteDistribution`], so each regret bound becomes an inequality between
//! two computable numbers. [`BoundReport`] records both sides.
//!
//! ```
//! use proper_rank::{bounds, loss, FiniteDistribution, ScoringFunction};
//!
//! let d = FiniteDistribution::from_arrays(&[0.5, 0.5], &[0.8, 0.2]).unwrap();
//! let f = ScoringFunction::for_distribution(&d, &[-0.4, 0.4]).unwrap();
//! let report = bounds::check_main_bound(&d, &loss::squared(), &f).unwrap();
//! assert!(report.holds);
//! assert!((report.lhs - 0.6).abs() < 1e-12);
//! assert!((report.rhs - 2.0).abs() < 1e-12);
//! ```

pub mod bounds;
pub mod construct;
pub mod distribution;
pub mod error;
pub mod extended;
pub mod loss;
pub mod regret;
pub mod scores;
pub mod trainer;
pub mod trials;

pub use bounds::BoundReport;
pub use construct::{CertificationReport, Grid};
pub use distribution::{FiniteDistribution, Instance, PairwiseDistribution};
pub use error::{Error, Result};
pub use extended::{ExtendedReal, Interval, Label};
pub use loss::{BinaryLoss, CompositeLoss, Link, ProperLoss};
pub use regret::RegretReport;
pub use scores::ScoringFunction;
