//! Adaptive projection estimators on the trigonometric basis.
//!
//! One estimator covers three nonparametric problems:
//!
//! * **R**: regression on the equispaced design `x_i = i/n`,
//! * **D**: a probability density on `[0, 1]`,
//! * **S**: the spectral density of a Gaussian stationary sequence.
//!
//! Empirical Fourier coefficients are truncated at a data-driven harmonic
//! count `N(n)` that minimises `tau(n, N) = sum_{k=N+1}^{2N} c_hat_k^2`.
//! The same statistic drives adaptive confidence bounds on the squared
//! `L2` error, see [`confidence`].
//!
//! ```
//! use adaptix::{estimator, samplers, targets, Constraint};
//!
//! let target = targets::make_w_target(1.0, 0.0, 1.0, 512, Constraint::Nonnegative).unwrap();
//! let data = samplers::gen_density_sample(&target, 2048, 7.into()).unwrap();
//! let est = estimator::adaptive_estimate(&data).unwrap();
//! let risk = estimator::l2_error(&est, &target).unwrap();
//! assert!(risk < 0.05);
//! ```

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod confidence;
pub mod empirical;
mod error;
pub mod estimator;
mod fft;
pub mod harness;
pub mod io;
pub mod samplers;
pub mod selector;
pub mod targets;
pub mod trig_basis;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use error::{Error, Result};
pub use targets::{Constraint, TargetSpec};
pub use trig_basis::FourierSeries;

/// The three estimation problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Problem {
    /// Regression `y_i = f(i/n) + xi_i`.
    R,
    /// Density of an i.i.d. sample on `[0, 1]`.
    D,
    /// Spectral density of a Gaussian stationary sequence.
    S,
}

impl Problem {
    pub fn tag(self) -> &'static str {
        match self {
            Problem::R => "R",
            Problem::D => "D",
            Problem::S => "S",
        }
    }
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl std::str::FromStr for Problem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "r" | "R" => Ok(Problem::R),
            "d" | "D" => Ok(Problem::D),
            "s" | "S" => Ok(Problem::S),
            other => Err(Error::Parameter(format!("unknown problem tag {other:?}"))),
        }
    }
}

/// Largest admissible harmonic count, `floor(n/3)`.
pub fn max_harmonics(n: usize) -> usize {
    n / 3
}
