//! The adaptive estimate `f_hat = sum_{j<=N(n)} c_hat_j phi_j`.
//!
//! Estimates live in coefficient space; squared `L2` errors against a
//! known target are exact by Parseval. Negative density or spectral
//! estimates are reported as they are.

use serde::{Deserialize, Serialize};

use crate::empirical::{default_k, empirical_coeffs, EmpiricalCoeffs};
use crate::samplers::Dataset;
use crate::selector::{select, SelectionResult};
use crate::targets::TargetSpec;
use crate::trig_basis::sum_series;
use crate::{Error, Problem, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveEstimate {
    pub problem: Problem,
    pub n: usize,
    #[serde(rename = "N")]
    pub n_selected: usize,
    /// `c_hat_1..c_hat_{N(n)}`.
    pub coeffs: Vec<f64>,
    pub tau_star: f64,
    #[serde(skip)]
    pub selection: Option<SelectionResult>,
}

impl AdaptiveEstimate {
    /// Truncate `e` at the count chosen by `selection`.
    pub fn from_parts(e: &EmpiricalCoeffs, selection: SelectionResult) -> Self {
        AdaptiveEstimate {
            problem: e.problem,
            n: e.n,
            n_selected: selection.n_selected,
            coeffs: e.coeffs[..selection.n_selected].to_vec(),
            tau_star: selection.tau_star,
            selection: Some(selection),
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        sum_series(&self.coeffs, x)
    }

    /// Smallest value on `grid` uniform nodes; negative values flag where a
    /// density or spectral estimate dips below zero.
    pub fn min_on_grid(&self, grid: usize) -> f64 {
        (0..=grid)
            .map(|m| self.value(m as f64 / grid as f64))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Coefficients, `tau` curve, selection and truncation in one pass.
pub fn adaptive_estimate(d: &Dataset) -> Result<AdaptiveEstimate> {
    if d.n < 9 {
        return Err(Error::Parameter(format!("sample size n = {} is below 9", d.n)));
    }
    let e = empirical_coeffs(d, default_k(d.n))?;
    let selection = select(&e)?;
    Ok(AdaptiveEstimate::from_parts(&e, selection))
}

/// `||f_hat - f||^2 = sum_{j<=N} (c_hat_j - c_j)^2 + rho(N)`.
pub fn l2_error(est: &AdaptiveEstimate, t: &TargetSpec) -> Result<f64> {
    let n = est.coeffs.len();
    if t.len() < n {
        return Err(Error::Truncation {
            needed: n,
            available: t.len(),
        });
    }
    let head: f64 = est
        .coeffs
        .iter()
        .zip(t.series.coeffs())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(head + t.series.tail_rho(n)?)
}

/// `f_hat` at each node of `grid`.
pub fn evaluate(est: &AdaptiveEstimate, grid: &[f64]) -> Result<Vec<f64>> {
    if let Some(x) = grid.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(Error::Domain(format!("x = {x} lies outside [0, 1]")));
    }
    Ok(grid.iter().map(|&x| est.value(x)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samplers::{gen_density_sample, gen_regression, NoiseSpec};
    use crate::targets::{make_w_target, Constraint};
    use crate::trig_basis::{quadrature, FourierSeries};
    use approx::assert_abs_diff_eq;

    fn estimate_with(coeffs: Vec<f64>) -> AdaptiveEstimate {
        AdaptiveEstimate {
            problem: Problem::D,
            n: 100,
            n_selected: coeffs.len(),
            coeffs,
            tau_star: 0.0,
            selection: None,
        }
    }

    #[test]
    fn noiseless_constant_regression() {
        let d = Dataset::regression(vec![1.0; 300]).unwrap();
        let est = adaptive_estimate(&d).unwrap();
        assert_abs_diff_eq!(est.coeffs[0], 1.0, epsilon = 1e-15);
        assert!(est.coeffs[1..].iter().all(|c| c.abs() < 1e-13));
        for x in [0.0, 0.3, 0.77, 1.0] {
            assert_abs_diff_eq!(est.value(x), 1.0, epsilon = 1e-10);
        }
        let zero = adaptive_estimate(&Dataset::regression(vec![0.0; 300]).unwrap()).unwrap();
        assert_eq!(zero.n_selected, 100);
        assert!(zero.coeffs.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn coefficients_are_a_prefix_of_the_empirical_ones() {
        let t = make_w_target(1.0, 0.0, 1.0, 512, Constraint::Nonnegative).unwrap();
        let d = gen_density_sample(&t, 999, 4.into()).unwrap();
        let est = adaptive_estimate(&d).unwrap();
        let e = empirical_coeffs(&d, default_k(999)).unwrap();
        assert_eq!(&est.coeffs[..], &e.coeffs[..est.n_selected]);
        assert_eq!(est.coeffs.len(), est.n_selected);
        assert_eq!(adaptive_estimate(&d).unwrap(), est);
    }

    #[test]
    fn error_identities() {
        let t = make_w_target(1.0, 0.0, 1.0, 64, Constraint::None).unwrap();
        let exact = estimate_with(t.series.coeffs()[..10].to_vec());
        assert_abs_diff_eq!(
            l2_error(&exact, &t).unwrap(),
            t.series.tail_rho(10).unwrap(),
            epsilon = 1e-16
        );
        let zero = estimate_with(vec![0.0]);
        let total = t.series.norm_sq();
        assert_abs_diff_eq!(l2_error(&zero, &t).unwrap(), total, epsilon = 1e-14);
        let too_long = estimate_with(vec![0.0; 65]);
        assert!(matches!(l2_error(&too_long, &t), Err(Error::Truncation { .. })));
    }

    #[test]
    fn error_matches_quadrature() {
        let t = make_w_target(1.0, 0.0, 1.0, 64, Constraint::None).unwrap();
        let d = gen_regression(&t, 600, NoiseSpec::gaussian(0.5), 8.into()).unwrap();
        let est = adaptive_estimate(&d).unwrap();
        let exact = l2_error(&est, &t).unwrap();
        let quad = quadrature(|x| (est.value(x) - t.eval(x)).powi(2), 8192);
        assert!(((exact - quad) / exact).abs() < 1e-6, "{exact} vs {quad}");
    }

    #[test]
    fn noiseless_recovery_of_a_short_series() {
        // no harmonic above n/2, so the design coefficients are exact
        let t = make_w_target(1.0, 0.0, 1.5, 256, Constraint::None).unwrap();
        let d = gen_regression(&t, 900, NoiseSpec::gaussian(0.0), 0.into()).unwrap();
        let est = adaptive_estimate(&d).unwrap();
        assert_eq!(est.n_selected, 300);
        for j in 1..=300 {
            assert_abs_diff_eq!(est.coeffs[j - 1], t.series.coeff(j), epsilon = 1e-13);
        }
        assert!(matches!(l2_error(&est, &t), Err(Error::Truncation { needed: 300, .. })));
    }

    #[test]
    fn evaluation() {
        let one = estimate_with(vec![1.0]);
        assert_eq!(evaluate(&one, &[0.0, 0.5, 1.0]).unwrap(), vec![1.0; 3]);
        assert!(evaluate(&one, &[]).unwrap().is_empty());
        assert!(evaluate(&one, &[1.5]).is_err());
        let c = vec![0.3, -0.2, 0.5, 0.1, 0.05];
        let est = estimate_with(c.clone());
        let series = FourierSeries::new(c).unwrap();
        let grid: Vec<f64> = (0..=50).map(|i| i as f64 / 50.0).collect();
        for (x, v) in grid.iter().zip(evaluate(&est, &grid).unwrap()) {
            assert_abs_diff_eq!(v, series.partial_sum(5, *x).unwrap(), epsilon = 1e-14);
        }
    }
}
