//! Synthetic targets with known coefficient tails.
//!
//! Two families are provided, both built so that the tail
//! `rho(N) = sum_{j>N} c_j^2` follows a prescribed profile exactly:
//!
//! * `W(C, alpha, beta)`: `rho(N) ~ C (N+1)^{-2 beta} log(N+e)^alpha`,
//! * `Z(alpha, beta)`: `rho(N) ~ alpha beta^N`.
//!
//! Coefficients alternate in sign, `c_j = (-1)^j sqrt(rho(j-1) - rho(j))`.

use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use crate::trig_basis::FourierSeries;
use crate::{Error, Result};

/// Shape constraints a target must satisfy for the density and spectral problems.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    #[default]
    None,
    /// `f >= 0` and `int f = 1`.
    Nonnegative,
    /// Only `c_1` and cosine coefficients are nonzero.
    Even,
    /// Even and nonnegative with `c_1 = 1`: a valid spectral density.
    EvenNonnegative,
}

impl Constraint {
    pub fn is_even(self) -> bool {
        matches!(self, Constraint::Even | Constraint::EvenNonnegative)
    }

    pub fn is_nonnegative(self) -> bool {
        matches!(self, Constraint::Nonnegative | Constraint::EvenNonnegative)
    }
}

/// Regularity class of a target and its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class_tag", content = "params")]
pub enum TargetClass {
    W {
        #[serde(rename = "C")]
        c: f64,
        alpha: f64,
        beta: f64,
    },
    Z {
        alpha: f64,
        beta: f64,
    },
    Custom,
}

impl TargetClass {
    /// The profile `rho_bar(N)` the construction follows, before rescaling.
    pub fn model_tail(&self, n: usize) -> Option<f64> {
        let n = n as f64;
        match *self {
            TargetClass::W { c, alpha, beta } => Some(c * (n + 1.0).powf(-2.0 * beta) * (n + E).ln().powf(alpha)),
            TargetClass::Z { alpha, beta } => Some(alpha * beta.powf(n)),
            TargetClass::Custom => None,
        }
    }
}

/// A target function with known coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    #[serde(flatten)]
    pub class: TargetClass,
    #[serde(default)]
    pub constraint: Constraint,
    /// Limit of `rho(2N)/rho(N)`.
    #[serde(default)]
    pub gamma_limit: f64,
    /// Factor applied to the profile by the nonnegativity rescale.
    #[serde(default = "one")]
    pub tail_scale: f64,
    #[serde(rename = "coeffs")]
    pub series: FourierSeries,
}

fn one() -> f64 {
    1.0
}

/// Nodes used to certify `f >= 0`.
pub(crate) fn certification_grid(j: usize) -> usize {
    (16 * j).next_power_of_two().clamp(8192, 1 << 22)
}

const NONNEGATIVE_TOL: f64 = 1e-10;

impl TargetSpec {
    /// A target from explicit coefficients, checked against `constraint`.
    pub fn custom(series: FourierSeries, constraint: Constraint) -> Result<Self> {
        let t = TargetSpec {
            class: TargetClass::Custom,
            constraint,
            gamma_limit: 0.0,
            tail_scale: 1.0,
            series,
        };
        t.check_constraint()?;
        Ok(t)
    }

    pub fn series(&self) -> &FourierSeries {
        &self.series
    }

    /// Truncation order `J`.
    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.series.eval(x)
    }

    /// Smallest value on the certification grid.
    pub fn grid_min(&self) -> f64 {
        self.series
            .grid_values(certification_grid(self.len()))
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    }

    /// Whether the odd (sine) coefficients vanish.
    pub fn is_even(&self) -> bool {
        self.series
            .coeffs()
            .iter()
            .enumerate()
            .all(|(i, &c)| i == 0 || i % 2 == 1 || c == 0.0)
    }

    /// Whether `f` is a probability density on `[0, 1]`.
    pub fn is_density(&self) -> bool {
        (self.series.coeff(1) - 1.0).abs() <= 1e-8 && self.grid_min() >= -NONNEGATIVE_TOL
    }

    pub fn check_constraint(&self) -> Result<()> {
        if self.constraint.is_even() && !self.is_even() {
            return Err(Error::Infeasible(
                "sine coefficients of an even target must vanish".into(),
            ));
        }
        if self.constraint.is_nonnegative() {
            let min = self.grid_min();
            if min < -NONNEGATIVE_TOL {
                return Err(Error::Infeasible(format!("target reaches {min:e} < 0")));
            }
            if self.constraint == Constraint::Nonnegative && (self.series.coeff(1) - 1.0).abs() > 1e-8 {
                return Err(Error::Infeasible(format!(
                    "density must integrate to 1, c_1 = {}",
                    self.series.coeff(1)
                )));
            }
        }
        Ok(())
    }
}

/// Coefficient magnitudes following `profile`, with alternating signs.
fn from_profile(profile: impl Fn(usize) -> f64, j_max: usize, even: bool) -> Result<Vec<f64>> {
    let mut coeffs = Vec::with_capacity(j_max);
    for j in 1..=j_max {
        let mass = if !even {
            profile(j - 1) - profile(j)
        } else if j == 1 {
            profile(0) - profile(1)
        } else if j % 2 == 0 {
            profile((j - 2).max(1)) - profile(j)
        } else {
            0.0
        };
        if mass < 0.0 || !mass.is_finite() {
            return Err(Error::Parameter(format!(
                "tail profile is not nonincreasing at index {j}"
            )));
        }
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        coeffs.push(sign * mass.sqrt());
    }
    Ok(coeffs)
}

/// Replace `c_1` by the smallest offset (plus a margin) that makes `f >= 0`,
/// then rescale so that `c_1 = 1`. Returns the squared scale factor.
fn enforce_nonnegative(coeffs: &mut [f64]) -> Result<f64> {
    coeffs[0] = 0.0;
    let g = certification_grid(coeffs.len());
    let rest = FourierSeries::new(coeffs.to_vec())?.grid_values(g);
    let (min, max) = rest.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    let range = max - min;
    let offset = if range > 0.0 { -min + 0.1 * range } else { 1.0 };
    if !(offset.is_finite() && offset > 0.0) {
        return Err(Error::Infeasible(format!("no positive offset (min {min:e})")));
    }
    let scale = 1.0 / offset;
    coeffs[0] = 1.0;
    for c in coeffs[1..].iter_mut() {
        *c *= scale;
    }
    // certify on a grid twice as fine as the one used to pick the offset
    let fine = FourierSeries::new(coeffs.to_vec())?.grid_values(2 * g);
    let fine_min = fine.into_iter().fold(f64::INFINITY, f64::min);
    if fine_min < -NONNEGATIVE_TOL {
        return Err(Error::Infeasible(format!(
            "nonnegativity could not be certified at J = {}, min {fine_min:e}",
            coeffs.len()
        )));
    }
    Ok(scale * scale)
}

fn build(class: TargetClass, j: usize, constraint: Constraint, gamma_limit: f64) -> Result<TargetSpec> {
    if j < 16 {
        return Err(Error::Parameter(format!("truncation order J = {j} is below 16")));
    }
    if constraint.is_even() && j % 2 == 1 {
        return Err(Error::Parameter(format!(
            "even targets need an even truncation order, got J = {j}"
        )));
    }
    let profile = |n: usize| class.model_tail(n).unwrap_or(0.0);
    let mut coeffs = from_profile(profile, j, constraint.is_even())?;
    let tail_scale = if constraint.is_nonnegative() {
        enforce_nonnegative(&mut coeffs)?
    } else {
        1.0
    };
    Ok(TargetSpec {
        class,
        constraint,
        gamma_limit,
        tail_scale,
        series: FourierSeries::new(coeffs)?,
    })
}

/// A `W(C, alpha, beta)` target truncated at `J`.
pub fn make_w_target(c: f64, alpha: f64, beta: f64, j: usize, constraint: Constraint) -> Result<TargetSpec> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::Parameter(format!("C must be positive, got {c}")));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::Parameter(format!("beta must be positive, got {beta}")));
    }
    if !alpha.is_finite() {
        return Err(Error::Parameter(format!("alpha must be finite, got {alpha}")));
    }
    let gamma = 2f64.powf(-2.0 * beta);
    build(TargetClass::W { c, alpha, beta }, j, constraint, gamma)
}

/// A `Z(alpha, beta)` target truncated at `J`.
pub fn make_z_target(alpha: f64, beta: f64, j: usize, constraint: Constraint) -> Result<TargetSpec> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Parameter(format!("alpha must be positive, got {alpha}")));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::Parameter(format!("beta must lie in (0, 1), got {beta}")));
    }
    build(TargetClass::Z { alpha, beta }, j, constraint, 0.0)
}

/// One point of the `rho(2N)/rho(N)` diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaPoint {
    pub n: usize,
    /// `None` when `rho(N) = 0`.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaCurve {
    pub points: Vec<GammaPoint>,
    /// Set when some ratio is `>= 1` or undefined.
    pub violation: bool,
}

/// `rho(2N)/rho(N)` for `N = 1..=n_max`.
pub fn empirical_gamma_curve(t: &TargetSpec, n_max: usize) -> Result<GammaCurve> {
    if 2 * n_max > t.len() {
        return Err(Error::Range {
            what: "2 * N_max",
            value: 2 * n_max,
            limit: t.len(),
        });
    }
    let rho = t.series.tail_profile();
    let points: Vec<GammaPoint> = (1..=n_max)
        .map(|n| GammaPoint {
            n,
            ratio: (rho[n] > 0.0).then(|| rho[2 * n] / rho[n]),
        })
        .collect();
    let violation = points.iter().any(|p| p.ratio.is_none_or(|r| r >= 1.0));
    Ok(GammaCurve { points, violation })
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn w_profile(c: f64, alpha: f64, beta: f64) -> impl Fn(usize) -> f64 {
        move |n| c * ((n + 1) as f64).powf(-2.0 * beta) * ((n as f64) + E).ln().powf(alpha)
    }

    #[test]
    fn w_tail_by_construction() {
        let t = make_w_target(1.0, 0.0, 0.5, 64, Constraint::None).unwrap();
        for n in 0..=64 {
            let want = 1.0 / (n as f64 + 1.0) - 1.0 / 65.0;
            assert_abs_diff_eq!(t.series.tail_rho(n).unwrap(), want, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(t.gamma_limit, 0.5, epsilon = 1e-15);
        // far from J the ratio approaches 2^{-2 beta}
        let long = make_w_target(1.0, 0.0, 0.5, 1 << 20, Constraint::None).unwrap();
        let rho = long.series.tail_profile();
        assert_abs_diff_eq!(rho[2000] / rho[1000], 0.5, epsilon = 1e-3);
    }

    #[test]
    fn w_beta_one_decays_quadratically() {
        let t = make_w_target(1.0, 0.0, 1.0, 1 << 14, Constraint::None).unwrap();
        let rho = t.series.tail_profile();
        for n in [50usize, 100, 200] {
            let scaled = rho[n] * (n as f64).powi(2);
            assert!((scaled - 1.0).abs() < 0.05, "N^2 rho(N) = {scaled}");
        }
    }

    #[test]
    fn nonnegative_targets_are_densities() {
        for t in [
            make_w_target(1.0, 0.0, 1.0, 256, Constraint::Nonnegative).unwrap(),
            make_w_target(2.0, 1.0, 0.75, 300, Constraint::Nonnegative).unwrap(),
            make_z_target(1.0, 0.5, 128, Constraint::Nonnegative).unwrap(),
        ] {
            let g = 4096;
            let vals = t.series.grid_values(g);
            let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
            assert!(min >= -1e-10, "min {min}");
            let integral = crate::trig_basis::quadrature(|x| t.eval(x), g);
            assert_abs_diff_eq!(integral, 1.0, epsilon = 1e-8);
            assert!(t.is_density());
            // tail shape preserved up to the recorded scale
            let rho = t.series.tail_profile();
            let model = |n| t.class.model_tail(n).unwrap();
            for n in 1..t.len() {
                let want = t.tail_scale * (model(n) - model(t.len()));
                assert_abs_diff_eq!(rho[n], want, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn even_targets_have_no_sine_terms() {
        let t = make_w_target(1.0, 0.0, 1.0, 128, Constraint::EvenNonnegative).unwrap();
        assert!(t.is_even());
        for (i, c) in t.series.coeffs().iter().enumerate() {
            let j = i + 1;
            if j >= 3 && j % 2 == 1 {
                assert_eq!(*c, 0.0);
            }
        }
        assert!(t.grid_min() >= -1e-10);
        let z = make_z_target(1.0, 0.5, 64, Constraint::Even).unwrap();
        assert!(z.is_even());
        // even-index tails follow the profile
        let rho = z.series.tail_profile();
        for n in (2..64).step_by(2) {
            assert_abs_diff_eq!(rho[n], 0.5f64.powi(n as i32) - 0.5f64.powi(64), epsilon = 1e-15);
        }
        assert!(make_z_target(1.0, 0.5, 63, Constraint::Even).is_err());
    }

    #[test]
    fn z_tail() {
        let t = make_z_target(1.0, 0.5, 60, Constraint::None).unwrap();
        for n in 0..=60 {
            let want = 0.5f64.powi(n as i32) - 0.5f64.powi(60);
            assert_abs_diff_eq!(t.series.tail_rho(n).unwrap(), want, epsilon = 1e-15);
        }
        assert_eq!(t.gamma_limit, 0.0);
        let curve = empirical_gamma_curve(&t, 12).unwrap();
        let ratios: Vec<f64> = curve.points.iter().map(|p| p.ratio.unwrap()).collect();
        for w in ratios.windows(2) {
            assert!(w[1] < w[0]);
        }
        assert!(*ratios.last().unwrap() < 1e-3);
    }

    #[test]
    fn parameter_errors() {
        assert!(matches!(
            make_z_target(1.0, 0.0, 60, Constraint::None),
            Err(Error::Parameter(_))
        ));
        assert!(matches!(
            make_z_target(1.0, 1.0, 60, Constraint::None),
            Err(Error::Parameter(_))
        ));
        assert!(matches!(
            make_z_target(0.0, 0.5, 60, Constraint::None),
            Err(Error::Parameter(_))
        ));
        assert!(matches!(
            make_w_target(0.0, 0.0, 1.0, 64, Constraint::None),
            Err(Error::Parameter(_))
        ));
        assert!(matches!(
            make_w_target(1.0, 0.0, 0.0, 64, Constraint::None),
            Err(Error::Parameter(_))
        ));
        assert!(matches!(
            make_w_target(1.0, 0.0, 1.0, 8, Constraint::None),
            Err(Error::Parameter(_))
        ));
        // strongly increasing log factor breaks monotonicity of the profile
        assert!(matches!(
            make_w_target(1.0, 40.0, 0.1, 64, Constraint::None),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn gamma_curve_for_w() {
        let t = make_w_target(1.0, 0.0, 0.5, 4096, Constraint::None).unwrap();
        let curve = empirical_gamma_curve(&t, 16).unwrap();
        assert!(!curve.violation);
        for p in &curve.points[7..] {
            let r = p.ratio.unwrap();
            assert!((0.45..=0.55).contains(&r), "N = {}: {r}", p.n);
        }
        assert!(matches!(empirical_gamma_curve(&t, 2049), Err(Error::Range { .. })));
    }

    #[test]
    fn degenerate_series_flags_violation() {
        let t = TargetSpec::custom(FourierSeries::new(vec![1.0, 0.0, 0.0, 0.0]).unwrap(), Constraint::None).unwrap();
        let curve = empirical_gamma_curve(&t, 2).unwrap();
        assert!(curve.violation);
        assert!(curve.points.iter().all(|p| p.ratio.is_none()));
    }

    #[test]
    fn custom_constraint_checks() {
        let neg = FourierSeries::new(vec![1.0, 1.0]).unwrap();
        assert!(matches!(
            TargetSpec::custom(neg, Constraint::Nonnegative),
            Err(Error::Infeasible(_))
        ));
        let odd = FourierSeries::new(vec![1.0, 0.0, 0.1]).unwrap();
        assert!(matches!(
            TargetSpec::custom(odd, Constraint::Even),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn json_document() {
        let t = make_z_target(1.0, 0.5, 32, Constraint::Nonnegative).unwrap();
        let doc = serde_json::to_value(&t).unwrap();
        assert_eq!(doc["class_tag"], "Z");
        assert_eq!(doc["params"]["beta"], 0.5);
        assert_eq!(doc["coeffs"].as_array().unwrap().len(), 32);
        let back: TargetSpec = serde_json::from_value(doc).unwrap();
        assert_eq!(back, t);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn w_tail_identity(c in 0.1f64..5.0, alpha in -1.0f64..1.0, beta in 0.3f64..3.0, j in 16usize..300) {
            let t = make_w_target(c, alpha, beta, j, Constraint::None).unwrap();
            let profile = w_profile(c, alpha, beta);
            let rho = t.series.tail_profile();
            for n in 0..=j {
                prop_assert!((rho[n] - (profile(n) - profile(j))).abs() <= 1e-12);
            }
            for n in 0..j {
                prop_assert!(rho[n] > 0.0);
            }
        }

        // The truncated ratio at N = J/4 equals (2^{2b}-1)/(4^{2b}-1) for pure power
        // tails, so the check is restricted to beta >= 0.75.
        #[test]
        fn gamma_limit_consistency(beta in 0.75f64..3.0, alpha in -0.5f64..0.5, k in 6u32..12) {
            let j = 1usize << k;
            let t = make_w_target(1.0, alpha, beta, j, Constraint::None).unwrap();
            let curve = empirical_gamma_curve(&t, j / 4).unwrap();
            let r = curve.points.last().unwrap().ratio.unwrap();
            prop_assert!((r - t.gamma_limit).abs() <= 0.1, "ratio {} vs {}", r, t.gamma_limit);
        }
    }
}
