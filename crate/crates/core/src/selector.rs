//! Harmonic-count selection.
//!
//! The data-driven rule picks `N(n) = argmin_N tau(n, N)` over
//! `N = 1..=floor(n/3)`, with `tau(n, N) = sum_{k=N+1}^{2N} c_hat_k^2` and
//! ties going to the largest `N`. The oracle counterparts `A(n, N)` and
//! `B(n, N)` are computed from true coefficients and are only available in
//! simulation.

use serde::{Deserialize, Serialize};

use crate::empirical::EmpiricalCoeffs;
use crate::samplers::{design_values, NoiseSpec};
use crate::targets::TargetSpec;
use crate::{fft, max_harmonics, Error, Problem, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    /// `tau[N-1] = tau(n, N)`.
    pub tau: Vec<f64>,
    pub n_selected: usize,
    pub tau_star: f64,
}

impl SelectionResult {
    /// `tau(n, N)`, 1-based.
    pub fn tau_at(&self, n: usize) -> Option<f64> {
        n.checked_sub(1).and_then(|i| self.tau.get(i)).copied()
    }
}

/// `sum_{k=N+1}^{2N} coeffs_k^2` for `N = 1..=n_max` via prefix sums.
///
/// Prefix sums of nonnegative terms are nondecreasing in floating point, so
/// every entry is `>= 0`.
fn window_sums(coeffs: &[f64], n_max: usize) -> Vec<f64> {
    let mut prefix = vec![0.0; 2 * n_max + 1];
    for k in 2..=2 * n_max {
        prefix[k] = prefix[k - 1] + coeffs[k - 1] * coeffs[k - 1];
    }
    (1..=n_max).map(|n| prefix[2 * n] - prefix[n]).collect()
}

/// `tau(n, N)` for `N = 1..=floor(n/3)`.
pub fn tau_curve(e: &EmpiricalCoeffs, n: usize) -> Result<Vec<f64>> {
    let n_max = max_harmonics(n);
    if e.coeffs.len() < 2 * n_max {
        return Err(Error::InsufficientCoefficients {
            needed: 2 * n_max,
            available: e.coeffs.len(),
        });
    }
    Ok(window_sums(&e.coeffs, n_max))
}

/// Largest `N` attaining `min tau`, together with the minimum.
pub fn select_n(tau: &[f64]) -> Result<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &t) in tau.iter().enumerate() {
        match best {
            Some((_, b)) if t > b => {}
            _ => best = Some((i + 1, t)),
        }
    }
    best.ok_or(Error::EmptyCurve)
}

pub fn select(e: &EmpiricalCoeffs) -> Result<SelectionResult> {
    let tau = tau_curve(e, e.n)?;
    let (n_selected, tau_star) = select_n(&tau)?;
    Ok(SelectionResult {
        tau,
        n_selected,
        tau_star,
    })
}

/// The noise level `Delta_s` of each problem: `sigma^2`, `1`, `||f||^2`.
pub fn delta_for(problem: Problem, t: &TargetSpec, noise: Option<&NoiseSpec>) -> Result<f64> {
    match problem {
        Problem::R => noise
            .map(NoiseSpec::variance)
            .ok_or_else(|| Error::Parameter("regression needs a noise spec for Delta_1".into())),
        Problem::D => Ok(1.0),
        Problem::S => Ok(t.series.norm_sq()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCurves {
    /// `a[N-1] = A(n, N) = rho(N) + Delta N/n`.
    pub a: Vec<f64>,
    /// `b[N-1] = B(n, N) = sum_{k=N+1}^{2N} c_k^2 + Delta N/n`.
    pub b: Vec<f64>,
    pub a_min: f64,
    pub b_min: f64,
    /// `N^0(n) = argmin B`, largest tie.
    pub n0: usize,
    pub delta_s: f64,
}

impl OracleCurves {
    pub fn condition_v(&self) -> Result<ConditionVFit> {
        condition_v_fit(&self.b, self.n0)
    }
}

/// Oracle curves from the true coefficients.
///
/// For problem R the window sums use the design coefficients
/// `c_k(n) = n^{-1} sum_i f(i/n) phi_k(i/n)`.
pub fn oracle_curves(t: &TargetSpec, problem: Problem, n: usize, delta_s: f64) -> Result<OracleCurves> {
    if !(delta_s >= 0.0 && delta_s.is_finite()) {
        return Err(Error::Parameter(format!("Delta_s must be nonnegative, got {delta_s}")));
    }
    let n_max = max_harmonics(n);
    if n_max == 0 {
        return Err(Error::EmptyCurve);
    }
    if t.len() < 2 * n_max {
        return Err(Error::Truncation {
            needed: 2 * n_max,
            available: t.len(),
        });
    }
    let coeffs = match problem {
        Problem::R => fft::grid_coefficients(&design_values(t, n), 2 * n_max),
        Problem::D | Problem::S => t.series.coeffs()[..2 * n_max].to_vec(),
    };
    let penalty = |k: usize| delta_s * k as f64 / n as f64;
    let rho = t.series.tail_profile();
    let b: Vec<f64> = window_sums(&coeffs, n_max)
        .into_iter()
        .enumerate()
        .map(|(i, w)| w + penalty(i + 1))
        .collect();
    let a: Vec<f64> = (1..=n_max).map(|k| rho[k] + penalty(k)).collect();
    let (n0, b_min) = select_n(&b)?;
    let (_, a_min) = select_n(&a)?;
    Ok(OracleCurves {
        a,
        b,
        a_min,
        b_min,
        n0,
        delta_s,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

/// One point of the well-shapedness check around the minimiser.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginPoint {
    pub n: usize,
    pub side: Side,
    /// `N/N* - 1` on the right, `N*/N - 1` on the left.
    pub v: f64,
    /// `curve(N)/curve(N*) - 1`.
    pub excess: f64,
    /// `excess - (C1/2) v^2/(1 + C2 v)`; negative values are violations.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionVFit {
    pub c1: f64,
    pub c2: f64,
    /// Residual sum of squares on the log scale.
    pub rss: f64,
    pub points: Vec<MarginPoint>,
    pub left_points: usize,
    pub right_points: usize,
    pub min_margin_left: Option<f64>,
    pub min_margin_right: Option<f64>,
    /// Every margin is nonnegative, i.e. the lower bound holds with `(C1/2, C2)`.
    pub certified: bool,
}

/// Fraction of the fitted curvature used as the certified lower bound.
pub const CERTIFICATE_FRACTION: f64 = 0.5;

fn shape(v: f64, c2: f64) -> f64 {
    v * v / (1.0 + c2 * v)
}

/// Log-scale least squares of `excess(v) ~ C1 v^2/(1 + C2 v)`.
///
/// For fixed `C2` the optimal `log C1` is a mean, so the fit reduces to a
/// one-dimensional search over `C2 >= 0`.
pub fn condition_v_fit(curve: &[f64], n_star: usize) -> Result<ConditionVFit> {
    if n_star == 0 || n_star > curve.len() {
        return Err(Error::Range {
            what: "N*",
            value: n_star,
            limit: curve.len(),
        });
    }
    let base = curve[n_star - 1];
    if !(base > 0.0) {
        return Err(Error::DegenerateFit { usable: 0 });
    }
    let mut all = Vec::with_capacity(curve.len());
    for (i, &value) in curve.iter().enumerate() {
        let n = i + 1;
        if n == n_star {
            continue;
        }
        let (side, v) = if n > n_star {
            (Side::Right, n as f64 / n_star as f64 - 1.0)
        } else {
            (Side::Left, n_star as f64 / n as f64 - 1.0)
        };
        all.push(MarginPoint {
            n,
            side,
            v,
            excess: value / base - 1.0,
            margin: 0.0,
        });
    }
    let usable: Vec<(f64, f64)> = all
        .iter()
        .filter(|p| p.excess > 0.0 && p.excess.is_finite())
        .map(|p| (p.v, p.excess.ln()))
        .collect();
    if usable.len() < 4 {
        return Err(Error::DegenerateFit { usable: usable.len() });
    }
    let profile = |c2: f64| -> (f64, f64) {
        let m = usable.len() as f64;
        let log_c1 = usable.iter().map(|&(v, ly)| ly - shape(v, c2).ln()).sum::<f64>() / m;
        let rss = usable
            .iter()
            .map(|&(v, ly)| (ly - log_c1 - shape(v, c2).ln()).powi(2))
            .sum();
        (log_c1, rss)
    };
    let mut grid = vec![0.0];
    grid.extend((0..=250).map(|i| 10f64.powf(-4.0 + 10.0 * i as f64 / 250.0)));
    let (best, _) = grid
        .iter()
        .enumerate()
        .map(|(i, &c2)| (i, profile(c2).1))
        .fold((0, f64::INFINITY), |acc, (i, r)| if r < acc.1 { (i, r) } else { acc });
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(grid.len() - 1)];
    let c2 = golden_section(|c| profile(c).1, lo, hi, 1e-13);
    let (log_c1, rss) = profile(c2);
    let c1 = log_c1.exp();
    for p in all.iter_mut() {
        p.margin = p.excess - CERTIFICATE_FRACTION * c1 * shape(p.v, c2);
    }
    let side_min = |side: Side| all.iter().filter(|p| p.side == side).map(|p| p.margin).reduce(f64::min);
    let min_margin_left = side_min(Side::Left);
    let min_margin_right = side_min(Side::Right);
    let left_points = all.iter().filter(|p| p.side == Side::Left).count();
    Ok(ConditionVFit {
        c1,
        c2,
        rss,
        right_points: all.len() - left_points,
        left_points,
        certified: all.iter().all(|p| p.margin >= 0.0),
        points: all,
        min_margin_left,
        min_margin_right,
    })
}

/// Minimiser of a unimodal function on `[lo, hi]`.
pub(crate) fn golden_section<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, rel_tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..500 {
        if (hi - lo) <= rel_tol * (x1.abs() + x2.abs()).max(1e-300) {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        x1
    } else {
        x2
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::targets::{make_w_target, make_z_target, Constraint};
    use crate::trig_basis::FourierSeries;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn coeffs(problem: Problem, n: usize, c: Vec<f64>) -> EmpiricalCoeffs {
        EmpiricalCoeffs { problem, n, coeffs: c }
    }

    #[test]
    fn tau_examples() {
        let e = coeffs(Problem::D, 30, vec![0.0; 20]);
        assert!(tau_curve(&e, 30).unwrap().iter().all(|&t| t == 0.0));
        let e = coeffs(Problem::D, 30, vec![1.0; 20]);
        let tau = tau_curve(&e, 30).unwrap();
        for (i, t) in tau.iter().enumerate() {
            assert_eq!(*t, (i + 1) as f64);
        }
        let c: Vec<f64> = (1..=40).map(|j| ((j * 7) % 13) as f64 / 13.0 - 0.4).collect();
        let e = coeffs(Problem::R, 60, c.clone());
        let tau = tau_curve(&e, 60).unwrap();
        let brute: f64 = c[7..14].iter().map(|x| x * x).sum();
        assert_abs_diff_eq!(tau[6], brute, epsilon = 1e-14);
        let short = coeffs(Problem::R, 60, vec![0.0; 39]);
        assert!(matches!(
            tau_curve(&short, 60),
            Err(Error::InsufficientCoefficients { .. })
        ));
    }

    #[test]
    fn selection_ties() {
        assert_eq!(select_n(&[3.0, 1.0, 2.0]).unwrap(), (2, 1.0));
        assert_eq!(select_n(&[0.0; 10]).unwrap(), (10, 0.0));
        assert_eq!(select_n(&[5.0, 5.0, 7.0]).unwrap(), (2, 5.0));
        assert!(matches!(select_n(&[]), Err(Error::EmptyCurve)));
    }

    #[test]
    fn pure_penalty_oracle() {
        let mut c = vec![0.0; 64];
        c[0] = 1.0;
        let t = TargetSpec::custom(FourierSeries::new(c).unwrap(), Constraint::None).unwrap();
        let o = oracle_curves(&t, Problem::D, 96, 1.0).unwrap();
        for (i, b) in o.b.iter().enumerate() {
            assert_abs_diff_eq!(*b, (i + 1) as f64 / 96.0, epsilon = 1e-15);
        }
        assert_eq!(o.n0, 1);
        let fit = o.condition_v().unwrap();
        assert_eq!(fit.left_points, 0);
        assert_eq!(fit.min_margin_left, None);
        assert!(fit.right_points >= 4);
    }

    #[test]
    fn w_oracle_minimum_matches_brute_force() {
        let n = 1024;
        let t = make_w_target(1.0, 0.0, 0.5, 2048, Constraint::None).unwrap();
        let o = oracle_curves(&t, Problem::D, n, 1.0).unwrap();
        let brute = (1..=n / 3)
            .map(|k| 1.0 / (k as f64 + 1.0) + k as f64 / n as f64)
            .fold(f64::INFINITY, f64::min);
        assert!((o.a_min - brute).abs() <= 0.1 * brute, "{} vs {}", o.a_min, brute);
        assert!(matches!(
            oracle_curves(&t, Problem::D, 4096, 1.0),
            Err(Error::Truncation { .. })
        ));
        assert!(oracle_curves(&t, Problem::D, n, -1.0).is_err());
    }

    #[test]
    fn z_oracle_rate() {
        let t = make_z_target(1.0, 0.5, 1 << 15, Constraint::None).unwrap();
        for k in 10..=14 {
            let n = 1usize << k;
            let o = oracle_curves(&t, Problem::D, n, 1.0).unwrap();
            let reference = (n as f64).log2() / n as f64;
            let ratio = o.a_min / reference;
            assert!((0.5..=2.0).contains(&ratio), "n = {n}: {ratio}");
        }
    }

    #[test]
    fn regression_oracle_uses_design_coefficients() {
        let t = make_w_target(1.0, 0.0, 1.0, 256, Constraint::None).unwrap();
        let o = oracle_curves(&t, Problem::R, 90, 0.25).unwrap();
        let dc = fft::grid_coefficients(&design_values(&t, 90), 60);
        let want: f64 = dc[3..6].iter().map(|c| c * c).sum::<f64>() + 0.25 * 3.0 / 90.0;
        assert_abs_diff_eq!(o.b[2], want, epsilon = 1e-15);
    }

    #[test]
    fn oracle_n0_nondecreasing_in_n() {
        let t = make_w_target(1.0, 0.0, 1.0, 1 << 14, Constraint::None).unwrap();
        let mut last = 0;
        for k in 6..=13 {
            let o = oracle_curves(&t, Problem::D, 1 << k, 1.0).unwrap();
            assert!(o.n0 >= last);
            last = o.n0;
        }
    }

    #[test]
    fn condition_v_recovers_exact_model() {
        let n_star = 20;
        let curve: Vec<f64> = (1..=200usize)
            .map(|n| {
                let v = if n >= n_star {
                    n as f64 / n_star as f64 - 1.0
                } else {
                    n_star as f64 / n as f64 - 1.0
                };
                0.01 * (1.0 + v * v / (1.0 + v))
            })
            .collect();
        let fit = condition_v_fit(&curve, n_star).unwrap();
        assert_abs_diff_eq!(fit.c1, 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(fit.c2, 1.0, epsilon = 1e-6);
        assert!(fit.certified);
        assert!(matches!(
            condition_v_fit(&curve[..4], 2),
            Err(Error::DegenerateFit { .. })
        ));
    }

    #[test]
    fn condition_v_holds_for_w() {
        let t = make_w_target(1.0, 0.0, 1.0, 4096, Constraint::Nonnegative).unwrap();
        let o = oracle_curves(&t, Problem::D, 4096, 1.0).unwrap();
        let fit = o.condition_v().unwrap();
        assert!(fit.certified, "{:?} {:?}", fit.min_margin_left, fit.min_margin_right);
        assert!(fit.left_points > 0);
        // cross-check on A
        let (na, _) = select_n(&o.a).unwrap();
        assert!(condition_v_fit(&o.a, na).is_ok());
    }

    proptest! {
        #[test]
        fn selection_scale_invariance(c in prop::collection::vec(-1.0f64..1.0, 60), k in -6i32..6) {
            let e = coeffs(Problem::D, 90, c.clone());
            let a = select(&e).unwrap();
            let lambda = 2f64.powi(k);
            let scaled = coeffs(Problem::D, 90, c.iter().map(|x| x * lambda).collect());
            let b = select(&scaled).unwrap();
            prop_assert_eq!(a.n_selected, b.n_selected);
            prop_assert_eq!(a.tau_star * lambda * lambda, b.tau_star);
        }

        #[test]
        fn tau_star_is_the_minimum(c in prop::collection::vec(-1.0f64..1.0, 60), lambda in 0.1f64..10.0) {
            let e = coeffs(Problem::D, 90, c.clone());
            let a = select(&e).unwrap();
            prop_assert!(a.tau.iter().all(|&t| t >= 0.0 && a.tau_star <= t));
            prop_assert_eq!(a.tau[a.n_selected - 1], a.tau_star);
            let b = select(&coeffs(Problem::D, 90, c.iter().map(|x| x * lambda).collect())).unwrap();
            prop_assert_eq!(a.n_selected, b.n_selected);
            prop_assert!((b.tau_star - lambda * lambda * a.tau_star).abs() <= 1e-12 * b.tau_star.max(1e-300));
        }
    }
}
