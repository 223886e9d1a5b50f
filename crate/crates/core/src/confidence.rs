//! Adaptive confidence intervals and explicit tail bounds.
//!
//! `gamma_hat` comes from `tau` at `M`, `2M` and `4M` with
//! `M = floor(exp(sqrt(ln n)))`. Theorem constants the theory leaves
//! unspecified enter as `c_free` (default 1), so the exponential bounds are
//! shapes rather than guarantees.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::estimator::AdaptiveEstimate;
use crate::samplers::{NoiseFamily, NoiseSpec};
use crate::selector::golden_section;
use crate::{max_harmonics, Error, Problem, Result};

/// Upper clip for `gamma_hat`.
pub const GAMMA_MAX: f64 = 0.99;

/// Raw ratio `(tau(4M) - 2 tau(2M)) / (tau(2M) - 2 tau(M))`.
pub fn gamma_ratio(tau_m: f64, tau_2m: f64, tau_4m: f64) -> Result<f64> {
    let den = tau_2m - 2.0 * tau_m;
    if !(den.abs() > 1e-12 * tau_m.abs().max(1.0)) {
        return Err(Error::DegenerateDenominator { tau_m, tau_2m, tau_4m });
    }
    Ok((tau_4m - 2.0 * tau_2m) / den)
}

/// [`gamma_ratio`] clipped to `[0, GAMMA_MAX]`.
pub fn estimate_gamma(tau_m: f64, tau_2m: f64, tau_4m: f64) -> Result<f64> {
    Ok(gamma_ratio(tau_m, tau_2m, tau_4m)?.clamp(0.0, GAMMA_MAX))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MChoice {
    pub m: usize,
    /// The formula value broke `4M <= floor(n/3)` and `floor(n/12)` was used.
    pub clamped: bool,
}

pub fn choose_m(n: usize) -> Result<MChoice> {
    if n < 9 {
        return Err(Error::Parameter(format!("sample size n = {n} is below 9")));
    }
    let m = (n as f64).ln().sqrt().exp().floor() as usize;
    if 4 * m <= max_harmonics(n) {
        Ok(MChoice { m, clamped: false })
    } else {
        Ok(MChoice {
            m: n / 12,
            clamped: true,
        })
    }
}

/// `tau_star / (1 - gamma_hat)` with the clipped `gamma_hat`.
pub fn aci_simple(tau_star: f64, tau_m: f64, tau_2m: f64, tau_4m: f64) -> Result<f64> {
    let g = estimate_gamma(tau_m, tau_2m, tau_4m)?;
    Ok(tau_star / (1.0 - g))
}

/// Solution of `2 exp(-c u^{r/2}) = delta`.
pub fn u_delta(delta: f64, r: f64, c_free: f64) -> Result<f64> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::Parameter(format!("delta must lie in (0, 1], got {delta}")));
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::Parameter(format!("r must be positive, got {r}")));
    }
    if !(c_free > 0.0 && c_free.is_finite()) {
        return Err(Error::Parameter(format!("c_free must be positive, got {c_free}")));
    }
    Ok(((2.0 / delta).ln() / c_free).powf(2.0 / r))
}

/// `tau_star / (1 - gamma_hat) + tau_star u(delta) / sqrt(N)`.
pub fn aci_refined(tau_star: f64, gamma_hat: f64, n_selected: usize, delta: f64, r: f64, c_free: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&gamma_hat) {
        return Err(Error::Parameter(format!(
            "gamma_hat must lie in [0, 1), got {gamma_hat}"
        )));
    }
    if n_selected == 0 {
        return Err(Error::Parameter("N must be at least 1".into()));
    }
    let u = u_delta(delta, r, c_free)?;
    Ok(tau_star / (1.0 - gamma_hat) + tau_star * u / (n_selected as f64).sqrt())
}

/// Default exponent `r`: `q/(q+2)` for regression noise with an
/// exponential tail of order `q`, `1` for density and spectral problems.
/// Student t noise has no such tail and falls back to the Gaussian `1/2`.
pub fn default_r(problem: Problem, noise: Option<&NoiseSpec>) -> f64 {
    match problem {
        Problem::D | Problem::S => 1.0,
        Problem::R => match noise.map(|n| n.family) {
            Some(NoiseFamily::SymmetricWeibull { q }) => q / (q + 2.0),
            _ => 0.5,
        },
    }
}

pub fn r1_objective(x: f64) -> f64 {
    x / ((0.5 - x) * (0.5 - x)) + 1.0 / x
}

/// `(min, argmin)` of [`r1_objective`] over `(0, 1/2)`.
pub fn r1_constants() -> (f64, f64) {
    let x = golden_section(r1_objective, 1e-9, 0.5 - 1e-9, 1e-15);
    (r1_objective(x), x)
}

/// `C1 mu_4 u^{-1} ln^2(C2 u)` for `u > e/C2`, capped at 1.
pub fn tail_bound_r1(u: f64, mu4: f64) -> Result<f64> {
    let (c1, c2) = r1_constants();
    let threshold = std::f64::consts::E / c2;
    if !(u > threshold) {
        return Err(Error::BelowThreshold { u, threshold });
    }
    if !(mu4 > 0.0 && mu4.is_finite()) {
        return Err(Error::Parameter(format!("mu_4 must be positive, got {mu4}")));
    }
    let l = (c2 * u).ln();
    Ok((c1 * mu4 * l * l / u).min(1.0))
}

/// `2^{2k} k^k mu_{2k} u^{-k/2}`, capped at 1.
pub fn tail_bound_r2(u: f64, k: u32, mu_2k: f64) -> Result<f64> {
    if k < 2 {
        return Err(Error::Parameter(format!("k must be at least 2, got {k}")));
    }
    if !(u > 0.0) {
        return Err(Error::BelowThreshold { u, threshold: 0.0 });
    }
    if !(mu_2k > 0.0 && mu_2k.is_finite()) {
        return Err(Error::Parameter(format!("mu_2k must be positive, got {mu_2k}")));
    }
    let kf = k as f64;
    let log = 2.0 * kf * 2f64.ln() + kf * kf.ln() + mu_2k.ln() - 0.5 * kf * u.ln();
    Ok(log.exp().min(1.0))
}

/// Inputs of the exponential tail bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailBoundParams {
    pub problem: Problem,
    /// Tail order `q` of the regression noise.
    pub q: f64,
    /// Tail scale `Q` of the regression noise.
    #[serde(rename = "Q")]
    pub big_q: f64,
    pub gamma: f64,
    #[serde(rename = "N0")]
    pub n0: usize,
    #[serde(rename = "B_n")]
    pub b_n: f64,
    #[serde(default = "one")]
    pub c_free: f64,
}

fn one() -> f64 {
    1.0
}

impl TailBoundParams {
    fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::Parameter(format!(
                "gamma must lie in [0, 1), got {}",
                self.gamma
            )));
        }
        if self.n0 == 0 {
            return Err(Error::Parameter("N0 must be at least 1".into()));
        }
        if !(self.b_n > 0.0 && self.b_n != 1.0 && self.b_n.is_finite()) {
            return Err(Error::Parameter(format!(
                "B(n) must be positive and not 1, got {}",
                self.b_n
            )));
        }
        if !(self.c_free > 0.0 && self.c_free.is_finite()) {
            return Err(Error::Parameter(format!(
                "c_free must be positive, got {}",
                self.c_free
            )));
        }
        if self.problem == Problem::R && !(self.q > 0.0 && self.big_q > 0.0) {
            return Err(Error::Parameter(format!(
                "regression needs q > 0 and Q > 0, got q = {}, Q = {}",
                self.q, self.big_q
            )));
        }
        Ok(())
    }

    /// `2Q/(1 - gamma)` for regression, `1/(1 - gamma)` otherwise.
    pub fn threshold(&self) -> f64 {
        match self.problem {
            Problem::R => 2.0 * self.big_q / (1.0 - self.gamma),
            Problem::D | Problem::S => 1.0 / (1.0 - self.gamma),
        }
    }
}

/// `5 exp(-c g(u))`, capped at 1, with
/// `g = N0 ((u - C)/Q)^{q/(2q+4)} / |ln B|` for regression and
/// `g = sqrt((u - C) N0) / |ln B|` for density and spectral problems.
pub fn tail_bound_exponential(u: f64, p: &TailBoundParams) -> Result<f64> {
    p.validate()?;
    let threshold = p.threshold();
    let strict = p.problem == Problem::R;
    if u < threshold || (strict && u == threshold) || u.is_nan() {
        return Err(Error::BelowThreshold { u, threshold });
    }
    let n0 = p.n0 as f64;
    let g = match p.problem {
        Problem::R => n0 * ((u - threshold) / p.big_q).powf(p.q / (2.0 * p.q + 4.0)),
        Problem::D | Problem::S => ((u - threshold) * n0).sqrt(),
    } / p.b_n.ln().abs();
    Ok((5.0 * (-p.c_free * g).exp()).min(1.0))
}

/// `2 exp(-phi(c sqrt(u)))`, capped at 1.
pub fn theorem_tau_bound<F: Fn(f64) -> f64>(u: f64, phi: F, c_free: f64) -> f64 {
    (2.0 * (-phi(c_free * u.max(0.0).sqrt())).exp()).min(1.0)
}

/// Whether `u <= C / B(n)`, the range where the self-normalized bound applies.
pub fn theorem_tau_regime(u: f64, c: f64, b_n: f64) -> bool {
    u <= c / b_n
}

/// Confidence statement for one estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceReport {
    #[serde(rename = "M")]
    pub m: usize,
    pub m_clamped: bool,
    /// Clipped; set to `GAMMA_MAX` when the ratio cannot be formed.
    pub gamma_hat: f64,
    pub gamma_raw: Option<f64>,
    /// `M` unusable, a vanishing denominator, or `gamma_hat` at the upper clip.
    pub degenerate: bool,
    /// `None` stands for an infinite bound.
    pub aci_simple: Option<f64>,
    pub aci_refined: Option<f64>,
    pub delta: f64,
    pub u_delta: f64,
    pub r_exponent: f64,
    pub c_free: f64,
    pub diagnostics: BTreeMap<String, f64>,
}

impl ConfidenceReport {
    pub fn covers_simple(&self, loss: f64) -> bool {
        self.aci_simple.is_none_or(|b| b >= loss)
    }

    pub fn covers_refined(&self, loss: f64) -> bool {
        self.aci_refined.is_none_or(|b| b >= loss)
    }
}

/// Optional ingredients of the plug-in tail inversion.
#[derive(Debug, Clone, Copy, Default)]
pub struct PlugIn {
    /// `(q, Q)` of the regression noise.
    pub rq: Option<(f64, f64)>,
}

/// `gamma_hat`, both ACIs and the plug-in tail inversion for `est`.
pub fn confidence_report(
    est: &AdaptiveEstimate,
    delta: f64,
    r: f64,
    c_free: f64,
    plug_in: PlugIn,
) -> Result<ConfidenceReport> {
    let sel = est
        .selection
        .as_ref()
        .ok_or_else(|| Error::Parameter("estimate carries no tau curve".into()))?;
    let u = u_delta(delta, r, c_free)?;
    let choice = choose_m(est.n)?;
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("tau_star".to_string(), est.tau_star);

    let taus = (choice.m >= 1)
        .then(|| {
            Some((
                sel.tau_at(choice.m)?,
                sel.tau_at(2 * choice.m)?,
                sel.tau_at(4 * choice.m)?,
            ))
        })
        .flatten();
    let raw = match taus {
        Some((a, b, c)) => {
            diagnostics.insert("tau_M".to_string(), a);
            diagnostics.insert("tau_2M".to_string(), b);
            diagnostics.insert("tau_4M".to_string(), c);
            match gamma_ratio(a, b, c) {
                Ok(g) => Some(g),
                Err(Error::DegenerateDenominator { .. }) => None,
                Err(e) => return Err(e),
            }
        }
        None => None,
    };
    // an exactly flat curve bounds the error by tau_star = 0 whatever gamma is
    let flat = taus.is_some_and(|(a, b, c)| a == 0.0 && b == 0.0 && c == 0.0);
    let degenerate = !flat && raw.is_none_or(|g| !g.is_finite() || g >= GAMMA_MAX);
    let gamma_hat = match raw {
        _ if flat => 0.0,
        Some(g) if g.is_finite() => g.clamp(0.0, GAMMA_MAX),
        _ => GAMMA_MAX,
    };
    let (aci_s, aci_r) = if degenerate {
        (None, None)
    } else {
        (
            Some(est.tau_star / (1.0 - gamma_hat)),
            Some(aci_refined(est.tau_star, gamma_hat, est.n_selected, delta, r, c_free)?),
        )
    };

    if !degenerate && est.tau_star > 0.0 && est.tau_star < 1.0 {
        let log_b = est.tau_star.ln().abs();
        let n = est.n_selected as f64;
        let level = log_b * (5.0 / delta).ln().max(0.0) / c_free;
        let u_plug = match (est.problem, plug_in.rq) {
            (Problem::R, Some((q, big_q))) => {
                2.0 * big_q / (1.0 - gamma_hat) + big_q * (level / n).powf((2.0 * q + 4.0) / q)
            }
            _ => 1.0 / (1.0 - gamma_hat) + level * level / n,
        };
        diagnostics.insert("u_plug_in".to_string(), u_plug);
        diagnostics.insert("aci_plug_in".to_string(), u_plug * est.tau_star);
    }

    Ok(ConfidenceReport {
        m: choice.m,
        m_clamped: choice.clamped,
        gamma_hat,
        gamma_raw: raw,
        degenerate,
        aci_simple: aci_s,
        aci_refined: aci_r,
        delta,
        u_delta: u,
        r_exponent: r,
        c_free,
        diagnostics,
    })
}
