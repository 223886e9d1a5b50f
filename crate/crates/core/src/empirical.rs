//! Empirical Fourier coefficients `c_hat_1..c_hat_K`.
//!
//! * R: `c_hat_j = n^{-1} sum_i y_i phi_j(i/n)`, computed with one FFT.
//! * D: `c_hat_j = n^{-1} sum_i phi_j(xi_i)`.
//! * S: lag-`l` covariance estimates in the cosine slots,
//!   `c_hat_1 = n^{-1} sum xi_i^2`,
//!   `c_hat_{2l} = sqrt(2) (n-l)^{-1} sum_{i<=n-l} xi_i xi_{i+l}`,
//!   and exact zeros in the sine slots.

use std::f64::consts::{SQRT_2, TAU};

use serde::{Deserialize, Serialize};

use crate::samplers::Dataset;
use crate::{fft, max_harmonics, Error, Problem, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalCoeffs {
    pub problem: Problem,
    pub n: usize,
    /// `coeffs[j-1] = c_hat_j`.
    pub coeffs: Vec<f64>,
}

impl EmpiricalCoeffs {
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `c_hat_j` (1-based).
    pub fn get(&self, j: usize) -> Option<f64> {
        j.checked_sub(1).and_then(|i| self.coeffs.get(i)).copied()
    }
}

/// Number of coefficients the selector needs: `2 floor(n/3)`.
pub fn default_k(n: usize) -> usize {
    2 * max_harmonics(n)
}

/// Divisor used by the lag-product covariance estimate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LagDivisor {
    /// `n - l`: unbiased for each lag.
    #[default]
    Unbiased,
    /// `n` for every lag.
    Biased,
}

fn expect(d: &Dataset, problem: Problem) -> Result<()> {
    if d.problem != problem {
        return Err(Error::ProblemMismatch {
            expected: problem,
            found: d.problem,
        });
    }
    Ok(())
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::Parameter("at least one coefficient is required".into()));
    }
    let limit = default_k(n);
    if k > limit {
        return Err(Error::Range {
            what: "K",
            value: k,
            limit,
        });
    }
    Ok(())
}

pub fn empirical_coeffs_regression(d: &Dataset, k: usize) -> Result<EmpiricalCoeffs> {
    expect(d, Problem::R)?;
    check_k(k, d.n)?;
    Ok(EmpiricalCoeffs {
        problem: Problem::R,
        n: d.n,
        coeffs: fft::grid_coefficients(&d.values, k),
    })
}

pub fn empirical_coeffs_density(d: &Dataset, k: usize) -> Result<EmpiricalCoeffs> {
    expect(d, Problem::D)?;
    if k == 0 {
        return Err(Error::Parameter("at least one coefficient is required".into()));
    }
    if let Some(i) = d.values.iter().position(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::Domain(format!(
            "observation {} = {} lies outside [0, 1]",
            i + 1,
            d.values[i]
        )));
    }
    Ok(EmpiricalCoeffs {
        problem: Problem::D,
        n: d.n,
        coeffs: density_coefficients(&d.values, k),
    })
}

pub fn empirical_coeffs_spectral(d: &Dataset, k: usize, divisor: LagDivisor) -> Result<EmpiricalCoeffs> {
    expect(d, Problem::S)?;
    check_k(k, d.n)?;
    let n = d.n;
    let sums = fft::lag_sums(&d.values, k / 2);
    let coeffs = (1..=k)
        .map(|j| {
            if j == 1 {
                sums[0] / n as f64
            } else if j % 2 == 0 {
                let l = j / 2;
                let div = match divisor {
                    LagDivisor::Unbiased => (n - l) as f64,
                    LagDivisor::Biased => n as f64,
                };
                SQRT_2 * sums[l] / div
            } else {
                0.0
            }
        })
        .collect();
    Ok(EmpiricalCoeffs {
        problem: Problem::S,
        n,
        coeffs,
    })
}

/// Coefficients for whichever problem `d` belongs to.
pub fn empirical_coeffs(d: &Dataset, k: usize) -> Result<EmpiricalCoeffs> {
    match d.problem {
        Problem::R => empirical_coeffs_regression(d, k),
        Problem::D => empirical_coeffs_density(d, k),
        Problem::S => empirical_coeffs_spectral(d, k, LagDivisor::default()),
    }
}

const LANES: usize = 8;
const RESYNC: usize = 128;

/// `n^{-1} sum_i phi_j(x_i)` for `j = 1..=k`.
///
/// All observations advance one harmonic per pass by complex rotation,
/// re-anchored on exact `sin_cos` values every `RESYNC` harmonics. The
/// inner loops run over observations in fixed lanes, so the summation
/// order is deterministic.
fn density_coefficients(xs: &[f64], k: usize) -> Vec<f64> {
    let n = xs.len();
    let mut out = vec![0.0; k];
    out[0] = 1.0;
    let l_max = k / 2;
    if l_max == 0 {
        return out;
    }
    let mut step_c = vec![0.0; n];
    let mut step_s = vec![0.0; n];
    for (i, &x) in xs.iter().enumerate() {
        let (s, c) = (TAU * x).sin_cos();
        step_c[i] = c;
        step_s[i] = s;
    }
    let mut cur_c = step_c.clone();
    let mut cur_s = step_s.clone();
    let scale = SQRT_2 / n as f64;
    for l in 1..=l_max {
        if l > 1 {
            if l % RESYNC == 0 {
                for (i, &x) in xs.iter().enumerate() {
                    let (s, c) = (TAU * l as f64 * x).sin_cos();
                    cur_c[i] = c;
                    cur_s[i] = s;
                }
            } else {
                rotate(&mut cur_c, &mut cur_s, &step_c, &step_s);
            }
        }
        out[2 * l - 1] = scale * lane_sum(&cur_c);
        if 2 * l < k {
            out[2 * l] = scale * lane_sum(&cur_s);
        }
    }
    out
}

#[inline]
fn rotate(cur_c: &mut [f64], cur_s: &mut [f64], step_c: &[f64], step_s: &[f64]) {
    for (((c, s), &sc), &ss) in cur_c.iter_mut().zip(cur_s.iter_mut()).zip(step_c).zip(step_s) {
        let c0 = *c;
        let s0 = *s;
        *c = c0 * sc - s0 * ss;
        *s = s0 * sc + c0 * ss;
    }
}

#[inline]
fn lane_sum(v: &[f64]) -> f64 {
    let mut acc = [0.0; LANES];
    let chunks = v.chunks_exact(LANES);
    let tail = chunks.remainder();
    for chunk in chunks {
        for (a, x) in acc.iter_mut().zip(chunk) {
            *a += x;
        }
    }
    acc.iter().sum::<f64>() + tail.iter().sum::<f64>()
}
