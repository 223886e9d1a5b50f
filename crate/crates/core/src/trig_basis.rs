//! The orthonormal trigonometric system on `[0, 1]`.
//!
//! Indexing is 1-based: `phi_1 = 1`, `phi_{2l}(x) = sqrt(2) cos(2 pi l x)`,
//! `phi_{2l+1}(x) = sqrt(2) sin(2 pi l x)`. Index `j` has frequency
//! `floor(j/2)`.

use std::f64::consts::{SQRT_2, TAU};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A 1-based index into the trigonometric basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BasisIndex(usize);

impl BasisIndex {
    pub fn new(j: usize) -> Result<Self> {
        if j == 0 {
            return Err(Error::Domain("basis index must be >= 1".into()));
        }
        Ok(BasisIndex(j))
    }

    pub fn get(self) -> usize {
        self.0
    }

    pub fn frequency(self) -> usize {
        self.0 / 2
    }
}

/// `phi_j(x)` without argument checks.
#[inline]
pub fn phi(j: usize, x: f64) -> f64 {
    debug_assert!(j >= 1);
    if j == 1 {
        return 1.0;
    }
    let arg = TAU * (j / 2) as f64 * x;
    if j.is_multiple_of(2) {
        SQRT_2 * arg.cos()
    } else {
        SQRT_2 * arg.sin()
    }
}

fn check_unit(x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::Domain(format!("x = {x} lies outside [0, 1]")))
    }
}

pub fn eval_basis(j: usize, x: f64) -> Result<f64> {
    let j = BasisIndex::new(j)?;
    check_unit(x)?;
    Ok(phi(j.get(), x))
}

/// `(cos 2 pi l x, sin 2 pi l x)` for `l = 1, 2, ...` by repeated rotation.
///
/// The rotation is re-anchored on the exact value every 64 steps, which
/// keeps the accumulated error near `64 * eps`.
#[derive(Debug, Clone)]
pub(crate) struct Harmonics {
    x: f64,
    l: usize,
    step: (f64, f64),
    cur: (f64, f64),
}

impl Harmonics {
    const RESYNC: usize = 64;

    pub(crate) fn new(x: f64) -> Self {
        let (s, c) = (TAU * x).sin_cos();
        Harmonics {
            x,
            l: 0,
            step: (c, s),
            cur: (1.0, 0.0),
        }
    }
}

impl Iterator for Harmonics {
    type Item = (f64, f64);

    #[inline]
    fn next(&mut self) -> Option<(f64, f64)> {
        self.l += 1;
        if self.l.is_multiple_of(Self::RESYNC) {
            let (s, c) = (TAU * self.l as f64 * self.x).sin_cos();
            self.cur = (c, s);
        } else {
            let (c0, s0) = self.cur;
            let (cs, ss) = self.step;
            self.cur = (c0 * cs - s0 * ss, s0 * cs + c0 * ss);
        }
        Some(self.cur)
    }
}

/// `sum_{j=1}^{n} coeffs[j-1] phi_j(x)` without checks.
pub(crate) fn sum_series(coeffs: &[f64], x: f64) -> f64 {
    let Some((&c1, rest)) = coeffs.split_first() else {
        return 0.0;
    };
    let mut acc = c1;
    let mut harmonics = Harmonics::new(x);
    for pair in rest.chunks(2) {
        let (c, s) = harmonics.next().unwrap_or_default();
        acc += SQRT_2 * pair[0] * c;
        if let Some(&b) = pair.get(1) {
            acc += SQRT_2 * b * s;
        }
    }
    acc
}

/// Coefficients `c_1..c_J` of a function on the trigonometric basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FourierSeries {
    coeffs: Vec<f64>,
}

impl FourierSeries {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::Parameter("a series needs at least one coefficient".into()));
        }
        if let Some(pos) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(Error::Parameter(format!("coefficient c_{} is not finite", pos + 1)));
        }
        Ok(FourierSeries { coeffs })
    }

    /// Truncation order `J`.
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// `c_j`, zero beyond the truncation order.
    pub fn coeff(&self, j: usize) -> f64 {
        j.checked_sub(1)
            .and_then(|i| self.coeffs.get(i))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }

    /// `Phi(N, x) = sum_{j<=N} c_j phi_j(x)`.
    pub fn partial_sum(&self, n: usize, x: f64) -> Result<f64> {
        if n > self.len() {
            return Err(Error::Range {
                what: "N",
                value: n,
                limit: self.len(),
            });
        }
        check_unit(x)?;
        Ok(sum_series(&self.coeffs[..n], x))
    }

    /// The full series at `x`.
    pub fn eval(&self, x: f64) -> f64 {
        sum_series(&self.coeffs, x)
    }

    /// `rho(N) = sum_{j=N+1}^{J} c_j^2`; exactly zero at `N = J`.
    pub fn tail_rho(&self, n: usize) -> Result<f64> {
        if n > self.len() {
            return Err(Error::Range {
                what: "N",
                value: n,
                limit: self.len(),
            });
        }
        Ok(self.coeffs[n..].iter().rev().map(|c| c * c).sum())
    }

    /// `rho(0), rho(1), ..., rho(J)` in one pass.
    pub fn tail_profile(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.len() + 1];
        for j in (0..self.len()).rev() {
            out[j] = out[j + 1] + self.coeffs[j] * self.coeffs[j];
        }
        out
    }

    /// Values on the uniform grid `m/g`, `m = 0..g`.
    pub fn grid_values(&self, g: usize) -> Vec<f64> {
        crate::fft::synthesize(self, g)
    }
}

impl TryFrom<Vec<f64>> for FourierSeries {
    type Error = Error;

    fn try_from(coeffs: Vec<f64>) -> Result<Self> {
        FourierSeries::new(coeffs)
    }
}

impl From<FourierSeries> for Vec<f64> {
    fn from(s: FourierSeries) -> Vec<f64> {
        s.coeffs
    }
}

/// `D_N(x, y) = sum_{j<=N} phi_j(x) phi_j(y)`.
pub fn dirichlet_kernel(n: usize, x: f64, y: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("kernel order must be >= 1".into()));
    }
    check_unit(x)?;
    check_unit(y)?;
    let mut acc = 1.0;
    let mut hx = Harmonics::new(x);
    let mut hy = Harmonics::new(y);
    let mut j = 2;
    while j <= n {
        let (cx, sx) = hx.next().unwrap_or_default();
        let (cy, sy) = hy.next().unwrap_or_default();
        acc += 2.0 * cx * cy;
        if j < n {
            acc += 2.0 * sx * sy;
        }
        j += 2;
    }
    Ok(acc)
}

/// Trapezoid weights on the nodes `m/q`, `m = 0..=q`.
///
/// For 1-periodic integrands this is the rectangle rule and is exact for
/// trigonometric polynomials of degree below `q`.
pub fn trapezoid_nodes(q: usize) -> impl Iterator<Item = (f64, f64)> {
    let h = 1.0 / q as f64;
    (0..=q).map(move |m| {
        let w = if m == 0 || m == q { 0.5 * h } else { h };
        (m as f64 * h, w)
    })
}

/// `int_0^1 f(x) dx` by the composite trapezoid rule on `q` panels.
pub fn quadrature<F: Fn(f64) -> f64>(f: F, q: usize) -> f64 {
    trapezoid_nodes(q).map(|(x, w)| w * f(x)).sum()
}

/// `c_j = int_0^1 phi_j f` for `j = 1..=J` on a `q`-panel uniform grid.
pub fn fourier_coefficients<F: Fn(f64) -> f64>(f: F, j: usize, q: usize) -> Result<FourierSeries> {
    if j == 0 {
        return Err(Error::Parameter("truncation order must be >= 1".into()));
    }
    if q < 4 * j {
        return Err(Error::Precision { nodes: q, floor: 4 * j });
    }
    let mut coeffs = vec![0.0; j];
    for (x, w) in trapezoid_nodes(q) {
        let wf = w * f(x);
        coeffs[0] += wf;
        let mut harmonics = Harmonics::new(x);
        let mut idx = 1;
        while idx < j {
            let (c, s) = harmonics.next().unwrap_or_default();
            coeffs[idx] += SQRT_2 * c * wf;
            if idx + 1 < j {
                coeffs[idx + 1] += SQRT_2 * s * wf;
            }
            idx += 2;
        }
    }
    FourierSeries::new(coeffs)
}
