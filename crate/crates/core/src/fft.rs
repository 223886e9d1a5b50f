//! FFT-backed transforms shared by the basis, sampler and coefficient code.

use std::f64::consts::SQRT_2;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::trig_basis::FourierSeries;

/// Values of the full series at the nodes `m/g`, `m = 0..g`.
///
/// Harmonics at or above `g` are folded onto their alias, so the result is
/// exact (up to rounding) for any truncation order.
pub(crate) fn synthesize(series: &FourierSeries, g: usize) -> Vec<f64> {
    let mut buf = vec![Complex64::new(0.0, 0.0); g];
    for (idx, &c) in series.coeffs().iter().enumerate() {
        let j = idx + 1;
        if j == 1 {
            buf[0].re += c;
            continue;
        }
        let slot = (j / 2) % g;
        if j % 2 == 0 {
            buf[slot].re += SQRT_2 * c;
        } else {
            buf[slot].im -= SQRT_2 * c;
        }
    }
    FftPlanner::new().plan_fft_inverse(g).process(&mut buf);
    buf.into_iter().map(|z| z.re).collect()
}

/// `n^{-1} sum_{i=1}^{n} v_i phi_j(i/n)` for `j = 1..=k`, where `values[i-1] = v_i`.
pub(crate) fn grid_coefficients(values: &[f64], k: usize) -> Vec<f64> {
    let n = values.len();
    let mut buf: Vec<Complex64> = Vec::with_capacity(n);
    // x_n = 1 coincides with x_0 = 0 on the circle.
    buf.push(Complex64::new(values[n - 1], 0.0));
    buf.extend(values[..n - 1].iter().map(|&v| Complex64::new(v, 0.0)));
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    (1..=k)
        .map(|j| {
            if j == 1 {
                return buf[0].re * scale;
            }
            let y = buf[(j / 2) % n];
            if j % 2 == 0 {
                SQRT_2 * y.re * scale
            } else {
                -SQRT_2 * y.im * scale
            }
        })
        .collect()
}

/// Lag sums `sum_{i=1}^{n-l} x_i x_{i+l}` for `l = 0..=max_lag`.
pub(crate) fn lag_sums(xs: &[f64], max_lag: usize) -> Vec<f64> {
    let n = xs.len();
    let size = (2 * n).next_power_of_two();
    let mut buf = vec![Complex64::new(0.0, 0.0); size];
    for (b, &x) in buf.iter_mut().zip(xs) {
        b.re = x;
    }
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(size).process(&mut buf);
    for z in buf.iter_mut() {
        *z = Complex64::new(z.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(size).process(&mut buf);
    let scale = 1.0 / size as f64;
    (0..=max_lag.min(n.saturating_sub(1)))
        .map(|l| buf[l].re * scale)
        .collect()
}

/// Eigenvalues of the symmetric circulant matrix with first row `row`.
pub(crate) fn circulant_eigenvalues(row: &[f64]) -> Vec<f64> {
    let mut buf: Vec<Complex64> = row.iter().map(|&r| Complex64::new(r, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    buf.into_iter().map(|z| z.re).collect()
}

/// Real part of the forward DFT of `buf`, in place.
pub(crate) fn forward_real_part(buf: &mut [Complex64]) -> Vec<f64> {
    FftPlanner::new().plan_fft_forward(buf.len()).process(buf);
    buf.iter().map(|z| z.re).collect()
}
