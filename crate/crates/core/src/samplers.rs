//! Random data for the three problems.
//!
//! Every generator is a pure function of its inputs and a [`SeedStream`].
//! Streams are ChaCha20 streams: the seed picks the key and the stream id
//! picks an independent keystream, so replication `r` of an experiment can
//! run on any thread and still draw the same numbers.

use std::f64::consts::SQRT_2;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Exp1, StandardNormal, StudentT};
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::targets::{certification_grid, TargetSpec};
use crate::trig_basis::sum_series;
use crate::{fft, Error, Problem, Result};

/// A seed plus a stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct SeedStream {
    pub seed: u64,
    pub stream: u64,
}

impl SeedStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        SeedStream { seed, stream }
    }

    pub fn rng(self) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

impl From<u64> for SeedStream {
    fn from(seed: u64) -> Self {
        SeedStream { seed, stream: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum NoiseFamily {
    Gaussian,
    /// Student t with `df > 2` degrees of freedom, rescaled to variance `sigma^2`.
    StudentT {
        df: f64,
    },
    /// `s Q E^{1/q}` with a random sign `s` and `E ~ Exp(1)`, so that
    /// `P(|xi| > x) = exp(-(x/Q)^q)`. `Q` is fixed by `sigma`.
    SymmetricWeibull {
        q: f64,
    },
}

/// Centered measurement noise with variance `sigma^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    #[serde(flatten)]
    pub family: NoiseFamily,
    pub sigma: f64,
}

impl NoiseSpec {
    pub fn gaussian(sigma: f64) -> Self {
        NoiseSpec {
            family: NoiseFamily::Gaussian,
            sigma,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::Parameter(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        match self.family {
            NoiseFamily::Gaussian => Ok(()),
            NoiseFamily::StudentT { df } if df > 2.0 && df.is_finite() => Ok(()),
            NoiseFamily::StudentT { df } => Err(Error::Parameter(format!(
                "student t noise needs df > 2 for a finite variance, got {df}"
            ))),
            NoiseFamily::SymmetricWeibull { q } if q > 0.0 && q.is_finite() => Ok(()),
            NoiseFamily::SymmetricWeibull { q } => {
                Err(Error::Parameter(format!("weibull shape must be positive, got {q}")))
            }
        }
    }

    /// Variance `Delta_1 = sigma^2`.
    pub fn variance(&self) -> f64 {
        self.sigma * self.sigma
    }

    /// `(q, Q)` such that `P(|xi| > x) <= exp(-(x/Q)^q)`, when such a pair exists.
    pub fn rq_params(&self) -> Option<(f64, f64)> {
        match self.family {
            // 2 (1 - Phi(x)) <= exp(-x^2 / 2) for all x >= 0
            NoiseFamily::Gaussian => Some((2.0, self.sigma * SQRT_2)),
            NoiseFamily::SymmetricWeibull { q } => Some((q, self.sigma / gamma(1.0 + 2.0 / q).sqrt())),
            NoiseFamily::StudentT { .. } => None,
        }
    }

    /// `mu_{2k} = E xi^{2k}`, or `None` when it is infinite.
    pub fn even_moment(&self, k: u32) -> Option<f64> {
        let var = self.variance();
        let kf = k as f64;
        match self.family {
            NoiseFamily::Gaussian => {
                let double_factorial: f64 = (1..=k).map(|i| (2 * i - 1) as f64).product();
                Some(var.powi(k as i32) * double_factorial)
            }
            NoiseFamily::StudentT { df } => {
                if 2.0 * kf >= df {
                    return None;
                }
                let raw = df.powf(kf) * gamma(kf + 0.5) * gamma(df / 2.0 - kf)
                    / (std::f64::consts::PI.sqrt() * gamma(df / 2.0));
                Some(raw * (var * (df - 2.0) / df).powf(kf))
            }
            NoiseFamily::SymmetricWeibull { q } => {
                let (_, big_q) = self.rq_params()?;
                Some(big_q.powf(2.0 * kf) * gamma(1.0 + 2.0 * kf / q))
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.family {
            NoiseFamily::Gaussian => {
                let z: f64 = StandardNormal.sample(rng);
                self.sigma * z
            }
            NoiseFamily::StudentT { df } => {
                let t = StudentT::new(df).expect("validated df").sample(rng);
                self.sigma * t / (df / (df - 2.0)).sqrt()
            }
            NoiseFamily::SymmetricWeibull { q } => {
                let big_q = self.sigma / gamma(1.0 + 2.0 / q).sqrt();
                let e: f64 = Exp1.sample(rng);
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                sign * big_q * e.powf(1.0 / q)
            }
        }
    }
}

/// Observations for one of the three problems.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub problem: Problem,
    pub n: usize,
    /// Design points `i/n`; empty unless `problem` is `R`.
    pub xs: Vec<f64>,
    pub values: Vec<f64>,
    pub seed: u64,
    pub stream: u64,
    pub noise: Option<NoiseSpec>,
    pub truth: Option<Arc<TargetSpec>>,
}

impl Dataset {
    fn new(problem: Problem, values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        if n == 0 {
            return Err(Error::Parameter("empty dataset".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("observation {} is not finite", i + 1)));
        }
        let xs = match problem {
            Problem::R => design_points(n),
            _ => Vec::new(),
        };
        Ok(Dataset {
            problem,
            n,
            xs,
            values,
            seed: 0,
            stream: 0,
            noise: None,
            truth: None,
        })
    }

    /// Responses `y_i` observed at `x_i = i/n`.
    pub fn regression(ys: Vec<f64>) -> Result<Self> {
        Dataset::new(Problem::R, ys)
    }

    /// An i.i.d. sample on `[0, 1]`.
    pub fn density(sample: Vec<f64>) -> Result<Self> {
        if let Some(i) = sample.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Domain(format!(
                "observation {} = {} lies outside [0, 1]",
                i + 1,
                sample[i]
            )));
        }
        Dataset::new(Problem::D, sample)
    }

    /// A path of a stationary sequence.
    pub fn spectral(path: Vec<f64>) -> Result<Self> {
        Dataset::new(Problem::S, path)
    }

    pub fn with_seed(mut self, seed: SeedStream) -> Self {
        self.seed = seed.seed;
        self.stream = seed.stream;
        self
    }
}

/// `x_i = i/n` for `i = 1..=n`.
pub fn design_points(n: usize) -> Vec<f64> {
    (1..=n).map(|i| i as f64 / n as f64).collect()
}

fn check_n(n: usize) -> Result<()> {
    if n < 9 {
        return Err(Error::Parameter(format!("sample size n = {n} is below 9")));
    }
    Ok(())
}

/// `f(i/n)` for `i = 1..=n`, exact for any truncation order.
pub fn design_values(t: &TargetSpec, n: usize) -> Vec<f64> {
    let grid = t.series.grid_values(n);
    // grid[m] = f(m/n); x_n = 1 is the node m = 0
    let mut out = grid[1..].to_vec();
    out.push(grid[0]);
    out
}

/// Reusable generator for problem R at a fixed `n`.
#[derive(Debug, Clone)]
pub struct RegressionSampler {
    truth: Arc<TargetSpec>,
    f_values: Vec<f64>,
    noise: NoiseSpec,
}

impl RegressionSampler {
    pub fn new(t: Arc<TargetSpec>, n: usize, noise: NoiseSpec) -> Result<Self> {
        check_n(n)?;
        noise.validate()?;
        let f_values = design_values(&t, n);
        Ok(RegressionSampler {
            truth: t,
            f_values,
            noise,
        })
    }

    pub fn sample(&self, seed: SeedStream) -> Dataset {
        let mut rng = seed.rng();
        let values = self
            .f_values
            .iter()
            .map(|f| f + self.noise.sample(&mut rng))
            .collect::<Vec<_>>();
        let n = values.len();
        Dataset {
            problem: Problem::R,
            n,
            xs: design_points(n),
            values,
            seed: seed.seed,
            stream: seed.stream,
            noise: Some(self.noise),
            truth: Some(self.truth.clone()),
        }
    }
}

pub fn gen_regression(t: &TargetSpec, n: usize, noise: NoiseSpec, seed: SeedStream) -> Result<Dataset> {
    Ok(RegressionSampler::new(Arc::new(t.clone()), n, noise)?.sample(seed))
}

/// Exact rejection sampler for a bounded trigonometric-polynomial density.
///
/// The density is tabulated on a fine grid with a Lipschitz bound `L`.
/// Within a cell every value lies between the two cone bounds built from the
/// neighbouring nodes, which gives both a rigorous constant envelope and a
/// squeeze test; the full series is only evaluated in the thin band where
/// the squeeze is inconclusive.
#[derive(Debug, Clone)]
pub struct DensitySampler {
    truth: Arc<TargetSpec>,
    grid: Vec<f64>,
    lipschitz: f64,
    envelope: f64,
}

impl DensitySampler {
    pub fn new(t: Arc<TargetSpec>) -> Result<Self> {
        if !t.is_density() {
            return Err(Error::Infeasible(
                "target is not a density (needs c_1 = 1 and f >= 0)".into(),
            ));
        }
        let g = (64 * t.len())
            .next_power_of_two()
            .clamp(certification_grid(t.len()), 1 << 22);
        let grid = t.series.grid_values(g);
        let coeffs = t.series.coeffs();
        let lipschitz: f64 = coeffs[1..]
            .chunks(2)
            .enumerate()
            .map(|(i, pair)| {
                let l = (i + 1) as f64;
                let amp = pair.iter().map(|c| c * c).sum::<f64>().sqrt();
                std::f64::consts::TAU * SQRT_2 * l * amp
            })
            .sum();
        let h = 1.0 / g as f64;
        let envelope = (0..g)
            .map(|m| 0.5 * (grid[m] + grid[(m + 1) % g]) + 0.5 * lipschitz * h)
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(DensitySampler {
            truth: t,
            grid,
            lipschitz,
            envelope,
        })
    }

    /// The constant envelope; at least `sup f`.
    pub fn envelope(&self) -> f64 {
        self.envelope
    }

    fn accept(&self, x: f64, u: f64) -> bool {
        let g = self.grid.len();
        let pos = x * g as f64;
        let m = (pos as usize).min(g - 1);
        let h = 1.0 / g as f64;
        let d = x - m as f64 * h;
        let left = self.grid[m];
        let right = self.grid[(m + 1) % g];
        let lo = (left - self.lipschitz * d).max(right - self.lipschitz * (h - d));
        let hi = (left + self.lipschitz * d).min(right + self.lipschitz * (h - d));
        if u <= lo {
            true
        } else if u > hi {
            false
        } else {
            u <= sum_series(self.truth.series.coeffs(), x)
        }
    }

    pub fn draw(&self, n: usize, seed: SeedStream) -> Vec<f64> {
        let mut rng = seed.rng();
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let x: f64 = rng.random();
            let u = rng.random::<f64>() * self.envelope;
            if self.accept(x, u) {
                out.push(x);
            }
        }
        out
    }

    pub fn sample(&self, n: usize, seed: SeedStream) -> Result<Dataset> {
        check_n(n)?;
        let values = self.draw(n, seed);
        Ok(Dataset {
            problem: Problem::D,
            n,
            xs: Vec::new(),
            values,
            seed: seed.seed,
            stream: seed.stream,
            noise: None,
            truth: Some(self.truth.clone()),
        })
    }
}

pub fn gen_density_sample(t: &TargetSpec, n: usize, seed: SeedStream) -> Result<Dataset> {
    DensitySampler::new(Arc::new(t.clone()))?.sample(n, seed)
}

/// Autocovariances implied by an even spectral density:
/// `R(0) = c_1`, `R(l) = c_{2l} / sqrt(2)`.
pub fn autocovariances(t: &TargetSpec) -> Vec<f64> {
    let j = t.len();
    (0..=j / 2)
        .map(|l| {
            if l == 0 {
                t.series.coeff(1)
            } else {
                t.series.coeff(2 * l) / SQRT_2
            }
        })
        .collect()
}

/// Circulant-embedding generator for a Gaussian stationary sequence.
#[derive(Debug, Clone)]
pub struct StationarySampler {
    truth: Arc<TargetSpec>,
    n: usize,
    /// `sqrt(lambda_k / m)` for the embedding eigenvalues.
    amplitudes: Vec<f64>,
}

impl StationarySampler {
    const MAX_EMBEDDING: usize = 1 << 24;

    pub fn new(t: Arc<TargetSpec>, n: usize) -> Result<Self> {
        check_n(n)?;
        if !t.is_even() {
            return Err(Error::Infeasible(
                "spectral targets must be even (zero sine coefficients)".into(),
            ));
        }
        let min = t.grid_min();
        if min < -1e-10 {
            return Err(Error::Infeasible(format!("spectral density reaches {min:e} < 0")));
        }
        let cov = autocovariances(&t);
        let mut m = (2 * n.max(cov.len())).next_power_of_two();
        loop {
            let row: Vec<f64> = (0..m).map(|k| cov.get(k.min(m - k)).copied().unwrap_or(0.0)).collect();
            let eig = fft::circulant_eigenvalues(&row);
            let max = eig.iter().copied().fold(0.0, f64::max);
            let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
            if min >= -1e-10 * max.max(1.0) {
                let amplitudes = eig.iter().map(|&l| (l.max(0.0) / m as f64).sqrt()).collect();
                return Ok(StationarySampler {
                    truth: t,
                    n,
                    amplitudes,
                });
            }
            if 2 * m > Self::MAX_EMBEDDING {
                return Err(Error::Embedding {
                    min_eigenvalue: min,
                    size: m,
                });
            }
            m *= 2;
        }
    }

    pub fn embedding_size(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn sample(&self, seed: SeedStream) -> Dataset {
        let mut rng = seed.rng();
        let mut buf: Vec<Complex64> = self
            .amplitudes
            .iter()
            .map(|&a| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                Complex64::new(a * re, a * im)
            })
            .collect();
        let mut path = fft::forward_real_part(&mut buf);
        path.truncate(self.n);
        Dataset {
            problem: Problem::S,
            n: self.n,
            xs: Vec::new(),
            values: path,
            seed: seed.seed,
            stream: seed.stream,
            noise: None,
            truth: Some(self.truth.clone()),
        }
    }
}

pub fn gen_stationary_gaussian(t: &TargetSpec, n: usize, seed: SeedStream) -> Result<Dataset> {
    Ok(StationarySampler::new(Arc::new(t.clone()), n)?.sample(seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::targets::{make_w_target, Constraint};
    use crate::trig_basis::{phi, FourierSeries};
    use approx::assert_abs_diff_eq;

    fn uniform() -> TargetSpec {
        TargetSpec::custom(FourierSeries::new(vec![1.0; 1]).unwrap(), Constraint::Nonnegative).unwrap()
    }

    #[test]
    fn noiseless_regression_reproduces_target() {
        let t = make_w_target(1.0, 0.0, 1.0, 64, Constraint::None).unwrap();
        let d = gen_regression(&t, 100, NoiseSpec::gaussian(0.0), 3.into()).unwrap();
        for (x, y) in d.xs.iter().zip(&d.values) {
            assert_abs_diff_eq!(*y, t.eval(*x), epsilon = 1e-12);
        }
        assert_eq!(d.xs[99], 1.0);
    }

    #[test]
    fn regression_residuals_are_centered() {
        let t = make_w_target(1.0, 0.0, 1.0, 64, Constraint::None).unwrap();
        let n = 4096;
        let d = gen_regression(&t, n, NoiseSpec::gaussian(1.0), 11.into()).unwrap();
        let f = design_values(&t, n);
        let mean = d.values.iter().zip(&f).map(|(y, f)| y - f).sum::<f64>() / n as f64;
        assert!(mean.abs() < 3.0 / (n as f64).sqrt());
    }

    #[test]
    fn generators_are_deterministic() {
        let t = make_w_target(1.0, 0.0, 1.0, 64, Constraint::None).unwrap();
        let seed = SeedStream::new(5, 2);
        let a = gen_regression(&t, 50, NoiseSpec::gaussian(1.0), seed).unwrap();
        let b = gen_regression(&t, 50, NoiseSpec::gaussian(1.0), seed).unwrap();
        assert_eq!(a, b);
        let c = gen_regression(&t, 50, NoiseSpec::gaussian(1.0), SeedStream::new(5, 3)).unwrap();
        assert_ne!(a.values, c.values);
        let spec = make_w_target(1.0, 0.0, 1.0, 64, Constraint::EvenNonnegative).unwrap();
        let s1 = gen_stationary_gaussian(&spec, 256, seed).unwrap();
        let s2 = gen_stationary_gaussian(&spec, 256, seed).unwrap();
        assert_eq!(s1, s2);
        let dens = make_w_target(1.0, 0.0, 1.0, 64, Constraint::Nonnegative).unwrap();
        let d1 = gen_density_sample(&dens, 256, seed).unwrap();
        let d2 = gen_density_sample(&dens, 256, seed).unwrap();
        assert_eq!(d1, d2);
    }

    #[test]
    fn small_n_rejected() {
        let t = uniform();
        assert!(matches!(gen_density_sample(&t, 8, 0.into()), Err(Error::Parameter(_))));
    }

    #[test]
    fn uniform_density_passes_ks() {
        let n = 4096;
        let d = gen_density_sample(&uniform(), n, 17.into()).unwrap();
        let mut xs = d.values.clone();
        xs.sort_by(f64::total_cmp);
        let ks = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let lo = i as f64 / n as f64;
                let hi = (i + 1) as f64 / n as f64;
                (x - lo).abs().max((hi - x).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 1.63 / (n as f64).sqrt(), "KS = {ks}");
        let n = 16384;
        let d = gen_density_sample(&uniform(), n, 18.into()).unwrap();
        let m = d.values.iter().map(|&x| phi(2, x)).sum::<f64>() / n as f64;
        assert!(m.abs() < 3.0 / (n as f64).sqrt());
    }

    #[test]
    fn density_sampler_matches_target_cdf() {
        let t = make_w_target(1.0, 0.0, 1.0, 256, Constraint::Nonnegative).unwrap();
        let sampler = DensitySampler::new(Arc::new(t.clone())).unwrap();
        let sup = t.series.grid_values(1 << 16).into_iter().fold(0.0, f64::max);
        assert!(sampler.envelope() >= sup);
        let n = 20000;
        let xs = sampler.draw(n, 23.into());
        // compare bin frequencies with the integral of f over each bin
        let bins = 20;
        let mut counts = vec![0usize; bins];
        for x in &xs {
            counts[((x * bins as f64) as usize).min(bins - 1)] += 1;
        }
        for (b, &count) in counts.iter().enumerate() {
            let lo = b as f64 / bins as f64;
            let p = crate::trig_basis::quadrature(|u| t.eval(lo + u / bins as f64), 256) / bins as f64;
            let se = (p * (1.0 - p) / n as f64).sqrt();
            let freq = count as f64 / n as f64;
            assert!((freq - p).abs() < 4.5 * se, "bin {b}: {freq} vs {p}");
        }
    }

    #[test]
    fn invalid_density_rejected() {
        let t = make_w_target(1.0, 0.0, 1.0, 64, Constraint::None).unwrap();
        assert!(matches!(
            gen_density_sample(&t, 100, 0.into()),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn white_noise_covariances() {
        let t = TargetSpec::custom(FourierSeries::new(vec![1.0, 0.0]).unwrap(), Constraint::EvenNonnegative).unwrap();
        assert_eq!(autocovariances(&t), vec![1.0, 0.0]);
        let d = gen_stationary_gaussian(&t, 4096, 9.into()).unwrap();
        let var = d.values.iter().map(|x| x * x).sum::<f64>() / 4096.0;
        assert!((var - 1.0).abs() < 4.0 * (2.0f64 / 4096.0).sqrt());
    }

    #[test]
    fn odd_spectral_target_rejected() {
        let t = TargetSpec::custom(FourierSeries::new(vec![1.0, 0.0, 0.3]).unwrap(), Constraint::None).unwrap();
        assert!(matches!(
            gen_stationary_gaussian(&t, 64, 0.into()),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn noise_moments() {
        let g = NoiseSpec::gaussian(1.0);
        assert_eq!(g.even_moment(2), Some(3.0));
        assert_eq!(g.even_moment(3), Some(15.0));
        assert_eq!(g.even_moment(4), Some(105.0));
        let t = NoiseSpec {
            family: NoiseFamily::StudentT { df: 5.0 },
            sigma: 1.0,
        };
        // kurtosis of t_5 is 9, variance normalised to 1
        assert_abs_diff_eq!(t.even_moment(2).unwrap(), 9.0, epsilon = 1e-9);
        assert_eq!(t.even_moment(3), None);
        let w = NoiseSpec {
            family: NoiseFamily::SymmetricWeibull { q: 2.0 },
            sigma: 1.0,
        };
        assert_abs_diff_eq!(w.even_moment(1).unwrap(), 1.0, epsilon = 1e-12);
        assert!(NoiseSpec {
            family: NoiseFamily::StudentT { df: 2.0 },
            sigma: 1.0
        }
        .validate()
        .is_err());
        assert!(NoiseSpec::gaussian(-1.0).validate().is_err());
    }
}
