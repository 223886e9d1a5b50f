//! Monte Carlo experiments: risk, oracle ratios and ACI coverage over an
//! `n` grid.
//!
//! Replication `rep` at grid index `i` draws from the stream
//! `rep + (i << 32)` of `base_seed`, so results do not depend on how
//! replications are scheduled.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::confidence::{confidence_report, default_r, PlugIn};
use crate::estimator::{adaptive_estimate, l2_error};
use crate::io::fmt_f64;
use crate::samplers::{Dataset, DensitySampler, NoiseSpec, RegressionSampler, SeedStream, StationarySampler};
use crate::selector::{delta_for, oracle_curves};
use crate::targets::{make_w_target, make_z_target, Constraint, TargetSpec};
use crate::trig_basis::FourierSeries;
use crate::{max_harmonics, Error, Problem, Result};

/// Relative round-off allowance when comparing a bound with the loss, so
/// that noiseless data, where both sit at the floating-point floor, count
/// as covered.
const ROUNDING_SLACK: f64 = 1e-24;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "ADAPTIX_THREADS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class")]
pub enum TargetKind {
    W {
        #[serde(rename = "C", default = "one")]
        c: f64,
        #[serde(default)]
        alpha: f64,
        beta: f64,
    },
    Z {
        alpha: f64,
        beta: f64,
    },
    #[serde(rename = "custom")]
    Custom {
        coeffs: Vec<f64>,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetConfig {
    #[serde(flatten)]
    pub kind: TargetKind,
    /// Defaults to `nonnegative` for D, `even_nonnegative` for S.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraint: Option<Constraint>,
    /// Number of coefficients; defaults to `max(256, 4 floor(n_max/3))`.
    #[serde(rename = "J", default, skip_serializing_if = "Option::is_none")]
    pub j: Option<usize>,
}

impl TargetConfig {
    pub fn build(&self, problem: Problem, n_max: usize) -> Result<TargetSpec> {
        let constraint = self.constraint.unwrap_or(match problem {
            Problem::R => Constraint::None,
            Problem::D => Constraint::Nonnegative,
            Problem::S => Constraint::EvenNonnegative,
        });
        let needed = 2 * max_harmonics(n_max);
        let j = self.j.unwrap_or_else(|| 256.max(4 * max_harmonics(n_max)));
        if j < needed {
            return Err(Error::Config(format!(
                "J = {j} is below 2 floor(n/3) = {needed} for the largest n"
            )));
        }
        match &self.kind {
            TargetKind::W { c, alpha, beta } => make_w_target(*c, *alpha, *beta, j, constraint),
            TargetKind::Z { alpha, beta } => make_z_target(*alpha, *beta, j, constraint),
            TargetKind::Custom { coeffs } => {
                let mut c = coeffs.clone();
                if c.len() < needed {
                    c.resize(needed, 0.0);
                }
                TargetSpec::custom(FourierSeries::new(c)?, constraint)
            }
        }
    }
}

/// Where to write the report JSON and the per-replication CSV.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: Problem,
    pub target: TargetConfig,
    pub n_grid: Vec<usize>,
    pub reps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSpec>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    pub base_seed: u64,
    /// Harmonic counts at which `tau(n, N)` is also recorded.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tau_probes: Vec<usize>,
    #[serde(default = "one")]
    pub c_free: f64,
    /// ACI exponent; defaults per problem.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default)]
    pub outputs: Outputs,
}

fn default_delta() -> f64 {
    0.05
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        ExperimentConfig::from_json(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::Config("reps must be at least 1".into()));
        }
        if self.n_grid.is_empty() {
            return Err(Error::Config("n_grid is empty".into()));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("n_grid must be strictly increasing".into()));
        }
        if self.n_grid[0] < 9 {
            return Err(Error::Config(format!("n = {} is below 9", self.n_grid[0])));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Config(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        match (self.problem, &self.noise) {
            (Problem::R, None) => return Err(Error::Config("missing field `noise` for problem R".into())),
            (Problem::R, Some(noise)) => noise.validate()?,
            (_, Some(_)) => return Err(Error::Config("`noise` applies to problem R only".into())),
            _ => {}
        }
        let smallest = max_harmonics(self.n_grid[0]);
        if let Some(&p) = self.tau_probes.iter().find(|&&p| p == 0 || p > smallest) {
            return Err(Error::Config(format!(
                "tau probe N = {p} is outside 1..={smallest} for the smallest n"
            )));
        }
        if let Some(r) = self.r {
            if !(r > 0.0) {
                return Err(Error::Config(format!("r must be positive, got {r}")));
            }
        }
        Ok(())
    }

    fn n_max(&self) -> usize {
        *self.n_grid.last().expect("validated nonempty")
    }

    fn r_exponent(&self) -> f64 {
        self.r.unwrap_or_else(|| default_r(self.problem, self.noise.as_ref()))
    }
}

/// One replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepRecord {
    pub n: usize,
    pub rep: usize,
    /// `||f_hat - f||^2`.
    pub risk: f64,
    pub tau_star: f64,
    pub n_sel: usize,
    pub n0: usize,
    /// `tau_star / B(n)`.
    pub ratio: Option<f64>,
    /// `||f_hat - f||^2 / B(n)`.
    pub loss_ratio: Option<f64>,
    pub covered_simple: bool,
    pub covered_refined: bool,
    pub covered_plug_in: Option<bool>,
    pub degenerate: bool,
    pub gamma_hat: f64,
    pub tau_probes: Vec<f64>,
}

impl RepRecord {
    /// `N(n) / N^0(n)`.
    pub fn n_ratio(&self) -> f64 {
        self.n_sel as f64 / self.n0 as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeStats {
    #[serde(rename = "N")]
    pub n_harm: usize,
    pub mean: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NRecord {
    pub n: usize,
    pub reps: usize,
    #[serde(rename = "N0")]
    pub n0: usize,
    #[serde(rename = "A_n")]
    pub a_n: f64,
    #[serde(rename = "B_n")]
    pub b_n: f64,
    pub mean_risk: f64,
    pub se_risk: f64,
    pub median_risk: f64,
    pub mean_ratio: Option<f64>,
    pub median_ratio: Option<f64>,
    pub median_abs_ratio_dev: Option<f64>,
    pub mean_n_ratio: f64,
    pub median_n_ratio: f64,
    pub iqr_n_ratio: f64,
    pub coverage_simple: f64,
    pub coverage_refined: f64,
    pub coverage_plug_in: Option<f64>,
    pub degenerate: usize,
    pub coverage_simple_nondegenerate: Option<f64>,
    pub coverage_refined_nondegenerate: Option<f64>,
    pub mean_gamma_hat: f64,
    pub tau_probes: Vec<ProbeStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetMeta {
    pub class: String,
    #[serde(rename = "J")]
    pub j: usize,
    pub gamma_limit: f64,
    pub constraint: Constraint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub target: TargetMeta,
    pub r_exponent: f64,
    pub records: Vec<NRecord>,
    /// Slope of `ln mean_risk` against `ln n`, when it can be fitted.
    pub rate_slope: Option<f64>,
    #[serde(skip)]
    pub replications: Vec<RepRecord>,
}

enum Source {
    R(RegressionSampler),
    D(Arc<DensitySampler>),
    S(StationarySampler),
}

impl Source {
    fn draw(&self, n: usize, seed: SeedStream) -> Result<Dataset> {
        match self {
            Source::R(s) => Ok(s.sample(seed)),
            Source::D(s) => s.sample(n, seed),
            Source::S(s) => Ok(s.sample(seed)),
        }
    }
}

/// Worker count: `ADAPTIX_THREADS` if set and positive, otherwise rayon's default.
pub fn thread_count() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&k| k > 0)
        .unwrap_or_else(rayon::current_num_threads)
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let k = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / k;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

/// Linear-interpolated sample quantile.
pub fn quantile(xs: &[f64], p: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let h = p * (v.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

fn fraction(flags: impl Iterator<Item = bool>) -> Option<f64> {
    let (mut hit, mut total) = (0usize, 0usize);
    for f in flags {
        total += 1;
        hit += f as usize;
    }
    (total > 0).then(|| hit as f64 / total as f64)
}

fn summarize(n: usize, n0: usize, a_n: f64, b_n: f64, reps: &[RepRecord], probes: &[usize]) -> NRecord {
    let risks: Vec<f64> = reps.iter().map(|r| r.risk).collect();
    let (mean_risk, se_risk) = mean_se(&risks);
    let ratios: Vec<f64> = reps.iter().filter_map(|r| r.ratio).collect();
    let (mean_ratio, median_ratio, median_abs_ratio_dev) = if ratios.is_empty() {
        (None, None, None)
    } else {
        let devs: Vec<f64> = ratios.iter().map(|r| (r - 1.0).abs()).collect();
        (
            Some(mean_se(&ratios).0),
            Some(quantile(&ratios, 0.5)),
            Some(quantile(&devs, 0.5)),
        )
    };
    let n_ratios: Vec<f64> = reps.iter().map(RepRecord::n_ratio).collect();
    let nondeg = || reps.iter().filter(|r| !r.degenerate);
    NRecord {
        n,
        reps: reps.len(),
        n0,
        a_n,
        b_n,
        mean_risk,
        se_risk,
        median_risk: quantile(&risks, 0.5),
        mean_ratio,
        median_ratio,
        median_abs_ratio_dev,
        mean_n_ratio: mean_se(&n_ratios).0,
        median_n_ratio: quantile(&n_ratios, 0.5),
        iqr_n_ratio: quantile(&n_ratios, 0.75) - quantile(&n_ratios, 0.25),
        coverage_simple: fraction(reps.iter().map(|r| r.covered_simple)).unwrap_or(1.0),
        coverage_refined: fraction(reps.iter().map(|r| r.covered_refined)).unwrap_or(1.0),
        coverage_plug_in: fraction(reps.iter().filter_map(|r| r.covered_plug_in)),
        degenerate: reps.iter().filter(|r| r.degenerate).count(),
        coverage_simple_nondegenerate: fraction(nondeg().map(|r| r.covered_simple)),
        coverage_refined_nondegenerate: fraction(nondeg().map(|r| r.covered_refined)),
        mean_gamma_hat: mean_se(&reps.iter().map(|r| r.gamma_hat).collect::<Vec<_>>()).0,
        tau_probes: probes
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                let (mean, se) = mean_se(&reps.iter().map(|r| r.tau_probes[i]).collect::<Vec<_>>());
                ProbeStats { n_harm: p, mean, se }
            })
            .collect(),
    }
}

/// Everything a replication at one `n` shares.
struct Cell<'a> {
    cfg: &'a ExperimentConfig,
    source: Source,
    truth: &'a TargetSpec,
    n: usize,
    stream_base: u64,
    n0: usize,
    b_n: f64,
    r_exp: f64,
}

impl Cell<'_> {
    fn replicate(&self, rep: usize) -> Result<RepRecord> {
        let (cfg, truth, b_n) = (self.cfg, self.truth, self.b_n);
        let d = self
            .source
            .draw(self.n, SeedStream::new(cfg.base_seed, self.stream_base + rep as u64))?;
        let est = adaptive_estimate(&d)?;
        let risk = l2_error(&est, truth)?;
        let plug_in = PlugIn {
            rq: cfg.noise.as_ref().and_then(NoiseSpec::rq_params),
        };
        let conf = confidence_report(&est, cfg.delta, self.r_exp, cfg.c_free, plug_in)?;
        let sel = est.selection.as_ref().expect("fresh estimates carry their selection");
        let positive = |x: f64| (b_n > 0.0).then(|| x / b_n);
        let covered = risk - ROUNDING_SLACK * truth.series.norm_sq();
        Ok(RepRecord {
            n: self.n,
            rep,
            risk,
            tau_star: est.tau_star,
            n_sel: est.n_selected,
            n0: self.n0,
            ratio: positive(est.tau_star),
            loss_ratio: positive(risk),
            covered_simple: conf.covers_simple(covered),
            covered_refined: conf.covers_refined(covered),
            covered_plug_in: (!conf.degenerate)
                .then(|| conf.diagnostics.get("aci_plug_in").map(|&b| b >= covered))
                .flatten(),
            degenerate: conf.degenerate,
            gamma_hat: conf.gamma_hat,
            tau_probes: cfg
                .tau_probes
                .iter()
                .map(|&p| sel.tau_at(p).expect("validated probe"))
                .collect(),
        })
    }
}

/// Run every replication for every `n` and aggregate by index.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let truth = Arc::new(cfg.target.build(cfg.problem, cfg.n_max())?);
    let delta_s = delta_for(cfg.problem, &truth, cfg.noise.as_ref())?;
    let r_exp = cfg.r_exponent();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count())
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let density = match cfg.problem {
        Problem::D => Some(Arc::new(DensitySampler::new(truth.clone())?)),
        _ => None,
    };

    let mut records = Vec::with_capacity(cfg.n_grid.len());
    let mut replications = Vec::with_capacity(cfg.n_grid.len() * cfg.reps);
    for (i, &n) in cfg.n_grid.iter().enumerate() {
        let oracle = oracle_curves(&truth, cfg.problem, n, delta_s)?;
        let source = match cfg.problem {
            Problem::R => Source::R(RegressionSampler::new(truth.clone(), n, cfg.noise.expect("validated"))?),
            Problem::D => Source::D(density.clone().expect("built above")),
            Problem::S => Source::S(StationarySampler::new(truth.clone(), n)?),
        };
        let cell = Cell {
            cfg,
            source,
            truth: &truth,
            n,
            stream_base: (i as u64) << 32,
            n0: oracle.n0,
            b_n: oracle.b_min,
            r_exp,
        };
        let reps: Vec<RepRecord> = pool.install(|| {
            (0..cfg.reps)
                .into_par_iter()
                .map(|rep| cell.replicate(rep))
                .collect::<Result<Vec<_>>>()
        })?;
        records.push(summarize(
            n,
            oracle.n0,
            oracle.a_min,
            oracle.b_min,
            &reps,
            &cfg.tau_probes,
        ));
        replications.extend(reps);
    }

    let rate_slope = if records.len() >= 3 {
        let ns: Vec<f64> = records.iter().map(|r| r.n as f64).collect();
        let risks: Vec<f64> = records.iter().map(|r| r.mean_risk).collect();
        fit_rate(&ns, &risks).ok()
    } else {
        None
    };
    Ok(ExperimentReport {
        config: cfg.clone(),
        target: TargetMeta {
            class: match cfg.target.kind {
                TargetKind::W { .. } => "W",
                TargetKind::Z { .. } => "Z",
                TargetKind::Custom { .. } => "custom",
            }
            .to_string(),
            j: truth.len(),
            gamma_limit: truth.gamma_limit,
            constraint: truth.constraint,
        },
        r_exponent: r_exp,
        records,
        rate_slope,
        replications,
    })
}

/// Least-squares slope of `ln risk` on `ln n`.
pub fn fit_rate(ns: &[f64], risks: &[f64]) -> Result<f64> {
    if ns.len() != risks.len() || ns.len() < 3 {
        return Err(Error::Parameter(format!(
            "rate fit needs at least 3 paired points, got {} and {}",
            ns.len(),
            risks.len()
        )));
    }
    if ns.iter().chain(risks).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::Parameter("rate fit needs positive finite values".into()));
    }
    let xs: Vec<f64> = ns.iter().map(|n| n.ln()).collect();
    let ys: Vec<f64> = risks.iter().map(|r| r.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Parameter("rate fit needs at least two distinct n".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRecord {
    pub n: usize,
    pub reps: usize,
    pub simple: f64,
    pub simple_se: f64,
    pub refined: f64,
    pub refined_se: f64,
    pub plug_in: Option<f64>,
    pub degenerate: usize,
    pub simple_nondegenerate: Option<f64>,
    pub refined_nondegenerate: Option<f64>,
}

/// Coverage of each bound type, per `n`.
pub fn coverage_experiment(cfg: &ExperimentConfig) -> Result<Vec<CoverageRecord>> {
    Ok(coverage_from(&run_experiment(cfg)?))
}

pub fn coverage_from(report: &ExperimentReport) -> Vec<CoverageRecord> {
    let binomial_se = |p: f64, k: usize| (p * (1.0 - p) / k as f64).sqrt();
    report
        .records
        .iter()
        .map(|r| CoverageRecord {
            n: r.n,
            reps: r.reps,
            simple: r.coverage_simple,
            simple_se: binomial_se(r.coverage_simple, r.reps),
            refined: r.coverage_refined,
            refined_se: binomial_se(r.coverage_refined, r.reps),
            plug_in: r.coverage_plug_in,
            degenerate: r.degenerate,
            simple_nondegenerate: r.coverage_simple_nondegenerate,
            refined_nondegenerate: r.coverage_refined_nondegenerate,
        })
        .collect()
}

impl ExperimentReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Long format, one row per replication.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "n,rep,risk,tau_star,N_sel,N0,ratio,covered_simple,covered_refined,gamma_hat,degenerate"
        )?;
        let opt = |v: Option<f64>| v.map_or(String::new(), fmt_f64);
        for r in &self.replications {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.n,
                r.rep,
                fmt_f64(r.risk),
                fmt_f64(r.tau_star),
                r.n_sel,
                r.n0,
                opt(r.ratio),
                r.covered_simple as u8,
                r.covered_refined as u8,
                fmt_f64(r.gamma_hat),
                r.degenerate as u8
            )?;
        }
        Ok(())
    }

    /// Write the files named in `config.outputs`, or into `dir` when given.
    pub fn write_outputs(&self, dir: Option<&Path>) -> Result<Vec<PathBuf>> {
        let pick = |configured: &Option<PathBuf>, name: &str| -> Option<PathBuf> {
            match dir {
                Some(d) => Some(d.join(name)),
                None => configured.clone(),
            }
        };
        let mut written = Vec::new();
        if let Some(p) = pick(&self.config.outputs.report, "report.json") {
            fs::write(&p, self.to_json()?)?;
            written.push(p);
        }
        if let Some(p) = pick(&self.config.outputs.csv, "replications.csv") {
            let mut buf = Vec::new();
            self.write_csv(&mut buf)?;
            fs::write(&p, buf)?;
            written.push(p);
        }
        Ok(written)
    }
}

/// Per-`n` medians of any replication statistic, keyed by `n`.
pub fn per_n<F: Fn(&RepRecord) -> Option<f64>>(report: &ExperimentReport, stat: F) -> BTreeMap<usize, Vec<f64>> {
    let mut out: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in &report.replications {
        if let Some(v) = stat(r) {
            out.entry(r.n).or_default().push(v);
        }
    }
    out
}
