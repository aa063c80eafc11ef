//! Experiment drivers: memory times, half-lives, i.i.d. threshold scans and fits.
//!
//! Every sample draws its own ChaCha8 stream from `(seed_base, index)`, and parallel
//! results are collected in index order, so tables are reproducible for a fixed seed
//! base regardless of worker count.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};

use crate::codegrid::{LatticeDims, NoiseParams, PauliFrame, PauliLetter, Syndrome};
use crate::dynamics::{bkl_step, init_engine, run_while, EngineState};
use crate::error::{Error, Result};
use crate::exactdec::ExactDecoder;
use crate::logicals::LogicalSet;
use crate::rgdec::rg_decode;

/// SplitMix64 finaliser; mixes a seed base and a stream index into a sample seed.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x6A09_E667_F3BC_C909);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs `f(0..n)` on `workers` threads (0 = rayon default) and returns results in order.
pub fn par_map<T: Send>(n: usize, workers: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().expect("thread pool");
    pool.install(|| (0..n).into_par_iter().map(&f).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FailureDecoder {
    Exact,
    Rg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemTimeConfig {
    pub dims: LatticeDims,
    pub gamma_z: f64,
    /// `gamma_z / gamma_y`; infinite for pure dephasing.
    pub zeta: f64,
    pub ca_enabled: bool,
    /// Largest allowed gap between checks as a fraction of the elapsed time.
    pub check_fraction: f64,
    pub decoder: FailureDecoder,
    pub n_samples: usize,
    pub seed_base: u64,
    /// Samples still alive at this time are reported as censored at it.
    pub time_limit: f64,
}

impl MemTimeConfig {
    pub fn new(dims: LatticeDims, gamma_z: f64, zeta: f64, ca_enabled: bool) -> Self {
        MemTimeConfig {
            dims,
            gamma_z,
            zeta,
            ca_enabled,
            check_fraction: 1e-3,
            decoder: if zeta.is_infinite() { FailureDecoder::Exact } else { FailureDecoder::Rg },
            n_samples: 100,
            seed_base: 0,
            time_limit: f64::INFINITY,
        }
    }

    pub fn noise(&self) -> Result<NoiseParams> {
        let gamma_y = crate::dynamics::y_rate(self.gamma_z, self.zeta);
        let n = NoiseParams { gamma_x: 0.0, gamma_y, gamma_z: self.gamma_z, p_x: 0.0, p_y: 0.0, p_z: 0.0 };
        n.validate()?;
        Ok(n)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.check_fraction > 0.0 && self.check_fraction <= 1e-3) {
            return Err(Error::Config(format!("check fraction must lie in (0, 1e-3], got {}", self.check_fraction)));
        }
        if self.decoder == FailureDecoder::Exact && !self.zeta.is_infinite() {
            return Err(Error::Config("the exact decoder requires infinite bias".into()));
        }
        if !(self.gamma_z > 0.0) {
            return Err(Error::Config(format!("gamma_z must be positive, got {}", self.gamma_z)));
        }
        if !(self.time_limit > 0.0) {
            return Err(Error::Config("time limit must be positive".into()));
        }
        self.noise().map(|_| ())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemorySample {
    pub time: f64,
    pub censored: bool,
    pub checks: u64,
    pub events: u64,
    /// Longest realised interval between consecutive checks.
    pub max_gap: f64,
    /// Longest delay between a scheduled check and the event that triggered it.
    pub max_overshoot: f64,
    /// Scheduled interval before the first check.
    pub first_interval: f64,
}

/// Global failure test applied at each check.
enum Checker {
    Exact(ExactDecoder, LogicalSet),
    Rg(LogicalSet),
}

impl Checker {
    fn new(cfg: &MemTimeConfig) -> Self {
        let set = LogicalSet::new(cfg.dims);
        match cfg.decoder {
            FailureDecoder::Exact => Checker::Exact(ExactDecoder::new(cfg.dims), set),
            FailureDecoder::Rg => Checker::Rg(set),
        }
    }

    fn fails(&self, frame: &PauliFrame, s: &Syndrome) -> bool {
        let (correction, set) = match self {
            Checker::Exact(dec, set) => match dec.decode(s) {
                Ok(r) => (r.correction, set),
                Err(_) => return true,
            },
            Checker::Rg(set) => match rg_decode(s, s.dims()) {
                Ok(c) => (c, set),
                Err(_) => return true,
            },
        };
        !set.classify_unchecked(&frame.compose(&correction)).is_trivial()
    }
}

/// Runs the noisy dynamics until a periodic global decode reports a logical error.
///
/// A check happens after the first event at or past `last_check + dt`. The first `dt`
/// is `check_fraction` times `min(L, H) / 2` over the vacuum event rate; afterwards it
/// is `check_fraction` times the elapsed time.
pub fn memory_time_sample(cfg: &MemTimeConfig, seed: u64) -> Result<MemorySample> {
    cfg.validate()?;
    let checker = Checker::new(cfg);
    let mut engine = init_engine(cfg.dims, &cfg.noise()?, cfg.ca_enabled, seed)?;
    let distance = cfg.dims.l().min(cfg.dims.h()) as f64 / 2.0;
    let first_interval = cfg.check_fraction * distance / engine.total_rate();
    let mut dt = first_interval;
    let mut last_check = 0.0;
    let mut checks = 0;
    let mut max_gap: f64 = 0.0;
    let mut max_overshoot: f64 = 0.0;
    loop {
        if bkl_step(&mut engine).is_none() {
            return Ok(MemorySample {
                time: cfg.time_limit,
                censored: true,
                checks,
                events: 0,
                max_gap,
                max_overshoot,
                first_interval,
            });
        }
        let t = engine.clock();
        if t >= cfg.time_limit {
            return Ok(MemorySample {
                time: cfg.time_limit,
                censored: true,
                checks,
                events: engine.event_count(),
                max_gap,
                max_overshoot,
                first_interval,
            });
        }
        if t < last_check + dt {
            continue;
        }
        checks += 1;
        max_gap = max_gap.max(t - last_check);
        max_overshoot = max_overshoot.max(t - last_check - dt);
        if checker.fails(engine.frame(), &engine_syndrome(&engine)) {
            return Ok(MemorySample {
                time: t,
                censored: false,
                checks,
                events: engine.event_count(),
                max_gap,
                max_overshoot,
                first_interval,
            });
        }
        last_check = t;
        dt = cfg.check_fraction * t;
    }
}

fn engine_syndrome(engine: &EngineState) -> Syndrome {
    crate::codegrid::syndrome(engine.frame())
}

/// Time of the first `Y` event of the noisy dynamics.
pub fn first_y_time(dims: LatticeDims, gamma_tot: f64, zeta: f64, ca_enabled: bool, seed: u64) -> Result<f64> {
    let noise = NoiseParams::from_rates(gamma_tot, zeta)?;
    if noise.gamma_y == 0.0 {
        return Err(Error::Config("no Y noise at infinite bias".into()));
    }
    let mut engine = init_engine(dims, &noise, ca_enabled, seed)?;
    run_while(&mut engine, |_, ev| ev.letter == PauliLetter::Y).ok_or(Error::Config("all rates vanish".into()))?;
    Ok(engine.clock())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfLife {
    pub median: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Sample median with a distribution-free 95% interval from binomial order statistics.
pub fn half_life(samples: &[f64]) -> Result<HalfLife> {
    if samples.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut x = samples.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len();
    let median = if n % 2 == 1 { x[n / 2] } else { 0.5 * (x[n / 2 - 1] + x[n / 2]) };
    let binom = Binomial::new(0.5, n as u64).expect("valid binomial");
    // Order statistics r <= s (1-based) with P(X_(r) <= m <= X_(s)) >= 0.95.
    let r = (binom.inverse_cdf(0.025) as usize).clamp(1, n);
    let s = (n + 1 - r).clamp(r, n);
    Ok(HalfLife { median, ci_low: x[r - 1], ci_high: x[s - 1] })
}

/// One row of `memtime.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemtimeRecord {
    pub run_id: String,
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "H")]
    pub h: usize,
    pub gamma_z: f64,
    pub zeta: f64,
    pub ca_enabled: bool,
    pub beta: f64,
    pub n_samples: usize,
    #[serde(rename = "median_T")]
    pub median_t: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub seed_base: u64,
}

pub const MEMTIME_HEADER: [&str; 12] = [
    "run_id", "L", "H", "gamma_z", "zeta", "ca_enabled", "beta", "n_samples", "median_T", "ci_low", "ci_high",
    "seed_base",
];

/// Memory-time samples of one configuration, in sample order.
pub fn memory_samples(cfg: &MemTimeConfig, workers: usize) -> Result<Vec<MemorySample>> {
    cfg.validate()?;
    par_map(cfg.n_samples, workers, |k| memory_time_sample(cfg, derive_seed(cfg.seed_base, k as u64)))
        .into_iter()
        .collect()
}

/// Half-life at each size. Size `k` uses seed base `derive_seed(seed_base, k)`.
pub fn memory_curve(
    sizes: &[LatticeDims],
    base: &MemTimeConfig,
    workers: usize,
    run_id: &str,
) -> Result<Vec<MemtimeRecord>> {
    sizes
        .iter()
        .enumerate()
        .map(|(k, &dims)| {
            let cfg = MemTimeConfig { dims, seed_base: derive_seed(base.seed_base, k as u64), ..base.clone() };
            let samples = memory_samples(&cfg, workers)?;
            let times: Vec<f64> = samples.iter().map(|s| s.time).collect();
            let hl = half_life(&times)?;
            Ok(MemtimeRecord {
                run_id: run_id.to_string(),
                l: dims.l(),
                h: dims.h(),
                gamma_z: cfg.gamma_z,
                zeta: cfg.zeta,
                ca_enabled: cfg.ca_enabled,
                beta: crate::dynamics::beta_from_rate(cfg.gamma_z)?,
                n_samples: cfg.n_samples,
                median_t: hl.median,
                ci_low: hl.ci_low,
                ci_high: hl.ci_high,
                seed_base: cfg.seed_base,
            })
        })
        .collect()
}

/// Each qubit independently carries `Y` with probability `p_y`, `Z` with `p_z`.
pub fn iid_sample_error(dims: LatticeDims, p_y: f64, p_z: f64, seed: u64) -> Result<PauliFrame> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    iid_error_with(dims, p_y, p_z, &mut rng)
}

pub fn iid_error_with(dims: LatticeDims, p_y: f64, p_z: f64, rng: &mut impl Rng) -> Result<PauliFrame> {
    if !(p_y >= 0.0 && p_z >= 0.0 && p_y + p_z <= 1.0) {
        return Err(Error::Probability(format!("need p_y, p_z >= 0 and p_y + p_z <= 1, got {p_y}, {p_z}")));
    }
    let mut f = PauliFrame::identity(dims);
    for k in 0..dims.n() {
        let u: f64 = rng.random();
        if u < p_z {
            f.apply(dims.qubit_at(k), PauliLetter::Z);
        } else if u < p_z + p_y {
            f.apply(dims.qubit_at(k), PauliLetter::Y);
        }
    }
    Ok(f)
}

/// True if the decoder heralds failure or leaves a nontrivial logical.
pub fn rg_trial_fails(e: &PauliFrame, set: &LogicalSet) -> bool {
    let s = crate::codegrid::syndrome(e);
    match rg_decode(&s, e.dims()) {
        Ok(c) => !set.classify_unchecked(&e.compose(&c)).is_trivial(),
        Err(_) => true,
    }
}

/// One row of `threshold.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRecord {
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "H")]
    pub h: usize,
    pub p_tot: f64,
    pub zeta_p: f64,
    pub trials: usize,
    pub failures: usize,
    pub fail_rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

pub const THRESHOLD_HEADER: [&str; 9] =
    ["L", "H", "p_tot", "zeta_p", "trials", "failures", "fail_rate", "ci_low", "ci_high"];

/// Wilson score interval at 95%.
pub fn wilson_interval(failures: usize, trials: usize) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054;
    let n = trials as f64;
    let p = failures as f64 / n;
    let denom = 1.0 + z * z / n;
    let centre = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    let lo = if failures == 0 { 0.0 } else { (centre - half).clamp(0.0, p) };
    let hi = if failures == trials { 1.0 } else { (centre + half).clamp(p, 1.0) };
    (lo, hi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub small: (usize, usize),
    pub large: (usize, usize),
    pub p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdScan {
    pub rows: Vec<ThresholdRecord>,
    pub crossings: Vec<Crossing>,
    /// Mean of the pairwise crossings of consecutive sizes.
    pub p_c: Option<f64>,
    /// 2.5% and 97.5% quantiles of `p_c` under a parametric bootstrap.
    pub p_c_interval: Option<(f64, f64)>,
}

/// First grid interval on which `large - small` goes from negative to non-negative,
/// located by linear interpolation.
pub fn curve_crossing(p_grid: &[f64], small: &[f64], large: &[f64]) -> Option<f64> {
    let d: Vec<f64> = large.iter().zip(small).map(|(a, b)| a - b).collect();
    for k in 0..d.len().saturating_sub(1) {
        if d[k] < 0.0 && d[k + 1] >= 0.0 {
            let t = -d[k] / (d[k + 1] - d[k]);
            return Some(p_grid[k] + t * (p_grid[k + 1] - p_grid[k]));
        }
    }
    None
}

fn mean_crossing(p_grid: &[f64], rates: &[Vec<f64>]) -> (Vec<Option<f64>>, Option<f64>) {
    let cs: Vec<Option<f64>> = rates.windows(2).map(|w| curve_crossing(p_grid, &w[0], &w[1])).collect();
    let found: Vec<f64> = cs.iter().flatten().copied().collect();
    let mean = (!found.is_empty()).then(|| found.iter().sum::<f64>() / found.len() as f64);
    (cs, mean)
}

/// Logical failure rates of the RG decoder on i.i.d. `Y`/`Z` noise with
/// `p_z / p_y = zeta_p`, for every size and total probability.
pub fn threshold_scan(
    sizes: &[LatticeDims],
    p_grid: &[f64],
    zeta_p: f64,
    trials: usize,
    seed_base: u64,
    workers: usize,
) -> Result<ThresholdScan> {
    if sizes.len() < 2 {
        return Err(Error::Config("a threshold scan needs at least two sizes".into()));
    }
    if p_grid.is_empty() || trials == 0 {
        return Err(Error::EmptyInput);
    }
    let mut rows = Vec::new();
    let mut rates = Vec::new();
    for (si, &dims) in sizes.iter().enumerate() {
        let set = LogicalSet::new(dims);
        let mut curve = Vec::new();
        for (pi, &p) in p_grid.iter().enumerate() {
            let np = NoiseParams::from_probabilities(p, zeta_p)?;
            let base = derive_seed(derive_seed(seed_base, si as u64), pi as u64);
            let outcomes = par_map(trials, workers, |t| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(base, t as u64));
                iid_error_with(dims, np.p_y, np.p_z, &mut rng).map(|e| rg_trial_fails(&e, &set))
            });
            let failures = outcomes.into_iter().collect::<Result<Vec<bool>>>()?.into_iter().filter(|&f| f).count();
            let (ci_low, ci_high) = wilson_interval(failures, trials);
            let fail_rate = failures as f64 / trials as f64;
            curve.push(fail_rate);
            rows.push(ThresholdRecord {
                l: dims.l(),
                h: dims.h(),
                p_tot: p,
                zeta_p,
                trials,
                failures,
                fail_rate,
                ci_low,
                ci_high,
            });
        }
        rates.push(curve);
    }
    let (cs, p_c) = mean_crossing(p_grid, &rates);
    let crossings = sizes
        .windows(2)
        .zip(cs)
        .map(|(w, p)| Crossing { small: (w[0].l(), w[0].h()), large: (w[1].l(), w[1].h()), p })
        .collect();
    let p_c_interval = bootstrap_crossing(p_grid, &rates, trials, derive_seed(seed_base, u64::MAX), 200);
    Ok(ThresholdScan { rows, crossings, p_c, p_c_interval })
}

fn bootstrap_crossing(p_grid: &[f64], rates: &[Vec<f64>], trials: usize, seed: u64, reps: usize) -> Option<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draws = Vec::with_capacity(reps);
    for _ in 0..reps {
        let resampled: Vec<Vec<f64>> = rates
            .iter()
            .map(|curve| {
                curve
                    .iter()
                    .map(|&f| (0..trials).filter(|_| rng.random::<f64>() < f).count() as f64 / trials as f64)
                    .collect()
            })
            .collect();
        if let (_, Some(p)) = mean_crossing(p_grid, &resampled) {
            draws.push(p);
        }
    }
    if draws.len() < reps / 2 {
        return None;
    }
    draws.sort_by(f64::total_cmp);
    let q = |f: f64| draws[((draws.len() - 1) as f64 * f).round() as usize];
    Some((q(0.025), q(0.975)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitModel {
    /// `T = C x^b`: coefficients `[ln C, b]`.
    PowerLaw,
    /// `T = exp(a x^2 + b x + c)`: coefficients `[a, b, c]`.
    QuadraticExponential,
    /// `T = exp(a x + c)`: coefficients `[a, c]`.
    LinearExponential,
}

impl FitModel {
    fn features(self, x: f64) -> Result<Vec<f64>> {
        Ok(match self {
            FitModel::PowerLaw => {
                if !(x > 0.0) {
                    return Err(Error::Domain(format!("power-law fit needs x > 0, got {x}")));
                }
                vec![1.0, x.ln()]
            }
            FitModel::QuadraticExponential => vec![x * x, x, 1.0],
            FitModel::LinearExponential => vec![x, 1.0],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub model: FitModel,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// Residuals of `ln T`.
    pub residuals: Vec<f64>,
}

/// Least squares on `ln T` for points `(x, T)`.
pub fn fit_scaling(points: &[(f64, f64)], model: FitModel) -> Result<ScalingFit> {
    let rows: Vec<Vec<f64>> = points.iter().map(|&(x, _)| model.features(x)).collect::<Result<_>>()?;
    let k = match model {
        FitModel::QuadraticExponential => 3,
        _ => 2,
    };
    let n = points.len();
    if n <= k {
        return Err(Error::DegenerateFit(format!("{n} points for {k} parameters leaves no residual degrees of freedom")));
    }
    if let Some(&(_, t)) = points.iter().find(|&&(_, t)| !(t > 0.0)) {
        return Err(Error::Domain(format!("fit needs positive values, got {t}")));
    }
    let x = DMatrix::from_fn(n, k, |r, c| rows[r][c]);
    let y = DVector::from_iterator(n, points.iter().map(|&(_, t)| t.ln()));
    let xtx = x.transpose() * &x;
    let inv = xtx
        .clone()
        .try_inverse()
        .filter(|_| xtx.determinant().abs() > 1e-12 * xtx.norm().powi(k as i32))
        .ok_or_else(|| Error::DegenerateFit("design matrix is singular".into()))?;
    let beta = &inv * x.transpose() * &y;
    let resid = &y - &x * &beta;
    let sigma2 = resid.norm_squared() / (n - k) as f64;
    let std_errors = (0..k).map(|c| (sigma2 * inv[(c, c)]).max(0.0).sqrt()).collect();
    Ok(ScalingFit { model, coefficients: beta.iter().copied().collect(), std_errors, residuals: resid.iter().copied().collect() })
}
