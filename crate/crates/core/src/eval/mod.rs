//! Error measurement between full-data and coreset regression.
//!
//! A [`Reference`] draws the evaluation cloud once and caches the full-data
//! kernel sums on it, so any number of coresets can be compared against the
//! same points at the cost of evaluating only the coreset.

mod harness;

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use harness::{bench, sweep, BenchRow, SweepRow, SweepSpec};

use crate::coreset::Coreset;
use crate::data::{Dataset, Extent};
use crate::error::{Error, Result};
use crate::kernel::GaussianKernel;
use crate::regress::{EvalContext, KernelSums, Regressor, Truncation};

/// Stream id separating evaluation draws from construction draws that share
/// a seed.
const CLOUD_STREAM: u64 = 0x6576_616c;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub n_points: usize,
    /// Query box; the data extent when `None`.
    pub domain: Option<Extent>,
    /// Added to every side of the query box.
    pub margin: f64,
    /// Queries with `kde_P(q) < rho` are skipped; 0 keeps every query where
    /// both regressions are defined.
    pub rho: f64,
    pub seed: u64,
    pub repetitions: usize,
    pub truncation: Truncation,
    pub kernel: GaussianKernel,
}

impl EvalConfig {
    pub fn new(kernel: GaussianKernel, dim: usize) -> Self {
        Self {
            n_points: Self::default_points(dim),
            domain: None,
            margin: 0.0,
            rho: 0.0,
            seed: 0,
            repetitions: 10,
            truncation: Truncation::Off,
            kernel,
        }
    }

    /// 128 000 queries in one dimension, 512 000 otherwise.
    pub fn default_points(dim: usize) -> usize {
        if dim <= 1 {
            128_000
        } else {
            512_000
        }
    }

    pub fn context(&self) -> EvalContext {
        EvalContext {
            kernel: self.kernel,
            truncation: self.truncation,
        }
    }

    /// The query box for `p`.
    pub fn domain_for(&self, p: &Dataset) -> Result<Extent> {
        let base = self.domain.clone().unwrap_or_else(|| p.extent().clone());
        if base.dim() != p.dim() {
            return Err(Error::DimensionMismatch {
                expected: p.dim(),
                got: base.dim(),
            });
        }
        if !(self.margin.is_finite() && self.margin >= 0.0) {
            return Err(Error::param("margin", "must be finite and nonnegative"));
        }
        Ok(base.expanded(self.margin))
    }

    fn validate(&self) -> Result<()> {
        if self.n_points == 0 {
            return Err(Error::param("n_points", "must be at least 1"));
        }
        if !(self.rho.is_finite() && self.rho >= 0.0) {
            return Err(Error::param("rho", "must be finite and nonnegative"));
        }
        Ok(())
    }
}

/// Query points, stored flat.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalCloud {
    dim: usize,
    coords: Vec<f64>,
}

impl EvalCloud {
    /// `n` uniform draws in `domain`. Clouds with the same domain and seed are
    /// nested: the first `m` points of a larger cloud equal the smaller one.
    pub fn uniform(domain: &Extent, n: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(CLOUD_STREAM);
        let d = domain.dim();
        let mut coords = Vec::with_capacity(n * d);
        for _ in 0..n {
            for j in 0..d {
                let u: f64 = rng.random();
                coords.push(domain.min[j] + u * (domain.max[j] - domain.min[j]));
            }
        }
        Self { dim: d, coords }
    }

    pub fn from_flat(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 || coords.is_empty() || coords.len() % dim != 0 {
            return Err(Error::param("queries", "need a nonempty n x d buffer"));
        }
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("queries", "coordinates must be finite"));
        }
        Ok(Self { dim, coords })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    /// Largest `|reg_P(q) - reg_S(q)|` over admissible queries.
    pub linf: f64,
    /// `linf / M`; 0 when both are 0.
    pub linf_normalized: f64,
    pub argmax_q: Vec<f64>,
    pub mean_abs: f64,
    pub admissible_count: usize,
    pub skipped_count: usize,
    pub build_time_ms: Option<f64>,
    pub query_time_p_ms: f64,
    pub query_time_s_ms: f64,
}

/// Full-data kernel sums cached on an evaluation cloud.
pub struct Reference {
    cloud: EvalCloud,
    sums: Vec<KernelSums>,
    total_weight: f64,
    m_range: f64,
    y_min: f64,
    rho: f64,
    ctx: EvalContext,
    query_time_ms: f64,
}

/// Coreset kernel sums on a reference cloud.
pub struct Measured {
    sums: Vec<KernelSums>,
    total_weight: f64,
    query_time_ms: f64,
}

impl Measured {
    /// Coreset regression at every query; `None` where undefined.
    pub fn reg_values(&self) -> Vec<Option<f64>> {
        self.sums.iter().map(KernelSums::ratio).collect()
    }

    pub fn query_time_ms(&self) -> f64 {
        self.query_time_ms
    }
}

fn elapsed_ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

impl Reference {
    pub fn new(p: &Dataset, cfg: &EvalConfig) -> Result<Self> {
        cfg.validate()?;
        let domain = cfg.domain_for(p)?;
        let cloud = EvalCloud::uniform(&domain, cfg.n_points, cfg.seed);
        Self::with_cloud(p, cfg.context(), cfg.rho, cloud)
    }

    pub fn with_cloud(p: &Dataset, ctx: EvalContext, rho: f64, cloud: EvalCloud) -> Result<Self> {
        if cloud.dim() != p.dim() {
            return Err(Error::DimensionMismatch {
                expected: p.dim(),
                got: cloud.dim(),
            });
        }
        let reg = Regressor::new(p, ctx)?;
        let t = Instant::now();
        let sums = reg.sums_batch(cloud.coords())?;
        let query_time_ms = elapsed_ms(t);
        Ok(Self {
            cloud,
            sums,
            total_weight: p.total_weight(),
            m_range: p.m_range(),
            y_min: p.y_min(),
            rho,
            ctx,
            query_time_ms,
        })
    }

    pub fn cloud(&self) -> &EvalCloud {
        &self.cloud
    }

    pub fn context(&self) -> &EvalContext {
        &self.ctx
    }

    pub fn query_time_ms(&self) -> f64 {
        self.query_time_ms
    }

    /// Full-data regression at every query; `None` where undefined.
    pub fn reg_values(&self) -> Vec<Option<f64>> {
        self.sums.iter().map(KernelSums::ratio).collect()
    }

    pub fn measure(&self, s: &Dataset) -> Result<Measured> {
        let reg = Regressor::new(s, self.ctx)?;
        if s.dim() != self.cloud.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.cloud.dim(),
                got: s.dim(),
            });
        }
        let t = Instant::now();
        let sums = reg.sums_batch(self.cloud.coords())?;
        Ok(Measured {
            sums,
            total_weight: s.total_weight(),
            query_time_ms: elapsed_ms(t),
        })
    }

    pub fn compare(&self, s: &Dataset) -> Result<ErrorReport> {
        let m = self.measure(s)?;
        self.report(&m, self.cloud.len())
    }

    /// Report over the first `n` queries of the cloud.
    pub fn report(&self, m: &Measured, n: usize) -> Result<ErrorReport> {
        let n = n.min(self.cloud.len());
        let mut linf = 0.0f64;
        let mut argmax = None;
        let mut total = 0.0;
        let mut admissible = 0;
        for i in 0..n {
            let sp = &self.sums[i];
            if sp.mass / self.total_weight < self.rho {
                continue;
            }
            let (Some(a), Some(b)) = (sp.ratio(), m.sums[i].ratio()) else {
                continue;
            };
            let e = (a - b).abs();
            admissible += 1;
            total += e;
            if argmax.is_none() || e > linf {
                linf = e;
                argmax = Some(i);
            }
        }
        let Some(arg) = argmax else {
            return Err(Error::EmptyAdmissibleSet { skipped: n });
        };
        Ok(ErrorReport {
            linf,
            linf_normalized: normalized(linf, self.m_range),
            argmax_q: self.cloud.point(arg).to_vec(),
            mean_abs: total / admissible as f64,
            admissible_count: admissible,
            skipped_count: n - admissible,
            build_time_ms: None,
            query_time_p_ms: self.query_time_ms * n as f64 / self.cloud.len() as f64,
            query_time_s_ms: m.query_time_ms * n as f64 / self.cloud.len() as f64,
        })
    }

    /// Largest `|kde_P - kde_S| / max(kde_P, rho)` over the cloud.
    pub fn relative_kde_error(&self, m: &Measured, rho: f64) -> f64 {
        let mut worst = 0.0f64;
        for (sp, ss) in self.sums.iter().zip(&m.sums) {
            let kp = sp.mass / self.total_weight;
            let ks = ss.mass / m.total_weight;
            let diff = (kp - ks).abs();
            if diff == 0.0 {
                continue;
            }
            worst = worst.max(diff / kp.max(rho));
        }
        worst
    }

    /// Largest weighted-KDE difference after mapping `P`'s values onto
    /// `[1, 2]`, in units of that unit range.
    fn normalized_wkde_error(&self, m: &Measured) -> f64 {
        if self.m_range == 0.0 {
            return 0.0;
        }
        let shift = self.y_min - self.m_range;
        let mut worst = 0.0f64;
        for (sp, ss) in self.sums.iter().zip(&m.sums) {
            let dk = sp.mass / self.total_weight - ss.mass / m.total_weight;
            let dw = sp.moment / self.total_weight - ss.moment / m.total_weight;
            worst = worst.max((dw - shift * dk).abs() / self.m_range);
        }
        worst
    }
}

fn normalized(linf: f64, m: f64) -> f64 {
    if linf == 0.0 {
        0.0
    } else {
        linf / m
    }
}

/// L-infinity error of `s` against `p` on a fresh evaluation cloud.
pub fn linf_error(p: &Dataset, s: &Dataset, cfg: &EvalConfig) -> Result<ErrorReport> {
    Reference::new(p, cfg)?.compare(s)
}

/// Per-repetition reports and their averages.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepeatedReport {
    pub runs: Vec<ErrorReport>,
    pub mean_linf: f64,
    pub mean_linf_normalized: f64,
}

/// Seed of repetition `rep` under base seed `seed`.
pub fn repetition_seed(seed: u64, rep: usize) -> u64 {
    seed.wrapping_add(rep as u64)
}

/// Builds a coreset per repetition with `build(repetition_seed(..))` and
/// measures each against one shared evaluation cloud.
pub fn linf_error_repeated(
    p: &Dataset,
    cfg: &EvalConfig,
    mut build: impl FnMut(u64) -> Result<Coreset>,
) -> Result<RepeatedReport> {
    if cfg.repetitions == 0 {
        return Err(Error::param("repetitions", "must be at least 1"));
    }
    let reference = Reference::new(p, cfg)?;
    let mut runs = Vec::with_capacity(cfg.repetitions);
    for rep in 0..cfg.repetitions {
        let t = Instant::now();
        let cs = build(repetition_seed(cfg.seed, rep))?;
        let build_ms = elapsed_ms(t);
        let mut r = reference.compare(cs.data())?;
        r.build_time_ms = Some(build_ms);
        runs.push(r);
    }
    let k = runs.len() as f64;
    Ok(RepeatedReport {
        mean_linf: runs.iter().map(|r| r.linf).sum::<f64>() / k,
        mean_linf_normalized: runs.iter().map(|r| r.linf_normalized).sum::<f64>() / k,
        runs,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergencePoint {
    pub n_points: usize,
    pub linf: f64,
}

/// L-infinity error over nested prefixes of one cloud of `max(sizes)`
/// points. Each value is a max over a superset of the previous prefix, so the
/// sequence is non-decreasing in the prefix size.
pub fn convergence(
    p: &Dataset,
    s: &Dataset,
    cfg: &EvalConfig,
    sizes: &[usize],
) -> Result<Vec<ConvergencePoint>> {
    let n = sizes
        .iter()
        .copied()
        .max()
        .ok_or_else(|| Error::param("sizes", "need at least one cloud size"))?;
    let mut cfg = cfg.clone();
    cfg.n_points = n;
    let reference = Reference::new(p, &cfg)?;
    let m = reference.measure(s)?;
    sizes
        .iter()
        .map(|&k| {
            Ok(ConvergencePoint {
                n_points: k,
                linf: reference.report(&m, k)?.linf,
            })
        })
        .collect()
}

/// Empirical relative KDE error of `s`, with `cfg.rho` replaced by `rho`.
pub fn check_relative_approx(p: &Dataset, s: &Dataset, rho: f64, cfg: &EvalConfig) -> Result<f64> {
    let reference = Reference::new(p, cfg)?;
    let m = reference.measure(s)?;
    Ok(reference.relative_kde_error(&m, rho))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KrCheck {
    /// Largest relative KDE error.
    pub alpha_hat: f64,
    /// Largest weighted-KDE error with the values mapped onto `[1, 2]`.
    pub beta_hat: f64,
    /// Largest regression error where `kde_P >= rho`.
    pub reg_linf: f64,
    /// `4 (alpha_hat + beta_hat / rho) M`.
    pub bound: f64,
    pub holds: bool,
}

/// Measures the two premises of the sufficient condition for a
/// (rho, eps)-coreset and checks its conclusion on the same cloud.
pub fn check_kr_sufficient(
    p: &Dataset,
    s: &Dataset,
    rho: f64,
    cfg: &EvalConfig,
) -> Result<KrCheck> {
    if !(rho.is_finite() && rho > 0.0) {
        return Err(Error::param("rho", "must be positive"));
    }
    let mut cfg = cfg.clone();
    cfg.rho = rho;
    let reference = Reference::new(p, &cfg)?;
    let m = reference.measure(s)?;
    Ok(kr_check(&reference, &m, rho))
}

/// [`check_kr_sufficient`] against an existing reference.
pub fn kr_check(reference: &Reference, m: &Measured, rho: f64) -> KrCheck {
    let alpha_hat = reference.relative_kde_error(m, rho);
    let beta_hat = reference.normalized_wkde_error(m);
    let mut reg_linf = 0.0f64;
    for (sp, ss) in reference.sums.iter().zip(&m.sums) {
        if sp.mass / reference.total_weight < rho {
            continue;
        }
        if let (Some(a), Some(b)) = (sp.ratio(), ss.ratio()) {
            reg_linf = reg_linf.max((a - b).abs());
        }
    }
    let m_range = reference.m_range;
    let bound = 4.0 * (alpha_hat + beta_hat / rho) * m_range;
    KrCheck {
        alpha_hat,
        beta_hat,
        reg_linf,
        bound,
        holds: reg_linf <= bound + 1e-12 * m_range,
    }
}
