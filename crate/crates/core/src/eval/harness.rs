use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{elapsed_ms, repetition_seed, EvalConfig, Reference};
use crate::coreset::{build_with_size, Method};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernel::{GaussianKernel, KernelForm};
use crate::regress::Truncation;

/// One (method, size) measurement. Failed rows carry `error` and NaN metrics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub method: Method,
    pub size: usize,
    pub coreset_len: usize,
    pub build_time_ms: f64,
    pub query_time_p_ms: f64,
    pub query_time_s_ms: f64,
    pub linf: f64,
    pub linf_normalized: f64,
    pub error: Option<String>,
}

/// Times construction and querying for every (method, size) pair, in input
/// order. Queries always use ten-bandwidth truncation for both sets.
pub fn bench(
    p: &Dataset,
    methods: &[Method],
    sizes: &[usize],
    cfg: &EvalConfig,
) -> Result<Vec<BenchRow>> {
    let mut cfg = cfg.clone();
    cfg.truncation = Truncation::TEN_SIGMA;
    let reference = Reference::new(p, &cfg)?;
    let ctx = cfg.context();
    let mut rows = Vec::with_capacity(methods.len() * sizes.len());
    for &method in methods {
        for &size in sizes {
            let t = Instant::now();
            let built = build_with_size(p, method, size, cfg.seed, Some(ctx));
            let build_ms = elapsed_ms(t);
            let mut row = BenchRow {
                method,
                size,
                coreset_len: 0,
                build_time_ms: build_ms,
                query_time_p_ms: reference.query_time_ms(),
                query_time_s_ms: f64::NAN,
                linf: f64::NAN,
                linf_normalized: f64::NAN,
                error: None,
            };
            match built.and_then(|cs| Ok((cs.len(), reference.compare(cs.data())?))) {
                Ok((len, r)) => {
                    row.coreset_len = len;
                    row.query_time_s_ms = r.query_time_s_ms;
                    row.linf = r.linf;
                    row.linf_normalized = r.linf_normalized;
                }
                Err(e) => row.error = Some(e.to_string()),
            }
            rows.push(row);
        }
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub methods: Vec<Method>,
    pub sizes: Vec<usize>,
    pub sigmas: Vec<f64>,
    pub form: KernelForm,
}

/// One sweep cell. `rep` is `None` on the per-cell summary row, which holds
/// the mean over the successful repetitions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub method: Method,
    pub size: usize,
    pub sigma: f64,
    pub rep: Option<usize>,
    pub coreset_len: usize,
    pub linf: f64,
    pub linf_normalized: f64,
    pub build_time_ms: f64,
    pub query_time_s_ms: f64,
    pub error: Option<String>,
}

/// Cross product of bandwidths, methods and sizes with `cfg.repetitions`
/// seeded repetitions each, all measured on one cloud per bandwidth.
/// Seedless methods are built once per cell and the result repeated.
pub fn sweep(p: &Dataset, spec: &SweepSpec, cfg: &EvalConfig) -> Result<Vec<SweepRow>> {
    if cfg.repetitions == 0 {
        return Err(Error::param("repetitions", "must be at least 1"));
    }
    let mut rows = Vec::new();
    for &sigma in &spec.sigmas {
        let mut cfg = cfg.clone();
        cfg.kernel = GaussianKernel::new(sigma, spec.form)?;
        let reference = Reference::new(p, &cfg)?;
        let ctx = cfg.context();
        for &method in &spec.methods {
            for &size in &spec.sizes {
                let mut cell: Vec<SweepRow> = Vec::with_capacity(cfg.repetitions);
                for rep in 0..cfg.repetitions {
                    if rep > 0 && !method.uses_seed() {
                        let mut again = cell[0].clone();
                        again.rep = Some(rep);
                        cell.push(again);
                        continue;
                    }
                    let t = Instant::now();
                    let built =
                        build_with_size(p, method, size, repetition_seed(cfg.seed, rep), Some(ctx));
                    let build_ms = elapsed_ms(t);
                    let mut row = SweepRow {
                        method,
                        size,
                        sigma,
                        rep: Some(rep),
                        coreset_len: 0,
                        linf: f64::NAN,
                        linf_normalized: f64::NAN,
                        build_time_ms: build_ms,
                        query_time_s_ms: f64::NAN,
                        error: None,
                    };
                    match built.and_then(|cs| Ok((cs.len(), reference.compare(cs.data())?))) {
                        Ok((len, r)) => {
                            row.coreset_len = len;
                            row.linf = r.linf;
                            row.linf_normalized = r.linf_normalized;
                            row.query_time_s_ms = r.query_time_s_ms;
                        }
                        Err(e) => row.error = Some(e.to_string()),
                    }
                    cell.push(row);
                }
                let ok: Vec<&SweepRow> = cell.iter().filter(|r| r.error.is_none()).collect();
                let mean = |f: fn(&SweepRow) -> f64| {
                    ok.iter().map(|r| f(r)).sum::<f64>() / ok.len() as f64
                };
                let summary = SweepRow {
                    method,
                    size,
                    sigma,
                    rep: None,
                    coreset_len: ok.first().map_or(0, |r| r.coreset_len),
                    linf: mean(|r| r.linf),
                    linf_normalized: mean(|r| r.linf_normalized),
                    build_time_ms: mean(|r| r.build_time_ms),
                    query_time_s_ms: mean(|r| r.query_time_s_ms),
                    error: ok.is_empty().then(|| "every repetition failed".to_string()),
                };
                rows.extend(cell);
                rows.push(summary);
            }
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth_ar1;

    fn setup() -> (Dataset, EvalConfig) {
        let p = synth_ar1(3000, 0.0, 1.0, 10.0, 1.0, 4).unwrap();
        let mut cfg = EvalConfig::new(GaussianKernel::half(20.0).unwrap(), 1);
        cfg.n_points = 2000;
        cfg.repetitions = 3;
        (p, cfg)
    }

    #[test]
    fn bench_full_size_has_zero_error_and_stable_order() {
        let (p, cfg) = setup();
        let methods = [
            Method::RandomSample,
            Method::GAggregate,
            Method::ProgressiveGAggregate,
        ];
        let rows = bench(&p, &methods, &[3000, 100], &cfg).unwrap();
        assert_eq!(rows.len(), 6);
        assert!(rows[0].linf < 1e-9, "{}", rows[0].linf);
        assert!(rows[4].error.is_some());
        let again = bench(&p, &methods, &[3000, 100], &cfg).unwrap();
        for (a, b) in rows.iter().zip(&again) {
            assert_eq!(
                (a.method, a.size, a.coreset_len),
                (b.method, b.size, b.coreset_len)
            );
            assert!(a.linf == b.linf || (a.linf.is_nan() && b.linf.is_nan()));
        }
    }

    #[test]
    fn sweep_summary_averages_reps() {
        let (p, cfg) = setup();
        let spec = SweepSpec {
            methods: vec![Method::RandomSample, Method::ZAggregate],
            sizes: vec![50],
            sigmas: vec![10.0, 40.0],
            form: KernelForm::Half,
        };
        let rows = sweep(&p, &spec, &cfg).unwrap();
        assert_eq!(rows.len(), 2 * 2 * 4);
        let cell = &rows[..4];
        let mean = cell[..3].iter().map(|r| r.linf).sum::<f64>() / 3.0;
        assert_eq!(cell[3].rep, None);
        assert_eq!(cell[3].linf, mean);
        let za = &rows[4..8];
        assert_eq!(za[0].linf, za[2].linf);
    }

    #[test]
    fn single_cell_sweep_matches_plain_eval() {
        let (p, mut cfg) = setup();
        cfg.repetitions = 1;
        let spec = SweepSpec {
            methods: vec![Method::KCenter],
            sizes: vec![40],
            sigmas: vec![20.0],
            form: KernelForm::Half,
        };
        let rows = sweep(&p, &spec, &cfg).unwrap();
        let cs = crate::coreset::k_center(&p, 40, cfg.seed).unwrap();
        let direct = super::super::linf_error(&p, cs.data(), &cfg).unwrap();
        assert_eq!(rows[0].linf, direct.linf);
    }
}
