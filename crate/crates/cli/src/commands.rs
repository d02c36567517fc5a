use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use kreg_core::coreset::{self, BuildSpec, ProgressiveSpec};
use kreg_core::data::{self, format_f64, Column, ColumnSchema, Loaded, WeightSource};
use kreg_core::eval::{self, BenchRow, EvalCloud, Reference, SweepRow, SweepSpec};
use kreg_core::{Dataset, EvalConfig, EvalContext, GaussianKernel, Method, Params};
use serde_json::json;

use crate::args::{
    BenchArgs, BuildArgs, Cli, Command, EvalArgs, IngestArgs, InputArgs, KernelArgs,
    ProgressiveArgs, ProgressiveParams, SweepArgs, SynthArgs,
};

/// A flag combination the library cannot interpret.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(UsageError(msg.into()).into())
}

struct Ctx {
    seed: u64,
    json: bool,
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return usage("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let ctx = Ctx {
        seed: cli.seed,
        json: cli.json,
    };
    match cli.command {
        Command::Synth(a) => synth(&ctx, a),
        Command::Ingest(a) => ingest(&ctx, a),
        Command::Build(a) => build(&ctx, a),
        Command::Eval(a) => evaluate(&ctx, a),
        Command::Bench(a) => bench(&ctx, a),
        Command::Sweep(a) => sweep(&ctx, a),
        Command::Progressive(a) => progressive(&ctx, a),
    }
}

/// Writes the primary output to `out`, or to standard output unless a JSON
/// summary takes its place. Output is assembled in memory first, so failed
/// runs leave no file behind.
fn emit(ctx: &Ctx, out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => {
            fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?
        }
        None if !ctx.json => std::io::stdout().lock().write_all(bytes)?,
        None => {}
    }
    Ok(())
}

fn summary(ctx: &Ctx, value: serde_json::Value, human: impl FnOnce() -> String) -> Result<()> {
    if ctx.json {
        println!("{}", serde_json::to_string_pretty(&value)?);
    } else {
        eprintln!("{}", human());
    }
    Ok(())
}

fn column(s: &str) -> Result<Column> {
    s.parse::<Column>()
        .map_err(|e| UsageError(e.to_string()).into())
}

fn schema(a: &InputArgs) -> Result<ColumnSchema> {
    let delimiter = match a.delim.as_str() {
        "tab" | "\\t" => b'\t',
        d if d.len() == 1 => d.as_bytes()[0],
        d => return usage(format!("--delim must be one byte or `tab`, got `{d}`")),
    };
    let date_time_cols = match &a.date_time_cols {
        Some(v) => match v.as_slice() {
            [d, t] => Some((column(d)?, column(t)?)),
            _ => return usage("--date-time-cols takes exactly two columns"),
        },
        None => None,
    };
    let x_cols = match (&a.x_cols, &date_time_cols) {
        (Some(v), _) => v.iter().map(|c| column(c)).collect::<Result<Vec<_>>>()?,
        (None, Some(_)) => Vec::new(),
        (None, None) => vec![Column::Name("x1".into())],
    };
    let weight = match (&a.weight_col, a.unit_weights) {
        (_, true) => WeightSource::Unit,
        (Some(c), false) => WeightSource::Column(column(c)?),
        (None, false) if a.no_header => WeightSource::Unit,
        (None, false) => WeightSource::IfPresent("w".into()),
    };
    Ok(ColumnSchema {
        x_cols,
        y_col: column(&a.y_col)?,
        weight,
        delimiter,
        missing_token: a.missing_token.clone(),
        date_time_cols,
        has_header: !a.no_header,
    })
}

fn load(a: &InputArgs) -> Result<Loaded> {
    let loaded = data::load_csv(&a.input, &schema(a)?)
        .with_context(|| format!("reading {}", a.input.display()))?;
    if loaded.skipped > 0 {
        eprintln!(
            "note: skipped {} invalid rows of {}",
            loaded.skipped,
            a.input.display()
        );
    }
    Ok(loaded)
}

fn kernel(sigma: Option<f64>, k: &KernelArgs) -> Result<GaussianKernel> {
    let Some(sigma) = sigma else {
        return usage("--sigma is required");
    };
    Ok(GaussianKernel::new(sigma, k.kernel_form)?)
}

fn context(k: &KernelArgs) -> Result<EvalContext> {
    Ok(EvalContext {
        kernel: kernel(k.sigma, k)?,
        truncation: k.truncate,
    })
}

fn dataset_bytes(ds: &Dataset) -> Result<Vec<u8>> {
    let mut buf = Vec::with_capacity(ds.len() * 24);
    data::write_dataset(ds, &mut buf)?;
    Ok(buf)
}

fn synth(ctx: &Ctx, a: SynthArgs) -> Result<()> {
    let ds = data::synth_ar1(a.n, a.c, a.phi, a.y0, a.noise, ctx.seed)?;
    emit(ctx, a.out.as_deref(), &dataset_bytes(&ds)?)?;
    summary(
        ctx,
        json!({ "n": ds.len(), "seed": ctx.seed, "fingerprint": ds.fingerprint() }),
        || format!("generated {} points", ds.len()),
    )
}

fn stats_json(loaded: &Loaded) -> serde_json::Value {
    let ds = &loaded.dataset;
    json!({
        "n": ds.len(),
        "dim": ds.dim(),
        "skipped": loaded.skipped,
        "total_weight": ds.total_weight(),
        "y_min": ds.y_min(),
        "y_max": ds.y_max(),
        "m_range": ds.m_range(),
        "extent": ds.extent(),
        "fingerprint": ds.fingerprint(),
    })
}

fn ingest(ctx: &Ctx, a: IngestArgs) -> Result<()> {
    let loaded = load(&a.input)?;
    emit(ctx, a.out.as_deref(), &dataset_bytes(&loaded.dataset)?)?;
    summary(ctx, stats_json(&loaded), || {
        format!(
            "ingested {} points ({} skipped)",
            loaded.dataset.len(),
            loaded.skipped
        )
    })
}

fn progressive_spec(p: &ProgressiveParams) -> Result<ProgressiveSpec> {
    let (Some(g1), Some(w1)) = (p.gamma1, p.width1) else {
        return usage("the progressive scheme needs --gamma1 and --width1");
    };
    Ok(ProgressiveSpec::new(g1, w1, p.a, p.regions)?)
}

fn build_spec(a: &BuildArgs, p: &Dataset, seed: u64) -> Result<BuildSpec> {
    let pa = &a.params;
    let mut method = a.method;
    if pa.per_block {
        if method != Method::ZOrder && method != Method::ZOrderPerBlock {
            return usage("--per-block applies only to --method z");
        }
        method = Method::ZOrderPerBlock;
    }
    let context = if method == Method::AggregateNeighbor {
        Some(context(&a.kernel)?)
    } else {
        None
    };
    let need_size = |name: &str| match pa.size {
        Some(s) => Ok(s),
        None => usage(format!("--method {name} needs --size")),
    };
    let params = match method {
        Method::RandomSample | Method::ZOrder | Method::ZOrderPerBlock | Method::ZAggregate => {
            Params::Size(need_size(method.short_name())?)
        }
        Method::KCenter => match (pa.k, pa.size) {
            (Some(k), _) | (None, Some(k)) => Params::K(k),
            (None, None) => return usage("--method kcen needs --k"),
        },
        Method::Grid | Method::GAggregate | Method::AggregateNeighbor => {
            match (pa.gamma, pa.eps, pa.size) {
                (Some(g), _, _) => Params::Gamma(g),
                (None, Some(eps), _) => {
                    let rho = pa.rho.expect("clap enforces --rho with --eps");
                    let Some(sigma) = a.kernel.sigma else {
                        return usage("--eps/--rho sizing needs --sigma");
                    };
                    Params::Gamma(coreset::grid_gamma_for(eps, sigma, rho, p.dim())?)
                }
                (None, None, Some(s)) => Params::Gamma(coreset::gamma_for_size(p, s)?),
                (None, None, None) => {
                    return usage(format!(
                        "--method {} needs --gamma, --eps/--rho or --size",
                        method.short_name()
                    ))
                }
            }
        }
        Method::ProgressiveGAggregate => Params::Progressive(progressive_spec(&pa.progressive)?),
    };
    Ok(BuildSpec {
        method,
        params,
        seed,
        context,
    })
}

fn coreset_json(cs: &kreg_core::Coreset) -> serde_json::Value {
    json!({
        "method": cs.method().name(),
        "params": cs.params().to_string(),
        "seed": cs.seed(),
        "size": cs.len(),
        "total_weight": cs.data().total_weight(),
        "source": cs.source_hash(),
        "source_len": cs.source_len(),
    })
}

fn coreset_bytes(cs: &kreg_core::Coreset) -> Result<Vec<u8>> {
    let mut buf = Vec::with_capacity(cs.len() * 32);
    data::write_coreset(cs, &mut buf)?;
    Ok(buf)
}

fn build(ctx: &Ctx, a: BuildArgs) -> Result<()> {
    let p = load(&a.input)?.dataset;
    let spec = build_spec(&a, &p, ctx.seed)?;
    let cs = coreset::build(&p, &spec)?;
    emit(ctx, a.out.as_deref(), &coreset_bytes(&cs)?)?;
    summary(ctx, coreset_json(&cs), || {
        format!(
            "{} coreset: {} points from {} ({})",
            cs.method(),
            cs.len(),
            p.len(),
            cs.params()
        )
    })
}

fn read_queries(path: &Path, dim: usize) -> Result<EvalCloud> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut coords = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() < dim {
            anyhow::bail!(
                "{}: row {} has fewer than {dim} columns",
                path.display(),
                i + 1
            );
        }
        for f in rec.iter().take(dim) {
            let v: f64 = f.trim().parse().with_context(|| {
                format!("{}: row {}: bad coordinate `{f}`", path.display(), i + 1)
            })?;
            coords.push(v);
        }
    }
    Ok(EvalCloud::from_flat(dim, coords)?)
}

fn queries(spec: Option<&str>, p: &Dataset, margin: f64, seed: u64) -> Result<EvalCloud> {
    let n = match spec {
        None => EvalConfig::default_points(p.dim()),
        Some(s) => match s.strip_prefix("random:") {
            Some(n) => match n.trim().parse::<usize>() {
                Ok(n) if n > 0 => n,
                _ => {
                    return usage(format!(
                        "--queries random:N needs a positive count, got `{n}`"
                    ))
                }
            },
            None => return read_queries(&PathBuf::from(s), p.dim()),
        },
    };
    let mut cfg = EvalConfig::new(GaussianKernel::half(1.0)?, p.dim());
    cfg.margin = margin;
    Ok(EvalCloud::uniform(&cfg.domain_for(p)?, n, seed))
}

fn opt(v: Option<f64>) -> String {
    v.map(format_f64).unwrap_or_default()
}

fn evaluate(ctx: &Ctx, a: EvalArgs) -> Result<()> {
    let p = load(&a.input)?.dataset;
    let ectx = context(&a.kernel)?;
    let s = match &a.coreset {
        Some(path) => {
            let cs = data::read_coreset_file(path)
                .with_context(|| format!("reading {}", path.display()))?;
            if cs.data().dim() != p.dim() {
                anyhow::bail!(kreg_core::Error::DimensionMismatch {
                    expected: p.dim(),
                    got: cs.data().dim(),
                });
            }
            if cs.source_hash() != p.fingerprint() {
                eprintln!(
                    "note: coreset was built from different data than {}",
                    a.input.input.display()
                );
            }
            Some(cs)
        }
        None => None,
    };
    let cloud = queries(a.queries.as_deref(), &p, a.cloud.margin, ctx.seed)?;
    let reference = Reference::with_cloud(&p, ectx, a.cloud.rho, cloud)?;
    let d = p.dim();
    let mut out = String::new();
    for j in 1..=d {
        out.push_str(&format!("q{j},"));
    }
    let ref_values = reference.reg_values();
    let cloud = reference.cloud();
    match &s {
        None => {
            out.push_str("value,defined\n");
            for (i, v) in ref_values.iter().enumerate() {
                push_point(&mut out, cloud.point(i));
                out.push_str(&format!("{},{}\n", opt(*v), u8::from(v.is_some())));
            }
            emit(ctx, a.out.as_deref(), out.as_bytes())?;
            let defined = ref_values.iter().filter(|v| v.is_some()).count();
            summary(
                ctx,
                json!({
                    "n_queries": cloud.len(),
                    "defined_count": defined,
                    "query_time_ms": reference.query_time_ms(),
                }),
                || format!("{} queries, {defined} defined", cloud.len()),
            )
        }
        Some(cs) => {
            let m = reference.measure(cs.data())?;
            let report = reference.report(&m, cloud.len())?;
            out.push_str("value,defined,reference,reference_defined\n");
            for (i, (v, r)) in m.reg_values().iter().zip(&ref_values).enumerate() {
                push_point(&mut out, cloud.point(i));
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    opt(*v),
                    u8::from(v.is_some()),
                    opt(*r),
                    u8::from(r.is_some())
                ));
            }
            emit(ctx, a.out.as_deref(), out.as_bytes())?;
            summary(ctx, serde_json::to_value(&report)?, || {
                format!(
                    "linf {} (normalized {}) over {} admissible queries, {} skipped",
                    format_f64(report.linf),
                    format_f64(report.linf_normalized),
                    report.admissible_count,
                    report.skipped_count
                )
            })
        }
    }
}

fn push_point(out: &mut String, q: &[f64]) {
    for &v in q {
        out.push_str(&format_f64(v));
        out.push(',');
    }
}

fn eval_config(
    p: &Dataset,
    kernel: GaussianKernel,
    n_points: Option<usize>,
    ca: &crate::args::CloudArgs,
    seed: u64,
) -> EvalConfig {
    let mut cfg = EvalConfig::new(kernel, p.dim());
    if let Some(n) = n_points {
        cfg.n_points = n;
    }
    cfg.rho = ca.rho;
    cfg.margin = ca.margin;
    cfg.seed = seed;
    cfg
}

fn metric(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format_f64(v)
    }
}

fn error_field(e: &Option<String>) -> String {
    match e {
        None => String::new(),
        Some(e) => format!("\"{}\"", e.replace('"', "'")),
    }
}

fn bench(ctx: &Ctx, a: BenchArgs) -> Result<()> {
    let p = load(&a.input)?.dataset;
    let kernel = GaussianKernel::new(a.sigma, a.kernel_form)?;
    let cfg = eval_config(&p, kernel, a.n_points, &a.cloud, ctx.seed);
    let rows = eval::bench(&p, &a.methods, &a.sizes, &cfg)?;
    let mut out = String::from(
        "method,size,coreset_len,build_ms,query_p_ms,query_s_ms,linf,linf_normalized,error\n",
    );
    for r in &rows {
        out.push_str(&bench_line(r));
    }
    emit(ctx, a.out.as_deref(), out.as_bytes())?;
    summary(ctx, serde_json::to_value(&rows)?, || {
        format!("{} bench rows", rows.len())
    })
}

fn bench_line(r: &BenchRow) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{}\n",
        r.method.short_name(),
        r.size,
        r.coreset_len,
        metric(r.build_time_ms),
        metric(r.query_time_p_ms),
        metric(r.query_time_s_ms),
        metric(r.linf),
        metric(r.linf_normalized),
        error_field(&r.error)
    )
}

fn sweep(ctx: &Ctx, a: SweepArgs) -> Result<()> {
    let p = load(&a.input)?.dataset;
    let first = *a.sigmas.first().expect("clap requires --sigmas");
    let mut cfg = eval_config(
        &p,
        GaussianKernel::new(first, a.kernel_form)?,
        a.n_points,
        &a.cloud,
        ctx.seed,
    );
    cfg.truncation = a.truncate;
    cfg.repetitions = a.repetitions;
    let spec = SweepSpec {
        methods: a.methods.clone(),
        sizes: a.sizes.clone(),
        sigmas: a.sigmas.clone(),
        form: a.kernel_form,
    };
    let rows = eval::sweep(&p, &spec, &cfg)?;
    let mut out = String::from(
        "method,size,sigma,rep,coreset_len,linf,linf_normalized,build_ms,query_s_ms,error\n",
    );
    for r in &rows {
        out.push_str(&sweep_line(r));
    }
    emit(ctx, a.out.as_deref(), out.as_bytes())?;
    summary(ctx, serde_json::to_value(&rows)?, || {
        format!("{} sweep rows", rows.len())
    })
}

fn sweep_line(r: &SweepRow) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{}\n",
        r.method.short_name(),
        r.size,
        format_f64(r.sigma),
        r.rep.map_or_else(|| "mean".to_string(), |k| k.to_string()),
        r.coreset_len,
        metric(r.linf),
        metric(r.linf_normalized),
        metric(r.build_time_ms),
        metric(r.query_time_s_ms),
        error_field(&r.error)
    )
}

fn progressive(ctx: &Ctx, a: ProgressiveArgs) -> Result<()> {
    let p = load(&a.input)?.dataset;
    if p.dim() != 1 {
        return usage("the progressive scheme needs exactly one x column");
    }
    let spec = progressive_spec(&a.params)?;
    let now = a.now.unwrap_or(p.extent().max[0]);
    let keep: Vec<usize> = (0..p.len()).filter(|&i| p.x(i)[0] <= now).collect();
    if keep.is_empty() {
        anyhow::bail!(kreg_core::Error::EmptyDataset);
    }
    let kept = p.select(&keep)?;
    let shifted = Dataset::from_columns(
        1,
        kept.coords().iter().map(|x| x - now).collect(),
        kept.ys().to_vec(),
        kept.ws().to_vec(),
    )?;
    let layout = spec.layout_for(&shifted)?;
    let cs = coreset::progressive_g_aggregate(&shifted, &spec)?;
    emit(ctx, a.out.as_deref(), &coreset_bytes(&cs)?)?;
    let regions: Vec<serde_json::Value> = layout
        .iter()
        .map(|r| json!({ "left": r.left, "right": r.right, "gamma": r.gamma, "cells": r.cells }))
        .collect();
    let mut info = coreset_json(&cs);
    info["now"] = json!(now);
    info["window"] = json!(-layout.last().map_or(0.0, |r| r.left));
    info["cells_per_region"] = json!(spec.cells_per_region());
    info["regions"] = json!(regions);
    summary(ctx, info, || {
        format!(
            "{} regions of {} cells, {} points from {}",
            layout.len(),
            spec.cells_per_region(),
            cs.len(),
            shifted.len()
        )
    })
}
