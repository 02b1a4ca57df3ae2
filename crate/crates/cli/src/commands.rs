use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use dynkc_core::workload::{
    aggregate, format_table, gen_random, load_points_csv, random_mix_trace, replay,
    replay_validated, sliding_window_trace, write_points_csv, CellAggregate, ReplayOptions,
    RunMetrics, TableMetric, Trace, ValidateOptions, QUERY_PROBABILITY,
};
use dynkc_core::{Engine, EnsembleConfig, Mode, PointRecord};
use rayon::prelude::*;

use crate::args::{
    AggregateArgs, EngineParams, GenerateArgs, PointSource, RunArgs, TraceKind, TraceParams,
    ValidateArgs,
};
use crate::ValidationFailed;

const SEED_ENV: &str = "DYNKC_SEED";

/// `DYNKC_SEED` wins over `--seed`.
fn effective_seed(flag: u64) -> Result<u64> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .with_context(|| format!("{SEED_ENV}=`{v}` is not an unsigned integer")),
        Err(std::env::VarError::NotPresent) => Ok(flag),
        Err(e) => Err(e).context(SEED_ENV),
    }
}

fn load_points(src: &PointSource, seed: u64) -> Result<Option<Vec<PointRecord>>> {
    if let Some(path) = &src.points {
        let pts = load_points_csv(path)?;
        log::info!(
            "loaded {} distinct points from {}",
            pts.len(),
            path.display()
        );
        return Ok(Some(pts));
    }
    if src.random {
        let pts = gen_random(src.seeds, src.per, src.variance, seed)?;
        log::info!("generated {} points with seed {seed}", pts.len());
        return Ok(Some(pts));
    }
    Ok(None)
}

fn build_trace(
    points: &[PointRecord],
    p: &TraceParams,
    kind: TraceKind,
    seed: u64,
) -> Result<Trace> {
    Ok(match kind {
        TraceKind::Sliding => sliding_window_trace(points, p.window, p.query_every, seed)?,
        TraceKind::Mix => {
            random_mix_trace(points, p.delete_frac, QUERY_PROBABILITY, seed, p.max_events)?
        }
    })
}

/// The trace to replay plus a label naming it.
fn obtain_trace(
    src: &PointSource,
    params: &TraceParams,
    file: Option<&Path>,
    seed: u64,
) -> Result<(Trace, String)> {
    if let Some(path) = file {
        let trace = Trace::load(path)?;
        let label = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "trace".into());
        return Ok((trace, label));
    }
    let Some(points) = load_points(src, seed)? else {
        bail!("no input: pass --trace-file, --points or --random");
    };
    let kind = params.trace.unwrap_or(TraceKind::Sliding);
    let trace = build_trace(&points, params, kind, seed)?;
    let origin = match &src.points {
        Some(p) => p
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
        None => format!("random{}x{}", src.seeds, src.per),
    };
    let kind = match kind {
        TraceKind::Sliding => format!("sliding-w{}", params.window),
        TraceKind::Mix => format!("mix-d{}", params.delete_frac),
    };
    Ok((trace, format!("{origin}-{kind}-s{seed}")))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn check_engine_params(p: &EngineParams) -> Result<()> {
    if p.epsilon.is_empty() || p.epsilon.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
        bail!("--epsilon values must be positive");
    }
    if p.k.is_empty() || p.k.contains(&0) {
        bail!("--k values must be at least 1");
    }
    Ok(())
}

pub fn generate(args: GenerateArgs) -> Result<()> {
    let seed = effective_seed(args.source.seed)?;
    if !args.source.random && args.trace.trace.is_none() {
        bail!("nothing to generate: pass --random and/or --trace");
    }
    let Some(points) = load_points(&args.source, seed)? else {
        bail!("--trace needs points: pass --points or --random");
    };
    create_dir(&args.out)?;
    println!("seed {seed}");
    if args.source.random {
        let path = args.out.join("points.csv");
        write_points_csv(&path, &points)?;
        println!("wrote {} points to {}", points.len(), path.display());
    }
    if let Some(kind) = args.trace.trace {
        let trace = build_trace(&points, &args.trace, kind, seed)?;
        let path = args.out.join("trace.txt");
        trace.save(&path)?;
        let s = trace.stats();
        println!(
            "wrote trace to {}: {} inserts, {} deletes, {} queries",
            path.display(),
            s.inserts,
            s.deletes,
            s.queries
        );
    }
    Ok(())
}

fn run_file_name(m: &RunMetrics) -> String {
    let c = &m.config;
    format!("{}_eps{}_k{}_r{}.json", c.mode, c.epsilon, c.k, c.repeat)
}

fn print_tables(cells: &[CellAggregate], out: &Path) -> Result<()> {
    let mut text = String::new();
    for mode in [Mode::List, Mode::Tree] {
        if !cells.iter().any(|c| c.mode == mode) {
            continue;
        }
        let mut metrics = vec![TableMetric::EngineMillis, TableMetric::UpdateMicros];
        if cells.iter().any(|c| c.speedup.is_some()) {
            metrics.extend([TableMetric::Speedup, TableMetric::PhiRatio]);
        }
        for metric in metrics {
            text.push_str(&format_table(cells, metric, mode));
            text.push('\n');
        }
    }
    print!("{text}");
    let path = out.join("tables.md");
    fs::write(&path, &text).with_context(|| format!("writing {}", path.display()))
}

pub fn run(args: RunArgs) -> Result<()> {
    check_engine_params(&args.engine)?;
    if args.repeats == 0 || args.jobs == 0 {
        bail!("--repeats and --jobs must be at least 1");
    }
    let seed = effective_seed(args.source.seed)?;
    let (trace, instance) =
        obtain_trace(&args.source, &args.trace, args.trace_file.as_deref(), seed)?;
    trace.check()?;
    let runs_dir = args.out.join("runs");
    create_dir(&runs_dir)?;

    let mode: Mode = args.engine.mode.into();
    let mut cells = Vec::new();
    for &eps in &args.engine.epsilon {
        match EnsembleConfig::derive(eps, args.engine.psi, mode) {
            Ok(cfg) => {
                log::info!(
                    "eps={eps}: alpha={:.4} m={} ratio={:.4}",
                    cfg.alpha,
                    cfg.m,
                    cfg.ratio()
                );
                for &k in &args.engine.k {
                    for r in 0..args.repeats {
                        cells.push((cfg, k, r));
                    }
                }
            }
            Err(e) => log::error!("skipping eps={eps}: {e}"),
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs)
        .build()
        .context("starting worker pool")?;
    let sequential_cells = args.jobs == 1;
    let results: Vec<Result<RunMetrics>> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(cfg, k, repeat)| {
                let mut engine = Engine::with_config(cfg)?;
                engine.set_parallel(sequential_cells);
                let opts = ReplayOptions {
                    instance: instance.clone(),
                    repeat,
                    compare_gonzalez: args.compare_gonzalez,
                };
                let m = replay(&trace, &mut engine, k, &opts)
                    .with_context(|| format!("eps={} k={k} repeat={repeat}", cfg.epsilon))?;
                log::info!(
                    "eps={} k={k} repeat={repeat}: {:.1} ms",
                    cfg.epsilon,
                    m.engine_ns() as f64 / 1e6
                );
                Ok(m)
            })
            .collect()
    });
    let mut runs = Vec::with_capacity(results.len());
    for r in results {
        let m = r?;
        write_json(&runs_dir.join(run_file_name(&m)), &m)?;
        runs.push(m);
    }
    let cells = aggregate(&runs);
    write_json(&args.out.join("aggregate.json"), &cells)?;
    print_tables(&cells, &args.out)
}

pub fn aggregate_runs(args: AggregateArgs) -> Result<()> {
    let mut paths: Vec<PathBuf> = fs::read_dir(&args.runs)
        .with_context(|| format!("reading {}", args.runs.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()
        .with_context(|| format!("reading {}", args.runs.display()))?;
    paths.retain(|p| p.extension().is_some_and(|e| e == "json"));
    paths.sort();
    let mut runs = Vec::with_capacity(paths.len());
    for p in &paths {
        let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        let m: RunMetrics =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
        runs.push(m);
    }
    let cells = aggregate(&runs);
    create_dir(&args.out)?;
    write_json(&args.out.join("aggregate.json"), &cells)?;
    print_tables(&cells, &args.out)
}

pub fn validate(args: ValidateArgs) -> Result<()> {
    check_engine_params(&args.engine)?;
    let seed = effective_seed(args.source.seed)?;
    let (trace, label) = obtain_trace(&args.source, &args.trace, args.trace_file.as_deref(), seed)?;
    let mode: Mode = args.engine.mode.into();
    let opts = ValidateOptions {
        every: args.every,
        ks: args.engine.k.clone(),
        inject_fault_at: args.inject_fault,
    };
    let mut failed = false;
    for &eps in &args.engine.epsilon {
        let cfg = EnsembleConfig::derive(eps, args.engine.psi, mode)?;
        let mut engine = Engine::with_config(cfg)?;
        match replay_validated(&trace, &mut engine, &opts)? {
            None => println!(
                "{label} eps={eps} mode={mode} m={}: {} events, no violations",
                cfg.m,
                trace.events.len()
            ),
            Some(f) => {
                failed = true;
                println!(
                    "{label} eps={eps} mode={mode}: FAILED after event {}: {}",
                    f.event_index, f.detail
                );
                for (p, report) in &f.nets {
                    for v in &report.violations {
                        println!("  net {p}: {v}");
                    }
                }
            }
        }
    }
    if failed {
        return Err(ValidationFailed.into());
    }
    Ok(())
}
