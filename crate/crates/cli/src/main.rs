use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use chaosbench::experiments::{
    aggregate, now_millis, run_experiment, summarize, AggregateRow, ExperimentConfig, ExperimentKind, ResultRecord,
    METRICS,
};
use chaosbench::io::{
    ingest_pendulum, load_config, load_records, read_pendulum_csv, run_conformance, write_trajectory, PendulumConfig,
    RecordWriter, RunManifest, TrajectoryMeta, OUTPUT_DIR_ENV,
};
use chaosbench::systems::{
    annotate, generate_trajectory, sample_initial_conditions, AnnotationConfig, IntegratorConfig, Registry,
    POINTS_PER_LYAPUNOV,
};
use chaosbench::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_CONFORMANCE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "chaosbench",
    version,
    about = "Benchmark forecasters on chaotic dynamical systems"
)]
struct Cli {
    /// System registry (TOML); the built-in registry when omitted.
    #[arg(long, global = true)]
    registry: Option<PathBuf>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (TOML).
    config: PathBuf,
    /// Output directory for records.jsonl, manifest.json and summary.json.
    #[arg(long, env = OUTPUT_DIR_ENV)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Md,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write on-attractor trajectories as CSV with metadata sidecars.
    Integrate {
        system: String,
        #[arg(long, default_value_t = 1)]
        ics: usize,
        #[arg(long, default_value_t = 812)]
        length: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = POINTS_PER_LYAPUNOV)]
        granularity: usize,
        #[arg(long, env = OUTPUT_DIR_ENV)]
        out: PathBuf,
    },
    /// Measure Lyapunov exponents and correlation dimensions of registry systems.
    Annotate {
        /// Systems to annotate; all when omitted.
        systems: Vec<String>,
        /// Benettin orbit length in Lyapunov times.
        #[arg(long, default_value_t = 2000.0)]
        horizon: f64,
        /// Samples in the correlation-dimension orbit.
        #[arg(long, default_value_t = 50_000)]
        points: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the registry with the measured annotations to this TOML file.
        #[arg(long)]
        write: Option<PathBuf>,
    },
    /// Execute an experiment config.
    Run(RunArgs),
    /// Run a config as a k-gram shuffle experiment.
    ShuffleRun(RunArgs),
    /// Run a config as a nonstationarity experiment.
    NonstatRun(RunArgs),
    /// Run a config as a context-length sweep.
    ContextSweep(RunArgs),
    /// Run a config as an initial-condition dependence experiment.
    IcRun(RunArgs),
    /// Aggregate record files into a summary table.
    Report {
        #[arg(required = true)]
        records: Vec<PathBuf>,
        /// Comma-separated grouping keys (e.g. `system,model` or `model,kind_params.k`).
        #[arg(long, default_value = "model", value_delimiter = ',')]
        group_by: Vec<String>,
        #[arg(long, value_enum, default_value = "md")]
        format: Format,
        /// Also write the median per-horizon sMAPE curve of each group as CSV.
        #[arg(long)]
        curves: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Samples per Lyapunov time, for the curve time column.
        #[arg(long, default_value_t = POINTS_PER_LYAPUNOV)]
        granularity: usize,
    },
    /// Convert tracked double-pendulum centroids into a 4-channel trajectory CSV.
    IngestPendulum {
        csv: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Lyapunov time in seconds; the time column is in seconds when omitted.
        #[arg(long)]
        lyapunov_time: Option<f64>,
    },
    /// Handshake an adapter command and run the protocol conformance suite.
    ServeCheck {
        /// Adapter command and its arguments.
        #[arg(required = true, trailing_var_arg = true, allow_hyphen_values = true)]
        command: Vec<String>,
        /// Per-response timeout, seconds.
        #[arg(long, default_value_t = 30.0)]
        timeout: f64,
    },
}

fn registry(path: &Option<PathBuf>) -> anyhow::Result<Registry> {
    Ok(match path {
        Some(p) => Registry::load(p).with_context(|| format!("loading registry {}", p.display()))?,
        None => Registry::builtin(),
    })
}

fn integrate_cmd(
    reg: &Registry,
    system: &str,
    ics: usize,
    length: usize,
    seed: u64,
    granularity: usize,
    out: &Path,
) -> anyhow::Result<()> {
    let spec = reg.get(system)?;
    let cfg = IntegratorConfig::default();
    std::fs::create_dir_all(out)?;
    for (i, x0) in sample_initial_conditions(spec, ics, &cfg, seed)?.iter().enumerate() {
        let traj = generate_trajectory(spec, x0, length, granularity, &cfg)?.with_system(spec.name.clone());
        let meta = TrajectoryMeta {
            ic_index: Some(i),
            registry_checksum: Some(reg.checksum().into()),
            ..TrajectoryMeta::for_trajectory(&traj, seed)
        };
        let path = out.join(format!("{}_ic{i}.csv", spec.name));
        write_trajectory(&path, &traj, &meta)?;
        println!("{}", path.display());
    }
    Ok(())
}

fn annotate_cmd(reg: &Registry, names: &[String], cfg: &AnnotationConfig, write: Option<&Path>) -> anyhow::Result<()> {
    let integ = IntegratorConfig::default();
    let mut updated = Vec::new();
    println!("| system | lambda (registry) | lambda (measured) | se | d_frac (registry) | d_frac (measured) |");
    println!("|---|---|---|---|---|---|");
    for spec in reg.systems() {
        if !names.is_empty() && !names.iter().any(|n| n.eq_ignore_ascii_case(&spec.name)) {
            updated.push(spec.clone());
            continue;
        }
        let a = annotate(spec, &integ, cfg).with_context(|| format!("annotating {}", spec.name))?;
        println!(
            "| {} | {:.4} | {:.4} | {:.4} | {:.3} | {:.3} |",
            spec.name,
            spec.lyapunov_exponent,
            a.lyapunov_exponent,
            a.lyapunov_std_error,
            spec.reference_fractal_dim,
            a.fractal_dim
        );
        updated.push(spec.with_annotations(a.lyapunov_exponent, a.fractal_dim)?);
    }
    for n in names {
        reg.get(n)?;
    }
    if let Some(path) = write {
        std::fs::write(path, Registry::from_systems(updated)?.to_toml())?;
    }
    Ok(())
}

fn run_cmd(reg: &Registry, args: &RunArgs, kind: Option<ExperimentKind>) -> Result<(), Error> {
    let mut cfg: ExperimentConfig = load_config(&args.config)?;
    if let Some(k) = kind {
        cfg.experiment_kind = k;
        cfg.validate()
            .map_err(|e| Error::Config(format!("{}: invalid value: {e}", args.config.display())))?;
    }
    std::fs::create_dir_all(&args.out)?;
    let mut writer = RecordWriter::append(args.out.join("records.jsonl"))?;
    let started = now_millis();
    let mut records = Vec::new();
    let summary = run_experiment(&cfg, reg, &mut |r: &ResultRecord| {
        writer.write(r)?;
        records.push(r.clone());
        Ok(())
    })?;
    let finished = now_millis();
    RunManifest::new(&cfg, reg, started, finished, &summary).write(&args.out.join("manifest.json"))?;
    let stats = summarize(cfg.experiment_kind, &records, cfg.kind_params.permutations, cfg.seed);
    std::fs::write(args.out.join("summary.json"), serde_json::to_string_pretty(&stats)?)?;
    for (system, reason) in &summary.skipped_systems {
        eprintln!("skipped {system}: {reason}");
    }
    println!(
        "{} records ({} failed) written to {}",
        summary.records,
        summary.failures,
        args.out.display()
    );
    print!("{}", render(&stats.table, Format::Md));
    for (model, t) in &stats.trends {
        println!(
            "trend {model}: rho = {}",
            t.rho.map_or("undefined".into(), |r| format!("{r:.3}"))
        );
    }
    for (model, d) in &stats.ic_dependence {
        match (d.rho, d.p_value) {
            (Some(r), Some(p)) => println!(
                "ic dependence {model}: rho = {r:.3}, p = {p:.4}, pairs = {}",
                d.pairs.len()
            ),
            _ => println!(
                "ic dependence {model}: rho undefined (no rank variance), pairs = {}",
                d.pairs.len()
            ),
        }
    }
    Ok(())
}

fn fmt_num(v: f64) -> String {
    format!("{v:.4}")
}

/// Table with one row per group: counts, then median and standard error of each metric.
fn render(rows: &[AggregateRow], format: Format) -> String {
    let Some(first) = rows.first() else {
        return String::new();
    };
    let mut header: Vec<String> = first.group.iter().map(|(k, _)| k.clone()).collect();
    header.extend(["n_ok".into(), "n_failed".into()]);
    for m in METRICS {
        header.push(format!("{m}_median"));
        header.push(format!("{m}_se"));
    }
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut cells: Vec<String> = r.group.iter().map(|(_, v)| v.clone()).collect();
            cells.extend([r.n_ok.to_string(), r.n_failed.to_string()]);
            for m in METRICS {
                match r.get(m) {
                    Some(s) => cells.extend([fmt_num(s.median), fmt_num(s.se)]),
                    None => cells.extend([String::new(), String::new()]),
                }
            }
            cells
        })
        .collect();
    let mut out = String::new();
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(&header).expect("in-memory write");
            for row in &body {
                w.write_record(row).expect("in-memory write");
            }
            out = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8");
        }
        Format::Md => {
            out += &format!("| {} |\n", header.join(" | "));
            out += &format!("|{}\n", "---|".repeat(header.len()));
            for row in &body {
                out += &format!("| {} |\n", row.join(" | "));
            }
        }
    }
    out
}

fn report_cmd(
    records: &[PathBuf],
    keys: &[String],
    format: Format,
    curves: Option<&Path>,
    seed: u64,
    granularity: usize,
) -> anyhow::Result<()> {
    let mut all = Vec::new();
    for p in records {
        let loaded = load_records(p).with_context(|| format!("reading {}", p.display()))?;
        for c in &loaded.corrupt {
            eprintln!("{}: line {} unreadable: {}", p.display(), c.line, c.error);
        }
        if !loaded.corrupt.is_empty() {
            eprintln!("{}: {} corrupt line(s) skipped", p.display(), loaded.corrupt.len());
        }
        all.extend(loaded.records);
    }
    if all.is_empty() {
        bail!("no records to report");
    }
    let keys: Vec<&str> = keys.iter().map(String::as_str).collect();
    let rows = aggregate(&all, &keys, seed);
    if rows.is_empty() {
        bail!("no record carries all of the keys {keys:?}");
    }
    print!("{}", render(&rows, format));
    if let Some(path) = curves {
        let mut w = csv::Writer::from_path(path)?;
        let mut header: Vec<String> = keys.iter().map(|k| k.to_string()).collect();
        header.extend(["step".into(), "t_lyap".into(), "smape_median".into()]);
        w.write_record(&header)?;
        let dt = 1.0 / granularity.max(1) as f64;
        for r in &rows {
            for (t, v) in r.smape_curve.iter().enumerate() {
                let mut rec: Vec<String> = r.group.iter().map(|(_, v)| v.clone()).collect();
                rec.extend([(t + 1).to_string(), ((t + 1) as f64 * dt).to_string(), v.to_string()]);
                w.write_record(&rec)?;
            }
        }
        w.flush()?;
    }
    Ok(())
}

fn serve_check_cmd(command: &[String], timeout: f64) -> ExitCode {
    let report = run_conformance(command, Duration::from_secs_f64(timeout));
    let mut stdout = std::io::stdout().lock();
    if let Some(m) = &report.model_id {
        let _ = writeln!(stdout, "adapter model: {m}");
    }
    for c in &report.checks {
        let _ = writeln!(
            stdout,
            "{} {}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    if report.passed() {
        let _ = writeln!(stdout, "conformance: passed");
        ExitCode::SUCCESS
    } else {
        let _ = writeln!(stdout, "conformance: FAILED");
        ExitCode::from(EXIT_CONFORMANCE)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let reg = match registry(&cli.registry) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let kind_run = |args: &RunArgs, kind| match run_cmd(&reg, args, kind) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    };
    let result = match &cli.command {
        Cmd::Run(a) => return kind_run(a, None),
        Cmd::ShuffleRun(a) => return kind_run(a, Some(ExperimentKind::KgramShuffle)),
        Cmd::NonstatRun(a) => return kind_run(a, Some(ExperimentKind::Nonstationary)),
        Cmd::ContextSweep(a) => return kind_run(a, Some(ExperimentKind::ContextSweep)),
        Cmd::IcRun(a) => return kind_run(a, Some(ExperimentKind::IcDependence)),
        Cmd::ServeCheck { command, timeout } => return serve_check_cmd(command, *timeout),
        Cmd::Integrate {
            system,
            ics,
            length,
            seed,
            granularity,
            out,
        } => integrate_cmd(&reg, system, *ics, *length, *seed, *granularity, out),
        Cmd::Annotate {
            systems,
            horizon,
            points,
            seed,
            write,
        } => {
            let cfg = AnnotationConfig {
                lyapunov_horizon: *horizon,
                dimension_points: *points,
                seed: *seed,
            };
            annotate_cmd(&reg, systems, &cfg, write.as_deref())
        }
        Cmd::Report {
            records,
            group_by,
            format,
            curves,
            seed,
            granularity,
        } => report_cmd(records, group_by, *format, curves.as_deref(), *seed, *granularity),
        Cmd::IngestPendulum {
            csv,
            out,
            lyapunov_time,
        } => (|| {
            let frames = read_pendulum_csv(csv)?;
            let cfg = PendulumConfig {
                lyapunov_time: *lyapunov_time,
                ..Default::default()
            };
            let traj = ingest_pendulum(&frames, &cfg)?;
            write_trajectory(out, &traj, &TrajectoryMeta::for_trajectory(&traj, 0))?;
            println!("{} rows written to {}", traj.len(), out.display());
            Ok(())
        })(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
