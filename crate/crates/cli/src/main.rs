use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use percwalk_cli::{run, ConfigError, Experiment, ExperimentConfig, RunError};

#[derive(Parser)]
#[command(name = "percwalk", version, about = "Random walks dragging percolation clusters")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Per-replica R_n, L_n, U_n as CSV.
    Simulate(Flags),
    /// c_p estimates over a grid of p.
    CpScan(Flags),
    /// Inner boundary of the range on Z or Z^2.
    Boundary(Flags),
    /// Variance of U_n across scales.
    Variance(Flags),
    /// Laplace transforms of U_n.
    Laplace(Flags),
    /// Volume of the walk sausage of a finite set.
    Sausage(Flags),
    /// Intersection of two unions sharing one configuration.
    Intersect(Flags),
    /// Window rates on the alternating-shell graph.
    Fluctuate(Flags),
    /// Anchor hitting times on the hairy half-line.
    HairyDemo(Flags),
    /// Exact E[U_n] on a small box against Monte Carlo.
    OracleCheck(Flags),
    /// Capacity of a finite set.
    Capacity(Flags),
}

/// Every flag mirrors the config key of the same name (dashes for underscores).
#[derive(Args, Default)]
struct Flags {
    /// Config file of `key = value` lines; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write the resolved config here and continue.
    #[arg(long)]
    dump_config: Option<PathBuf>,
    #[arg(long)]
    graph: Option<String>,
    #[arg(long)]
    p: Option<String>,
    #[arg(long)]
    p_values: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    n_values: Option<String>,
    #[arg(long)]
    replicas: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    escape_radius: Option<String>,
    #[arg(long)]
    cluster_cap: Option<String>,
    #[arg(long)]
    walks: Option<String>,
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    theta: Option<String>,
    #[arg(long)]
    transform: Option<String>,
    #[arg(long)]
    shells: Option<String>,
    #[arg(long)]
    windows: Option<String>,
    #[arg(long)]
    reference_replicas: Option<String>,
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    repeats: Option<String>,
    #[arg(long)]
    radii: Option<String>,
    #[arg(long)]
    set: Option<String>,
    #[arg(long)]
    box_radius: Option<String>,
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    trace_out: Option<String>,
    #[arg(long)]
    format: Option<String>,
}

impl Flags {
    fn overrides(&self) -> Vec<(&'static str, &String)> {
        let all = [
            ("graph", &self.graph),
            ("p", &self.p),
            ("p_values", &self.p_values),
            ("n", &self.n),
            ("n_values", &self.n_values),
            ("replicas", &self.replicas),
            ("seed", &self.seed),
            ("escape_radius", &self.escape_radius),
            ("cluster_cap", &self.cluster_cap),
            ("walks", &self.walks),
            ("method", &self.method),
            ("theta", &self.theta),
            ("transform", &self.transform),
            ("shells", &self.shells),
            ("windows", &self.windows),
            ("reference_replicas", &self.reference_replicas),
            ("mode", &self.mode),
            ("k", &self.k),
            ("repeats", &self.repeats),
            ("radii", &self.radii),
            ("set", &self.set),
            ("box_radius", &self.box_radius),
            ("out", &self.out),
            ("trace_out", &self.trace_out),
            ("format", &self.format),
        ];
        all.into_iter().filter_map(|(k, v)| v.as_ref().map(|v| (k, v))).collect()
    }
}

fn resolve(experiment: Experiment, flags: &Flags) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = match &flags.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::new(experiment),
    };
    cfg.experiment = experiment;
    for (k, v) in flags.overrides() {
        cfg.set(k, v).map_err(|e| match e {
            ConfigError::Field { message, .. } => ConfigError::Field { field: format!("--{}", k.replace('_', "-")), message },
            other => other,
        })?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_file(path: &Path, text: &str) -> Result<(), RunError> {
    std::fs::write(path, text).map_err(|e| RunError::Io { path: path.display().to_string(), message: e.to_string() })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (experiment, flags) = match &cli.command {
        Command::Simulate(f) => (Experiment::Simulate, f),
        Command::CpScan(f) => (Experiment::CpScan, f),
        Command::Boundary(f) => (Experiment::Boundary, f),
        Command::Variance(f) => (Experiment::Variance, f),
        Command::Laplace(f) => (Experiment::Laplace, f),
        Command::Sausage(f) => (Experiment::Sausage, f),
        Command::Intersect(f) => (Experiment::Intersect, f),
        Command::Fluctuate(f) => (Experiment::Fluctuate, f),
        Command::HairyDemo(f) => (Experiment::HairyDemo, f),
        Command::OracleCheck(f) => (Experiment::OracleCheck, f),
        Command::Capacity(f) => (Experiment::Capacity, f),
    };
    let cfg = match resolve(experiment, flags) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    percwalk::parallel::configure_threads_from_env();
    let result = (|| -> Result<(), RunError> {
        if let Some(path) = &flags.dump_config {
            write_file(path, &cfg.to_string())?;
        }
        let art = run(&cfg)?;
        for w in &art.report.warnings {
            eprintln!("warning: {w}");
        }
        match &cfg.out {
            Some(path) => write_file(path, &art.primary)?,
            None => {
                let mut out = std::io::stdout().lock();
                let _ = out.write_all(art.primary.as_bytes());
            }
        }
        if let (Some(path), Some(trace)) = (&cfg.trace_out, &art.trace) {
            write_file(path, trace)?;
        }
        Ok(())
    })();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ RunError::Config(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
