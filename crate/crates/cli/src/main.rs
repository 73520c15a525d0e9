use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use glsphere::gl::quartic_barycenter;
use glsphere_cli::config::{ExperimentConfig, InitialData, OutputFormat, SnapshotFamily};
use glsphere_cli::experiments::{self, StepRecordRow};
use glsphere_cli::snapshot;
use glsphere_cli::table::{float, write_table};
use glsphere_cli::{CliError, Result};

#[derive(Parser)]
#[command(name = "glsphere", version, about = "Ginzburg–Landau experiments on the two-sphere")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every closed-form identity suite and print a pass/fail table.
    VerifyIdentities(Common),
    /// Flow and refine perturbed data over (ε, seed) and check rigidity.
    RigiditySweep(Common),
    /// Tabulate the second variation at the critical rotation.
    Spectrum(Common),
    /// Write a field snapshot (rotation, dilation or a solve).
    Snapshot(Common),
    /// Solve once from perturbed data and write the trace.
    Solve(Common),
}

#[derive(Args, Clone, Default)]
struct Common {
    /// TOML configuration file (flags override its values).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    band_limit: Option<usize>,
    /// Repeatable; replaces the configured list.
    #[arg(long)]
    epsilon: Vec<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    perturb_amp: Option<f64>,
    #[arg(long)]
    perturb_lmax: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of seeds per ε.
    #[arg(long)]
    seeds: Option<u64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long, value_enum)]
    initial: Option<InitialData>,
    #[arg(long)]
    dilation_lambda: Option<f64>,
    #[arg(long, value_enum)]
    family: Option<SnapshotFamily>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
}

impl Common {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_toml_str(
                &std::fs::read_to_string(path)
                    .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?,
            )?,
            None => ExperimentConfig::default(),
        };
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f.clone() { cfg.$f = v; } )* };
        }
        set!(
            band_limit,
            gamma,
            perturb_amp,
            perturb_lmax,
            seed,
            seeds,
            tol,
            max_steps,
            initial,
            dilation_lambda,
            family,
            format
        );
        if self.dt.is_some() {
            cfg.dt = self.dt;
        }
        if self.out.is_some() {
            cfg.out = self.out.clone();
        }
        if !self.epsilon.is_empty() {
            cfg.epsilon = self.epsilon.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

/// Returns whether every scientific check passed.
fn run(cmd: Command) -> Result<bool> {
    match cmd {
        Command::VerifyIdentities(c) => {
            let cfg = c.resolve()?;
            let checks = experiments::verify_identities(&cfg)?;
            write_table(&checks, cfg.format, output(cfg.out.as_deref())?)?;
            let failed = checks.iter().filter(|c| !c.passed).count();
            eprintln!("{} checks, {failed} failed", checks.len());
            Ok(failed == 0)
        }
        Command::RigiditySweep(c) => {
            let cfg = c.resolve()?;
            cfg.validate_sweep()?;
            let (rows, summary) = experiments::rigidity_sweep(&cfg, |r| {
                eprintln!(
                    "eps={} seed={} converged={} residual={:.3e} aligned_h1={:.3e}{}",
                    r.epsilon,
                    r.seed,
                    r.converged,
                    r.residual,
                    r.aligned_h1,
                    if r.error.is_empty() { String::new() } else { format!(" error: {}", r.error) }
                )
            })?;
            write_table(&rows, cfg.format, output(cfg.out.as_deref())?)?;
            eprintln!(
                "rows={} converged={} admissible={} violations={} failed_rows={} grad_modulus_slope={}",
                summary.rows,
                summary.converged,
                summary.admissible,
                summary.violations,
                summary.failed_rows,
                float(summary.grad_modulus_slope)
            );
            Ok(summary.passed())
        }
        Command::Spectrum(c) => {
            let cfg = c.resolve()?;
            let (rows, summaries) = experiments::spectrum(&cfg)?;
            write_table(&rows, cfg.format, output(cfg.out.as_deref())?)?;
            for s in summaries {
                eprintln!(
                    "eps={} lambda0={} kernel_dimension={} nullity={} morse_index={} monopole={}",
                    s.epsilon,
                    float(s.lambda0),
                    s.kernel_dimension,
                    s.nullity,
                    s.morse_index,
                    float(s.monopole)
                );
            }
            Ok(true)
        }
        Command::Snapshot(c) => {
            let cfg = c.resolve()?;
            let path = cfg.out.clone().ok_or_else(|| CliError::Usage("snapshot requires --out".into()))?;
            let snap = experiments::snapshot_field(&cfg)?;
            snapshot::save(&path, &snap)?;
            let b = quartic_barycenter(&snap.field);
            eprintln!(
                "wrote {} (quartic barycenter {}, {}, {})",
                path.display(),
                float(b[0]),
                float(b[1]),
                float(b[2])
            );
            Ok(true)
        }
        Command::Solve(c) => {
            let cfg = c.resolve()?;
            let (_, trace) = experiments::solve_row(&cfg, cfg.epsilon[0], cfg.seed)?;
            let rows: Vec<StepRecordRow> = trace.records.iter().copied().map(StepRecordRow).collect();
            write_table(&rows, cfg.format, output(cfg.out.as_deref())?)?;
            eprintln!("outcome: {:?}", trace.outcome);
            Ok(trace.converged())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
