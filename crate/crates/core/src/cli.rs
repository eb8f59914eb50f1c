//! The `nngp` command-line tool.
//!
//! Exit codes: 0 on success, 1 for configuration or usage errors, 2 for
//! numerical failures, 3 for I/O failures. Progress goes to standard error;
//! data goes to `--out` (plus a `.json` sidecar) or to standard output.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::{parse_config, Command, Overrides, RunConfig};
use crate::error::{Error, Result};
use crate::experiments::{
    convergence_study, kernel_report_with_trials, simulate_study, tightness_study, universality_study,
};
use crate::network::{sample_ensemble, InputSet};
use crate::report::{sidecar_path, write_atomic, write_report, ConvergenceReport};

#[derive(Debug, Parser)]
#[command(
    name = "nngp",
    version,
    about = "Infinite-width NNGP kernels and finite-width convergence studies"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Layerwise kernel tables K^(2)..K^(L+1) over the inputs.
    Kernel(Shared),
    /// Sample networks across a width ladder and compare second moments with the kernel.
    Simulate(Shared),
    /// Convergence of the output law to N(0, K^(L+1)) along a width ladder.
    Converge(Shared),
    /// Gaps between weight laws in layers >= 2 along a width ladder.
    Universality(Shared),
    /// Stability of empirical Lipschitz ratios over a grid across widths.
    Tightness(Shared),
}

#[derive(Debug, Args)]
struct Shared {
    /// JSON run configuration.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Input CSV (one row per input, n_0 columns, optional leading label column).
    #[arg(long, value_name = "PATH")]
    inputs: Option<PathBuf>,
    /// Output CSV; a `<PATH>.json` sidecar is written next to it.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Master seed.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Worker threads (1 gives bit-stable single-threaded runs).
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
    /// Gauss-Hermite order for the kernel recursion.
    #[arg(long, value_name = "N")]
    quad_order: Option<usize>,
}

impl Cmd {
    fn split(self) -> (Command, Shared) {
        match self {
            Cmd::Kernel(s) => (Command::Kernel, s),
            Cmd::Simulate(s) => (Command::Simulate, s),
            Cmd::Converge(s) => (Command::Converge, s),
            Cmd::Universality(s) => (Command::Universality, s),
            Cmd::Tightness(s) => (Command::Tightness, s),
        }
    }
}

/// Parse `argv` (including the program name), run, and return the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let (command, shared) = cli.command.split();
    match execute(command, shared) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(command: Command, shared: Shared) -> Result<()> {
    let overrides = Overrides {
        command: Some(command),
        inputs: shared.inputs,
        out: shared.out,
        seed: shared.seed,
        threads: shared.threads,
        quad_order: shared.quad_order,
    };
    let cfg = parse_config(&shared.config)?.apply(&overrides)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Validation(format!("cannot start {:?} worker threads: {e}", cfg.threads)))?;
    eprintln!(
        "nngp {command}: config {} (hash {}), seed {}, {} thread(s)",
        shared.config.display(),
        cfg.network.hash(),
        cfg.seed,
        pool.current_num_threads()
    );
    let started = Instant::now();
    pool.install(|| dispatch(command, &cfg))?;
    eprintln!("nngp {command}: done in {:.1?}", started.elapsed());
    Ok(())
}

fn dispatch(command: Command, cfg: &RunConfig) -> Result<()> {
    match command {
        Command::Kernel => {
            let inputs = cfg.load_inputs()?;
            let rep = kernel_report_with_trials(&cfg.network, &inputs, cfg.quad_order, cfg.kernel.mc_trials, cfg.seed)?;
            for layer in &rep.layers {
                eprintln!(
                    "  K^({}) via {}, smallest eigenvalue {:.3e}",
                    layer.kernel.layer(),
                    layer.provenance,
                    layer.kernel.min_eigenvalue()
                );
            }
            emit_table(cfg, &inputs, "kernel", &rep.to_csv())
        }
        Command::Simulate => {
            let inputs = cfg.load_inputs()?;
            let ladder = cfg.simulate_ladder()?;
            log_ladder("simulate", &ladder.widths, ladder.trials);
            let rep = simulate_study(&cfg.network, &inputs, &ladder, cfg.seed, &cfg.simulate_options())?;
            if let Some(path) = &cfg.simulate.save_ensemble {
                let net = cfg.network.with_hidden_width(ladder.first());
                let layers = cfg.simulate.layers.clone().unwrap_or_else(|| vec![net.output_layer()]);
                let ens = sample_ensemble(&net, &inputs, ladder.trials, &layers, cfg.seed, cfg.simulate.storage_cap)?;
                ens.save(path, &net, &inputs)?;
                eprintln!("  ensemble at width {} written to {}", ladder.first(), path.display());
            }
            emit_report(cfg, Some(&inputs), &rep)
        }
        Command::Converge => {
            let inputs = cfg.load_inputs()?;
            let ladder = cfg.converge_ladder()?;
            log_ladder("converge", &ladder.widths, ladder.trials);
            let rep = convergence_study(&cfg.network, &inputs, &ladder, cfg.seed, &cfg.converge_options())?;
            emit_report(cfg, Some(&inputs), &rep)
        }
        Command::Universality => {
            let inputs = cfg.load_inputs()?;
            let ladder = cfg.universality_ladder()?;
            log_ladder("universality", &ladder.widths, ladder.trials);
            let rep = universality_study(&cfg.network, &inputs, &ladder, cfg.seed, &cfg.universality_options())?;
            emit_report(cfg, Some(&inputs), &rep)
        }
        Command::Tightness => {
            let grid = cfg.tightness.grid.build()?;
            log_ladder("tightness", &cfg.tightness.widths, cfg.tightness.draws);
            let rep = tightness_study(&cfg.network, &grid, &cfg.tightness_options(), cfg.seed)?;
            emit_report(cfg, None, &rep)
        }
    }
}

fn log_ladder(study: &str, widths: &[usize], trials: usize) {
    eprintln!("  {study}: widths {widths:?}, {trials} trials per width");
}

fn emit_report(cfg: &RunConfig, inputs: Option<&InputSet>, rep: &ConvergenceReport) -> Result<()> {
    for c in &rep.checks {
        eprintln!("  [{}] {}: {}", if c.passed { "pass" } else { "FAIL" }, c.name, c.detail);
    }
    for s in &rep.slopes {
        eprintln!(
            "  slope {} {}: {:.3} ± {:.3} (95% CI {:.3}..{:.3})",
            s.arm, s.metric, s.fit.slope, s.fit.se, s.fit.ci.0, s.fit.ci.1
        );
    }
    for d in &rep.degenerate {
        eprintln!("  note: {d}");
    }
    match &cfg.out {
        Some(path) => {
            write_report(rep, &cfg.resolved(inputs), path)?;
            eprintln!("  report written to {}", path.display());
            Ok(())
        }
        None => write_stdout(&rep.to_csv()),
    }
}

#[derive(Serialize)]
struct TableSidecar<'a> {
    study: &'a str,
    config_hash: String,
    seed: u64,
    config: serde_json::Value,
}

fn emit_table(cfg: &RunConfig, inputs: &InputSet, study: &str, csv: &str) -> Result<()> {
    match &cfg.out {
        Some(path) => {
            write_atomic(path, csv.as_bytes())?;
            let side = TableSidecar {
                study,
                config_hash: cfg.network.hash(),
                seed: cfg.seed,
                config: cfg.resolved(Some(inputs)),
            };
            let json = serde_json::to_string_pretty(&side).expect("sidecar serializes");
            write_atomic(&sidecar_path(path), json.as_bytes())?;
            eprintln!("  table written to {}", path.display());
            Ok(())
        }
        None => write_stdout(csv),
    }
}

fn write_stdout(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(Path::new("<stdout>"), e))
}
