//! `opmeter` — command-line driver for the toggle-to-power toolkit.
//!
//! Subcommands cover the whole flow: synthesize benchmark data, extract
//! toggles from a waveform, train a sparse power model, evaluate it,
//! quantize it into a fixed-point meter, simulate that meter bit-exactly,
//! and summarize a run directory. Exit codes: 0 success, 2 bad
//! arguments/configuration, 3 unreadable or inconsistent data, 4 internal
//! error.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use opmeter_core::Error;

use config::{PenaltyKind, ProfileKind};
use opmeter_core::trace::GateConvention;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum GateConventionArg {
    /// Enable gates the clock edge of the same cycle.
    SameCycle,
    /// Enable takes effect one cycle later.
    Delayed,
}

impl From<GateConventionArg> for GateConvention {
    fn from(a: GateConventionArg) -> GateConvention {
        match a {
            GateConventionArg::SameCycle => GateConvention::SameCycle,
            GateConventionArg::Delayed => GateConvention::Delayed,
        }
    }
}

#[derive(Parser)]
#[command(name = "opmeter", version, about = "Sparse toggle-proxy power models and a fixed-point on-chip power meter simulator", max_term_width = 100)]
struct Cli {
    /// Cap worker threads for parallel sections (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic design, workload, and power labels.
    Synth(SynthArgs),
    /// Extract per-cycle toggles from a VCD waveform into a packed trace.
    Extract(ExtractArgs),
    /// Select proxies and train a power model from a labeled trace.
    Train(TrainArgs),
    /// Evaluate a model against a labeled trace.
    Eval(EvalArgs),
    /// Quantize a model's weights into a fixed-point meter description.
    Quantize(QuantizeArgs),
    /// Simulate the fixed-point meter bit-exactly over a trace.
    OpmSim(OpmSimArgs),
    /// Summarize the artifacts of a run directory as Markdown.
    Report(ReportArgs),
}

#[derive(clap::Args)]
struct SynthArgs {
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Base RNG seed (workload and noise seeds derive from it).
    #[arg(long)]
    seed: Option<u64>,
    /// JSON config file; flags override its values.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Total signal count.
    #[arg(long)]
    signals: Option<usize>,
    /// Number of signals that truly contribute power.
    #[arg(long)]
    contributors: Option<usize>,
    /// Number of correlation clusters.
    #[arg(long)]
    clusters: Option<usize>,
    /// Within-cluster latent copy probability in [0, 1].
    #[arg(long)]
    rho: Option<f64>,
    /// Trace length in cycles.
    #[arg(long)]
    cycles: Option<usize>,
    /// Workload shape.
    #[arg(long, value_enum)]
    profile: Option<ProfileKind>,
    /// Label noise as a fraction of mean power.
    #[arg(long)]
    noise: Option<f64>,
}

#[derive(clap::Args)]
struct ExtractArgs {
    /// Input VCD waveform.
    #[arg(long, value_name = "FILE")]
    vcd: PathBuf,
    /// Clock signal (full dotted path, or a unique leaf name).
    #[arg(long, value_name = "NAME")]
    clock: String,
    /// Expected clock period in VCD time units; checked when given.
    #[arg(long)]
    period: Option<u64>,
    /// Optional per-cycle power file (one value per line) to embed.
    #[arg(long, value_name = "FILE")]
    power: Option<PathBuf>,
    /// How a gated clock's enable aligns with the clock edge.
    #[arg(long, value_enum, default_value = "same-cycle")]
    gate_convention: GateConventionArg,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(clap::Args)]
struct TrainArgs {
    /// Labeled packed trace (must contain a power block).
    #[arg(long, value_name = "FILE")]
    trace: PathBuf,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// JSON config file; flags override its values.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Requested proxy count.
    #[arg(long)]
    target_q: Option<usize>,
    /// Acceptable deviation from the target (default: target/10, min 1).
    #[arg(long)]
    slack: Option<usize>,
    /// Concavity knee of the selection penalty (> 1).
    #[arg(long)]
    gamma: Option<f64>,
    /// Training interval in cycles; 1 trains per-cycle.
    #[arg(long)]
    tau: Option<usize>,
    /// Selection penalty.
    #[arg(long, value_enum)]
    penalty: Option<PenaltyKind>,
    /// Hold-out fraction for strength selection; 0 disables.
    #[arg(long)]
    validation_frac: Option<f64>,
}

#[derive(clap::Args)]
struct EvalArgs {
    /// Labeled packed trace (must contain a power block).
    #[arg(long, value_name = "FILE")]
    trace: PathBuf,
    /// Trained model JSON.
    #[arg(long, value_name = "FILE")]
    model: PathBuf,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// JSON config file; flags override its values.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Window sizes (power of two); repeatable.
    #[arg(long = "window", value_name = "T")]
    windows: Vec<usize>,
}

#[derive(clap::Args)]
struct QuantizeArgs {
    /// Trained model JSON.
    #[arg(long, value_name = "FILE")]
    model: PathBuf,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// JSON config file; flags override its values.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Weight register width in bits.
    #[arg(long)]
    bits: Option<u32>,
    /// Averaging window in cycles (power of two).
    #[arg(long)]
    window: Option<usize>,
}

#[derive(clap::Args)]
struct OpmSimArgs {
    /// Meter description JSON produced by `quantize`.
    #[arg(long, value_name = "FILE")]
    opm: PathBuf,
    /// Packed trace with the full signal set the model was trained on.
    #[arg(long, value_name = "FILE")]
    trace: PathBuf,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(clap::Args)]
struct ReportArgs {
    /// Directory holding artifacts from earlier subcommands.
    #[arg(long, value_name = "DIR")]
    dir: PathBuf,
    /// Output directory (default: the artifact directory itself).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Param(_) => 2,
        Error::Data(_) | Error::Parse { .. } | Error::Format(_) | Error::Io(_) => 3,
        Error::Internal(_) => 4,
    }
}

fn run(command: Command) -> opmeter_core::Result<()> {
    match command {
        Command::Synth(args) => commands::synth::run(args),
        Command::Extract(args) => commands::extract::run(args),
        Command::Train(args) => commands::train::run(args),
        Command::Eval(args) => commands::eval::run(args),
        Command::Quantize(args) => commands::quantize::run(args),
        Command::OpmSim(args) => commands::opm_sim::run(args),
        Command::Report(args) => commands::report::run(args),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { 2 } else { 0 };
            let _ = err.print();
            std::process::exit(code);
        }
    };
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be at least 1");
            std::process::exit(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: cannot size the thread pool: {e}");
            std::process::exit(4);
        }
    }
    if let Err(err) = run(cli.command) {
        eprintln!("error: {err}");
        std::process::exit(exit_code(&err));
    }
}
