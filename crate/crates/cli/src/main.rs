//! `cvdist`: command-line driver for the Gaussian toolkit.
//!
//! Exit codes: 0 success, 2 usage or parse error, 3 unphysical input,
//! 4 dimension mismatch, 5 claim violation (a verification failed or the
//! no-go bound was broken).

mod commands;
mod files;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub const DEFAULT_SEED: u64 = 1729;

#[derive(Parser, Debug)]
#[command(name = "cvdist", version, about = "Gaussian states, channels and distillation no-go checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build a Gaussian state and write it as JSON.
    State(StateArgs),
    /// Build or apply a Gaussian channel.
    #[command(subcommand)]
    Channel(ChannelCommand),
    /// Log-negativity and PPT test across a bipartition.
    Entanglement(EntanglementArgs),
    /// Verify deterministic implementation of a channel by Bell
    /// measurement and feed-forward.
    Fig1(Fig1Args),
    /// Run the two-copy distillation protocol for given local symplectics.
    Fig2(Fig2Args),
    /// Multi-start search for a two-copy protocol that increases
    /// log-negativity.
    Nogo(NogoArgs),
    /// Normal form of a pure three-mode state (two inputs, one output).
    Canon(CanonArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum StateKind {
    Vacuum,
    Tmsv,
    Thermal,
    CustomJson,
}

#[derive(Args, Debug)]
pub struct StateArgs {
    #[arg(long, value_enum)]
    pub kind: StateKind,
    /// Number of modes (vacuum).
    #[arg(long, default_value_t = 1)]
    pub modes: usize,
    /// Two-mode squeezing (tmsv).
    #[arg(long, default_value_t = 0.5)]
    pub r: f64,
    /// Comma-separated symplectic eigenvalues, one per mode (thermal).
    #[arg(long, value_delimiter = ',')]
    pub nu: Vec<f64>,
    /// State JSON to validate (custom-json).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChannelKind {
    /// Identity approximated by finitely squeezed EPR pairs.
    Identity,
    /// Single-mode filter with two-mode-squeezed-vacuum Choi state.
    Filter,
    /// Beamsplitter coupling to a thermal environment.
    Attenuation,
    /// Discard the input and prepare a thermal state.
    Discard,
    /// Random separable channel, one input and one output per party.
    RandomSeparable,
}

#[derive(Subcommand, Debug)]
pub enum ChannelCommand {
    /// Write a channel's Choi state as JSON.
    Make(ChannelMakeArgs),
    /// Apply a channel to a state.
    Apply(ChannelApplyArgs),
}

#[derive(Args, Debug)]
pub struct ChannelMakeArgs {
    #[arg(long, value_enum)]
    pub kind: ChannelKind,
    /// Number of input modes (identity, discard).
    #[arg(long, default_value_t = 1)]
    pub modes: usize,
    /// Squeezing of the Choi state (identity, filter, attenuation).
    #[arg(long, default_value_t = 2.0)]
    pub r: f64,
    /// Transmissivity (attenuation).
    #[arg(long, default_value_t = 0.5)]
    pub eta: f64,
    /// Environment or output symplectic eigenvalue (attenuation, discard).
    #[arg(long, default_value_t = 1.0)]
    pub nu: f64,
    #[arg(long, env = "CVDIST_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ChannelApplyArgs {
    #[arg(long)]
    pub channel: PathBuf,
    #[arg(long)]
    pub state: PathBuf,
    /// Modes of the state the channel acts on; all modes when omitted.
    #[arg(long, value_delimiter = ',')]
    pub on: Vec<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EntanglementArgs {
    #[arg(long)]
    pub state: PathBuf,
    /// Alice's modes; defaults to mode 0.
    #[arg(long, value_delimiter = ',')]
    pub alice: Vec<usize>,
    /// Bob's modes; defaults to the complement of Alice's.
    #[arg(long, value_delimiter = ',')]
    pub bob: Vec<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct Fig1Args {
    #[arg(long)]
    pub channel: PathBuf,
    #[arg(long)]
    pub state: PathBuf,
    /// Number of sampled Bell outcomes.
    #[arg(long, default_value_t = 20)]
    pub samples: usize,
    #[arg(long, env = "CVDIST_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Factor applied to the feed-forward gain (1 is correct; other values
    /// are negative controls).
    #[arg(long, default_value_t = 1.0)]
    pub gain_scale: f64,
    /// Full transcript as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct Fig2Args {
    /// First copy (mode 0 Alice, mode 1 Bob).
    #[arg(long)]
    pub copy1: PathBuf,
    /// Second copy; the first copy is used twice when omitted.
    #[arg(long)]
    pub copy2: Option<PathBuf>,
    /// Alice's two-mode symplectic as JSON; identity when omitted.
    #[arg(long)]
    pub s_a: Option<PathBuf>,
    /// Bob's two-mode symplectic as JSON; identity when omitted.
    #[arg(long)]
    pub s_b: Option<PathBuf>,
    /// Protocol parameters, or a no-go certificate whose best point is
    /// replayed. Overrides --s-a and --s-b.
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Sample heterodyne outcomes instead of fixing them at 0.
    #[arg(long)]
    pub sample_outcomes: bool,
    #[arg(long, env = "CVDIST_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct NogoArgs {
    /// Comma-separated squeezing values; copies are tmsv(r) x tmsv(r).
    #[arg(long, value_parser = parse_r_list, conflicts_with = "copy", required_unless_present = "copy")]
    pub rs: Option<RList>,
    /// Two-mode state JSON searched as two identical copies.
    #[arg(long)]
    pub copy: Option<PathBuf>,
    /// Added to each copy's covariance as noise * I.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 50)]
    pub starts: usize,
    /// Objective evaluations per start.
    #[arg(long, default_value_t = 2000)]
    pub budget: usize,
    #[arg(long, env = "CVDIST_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Sweep table; stdout when omitted.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Certificates with full parameters.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Clone, Debug)]
pub struct RList(pub Vec<f64>);

fn parse_r_list(s: &str) -> Result<RList, String> {
    let values: Result<Vec<f64>, _> = s
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(str::parse::<f64>)
        .collect();
    let values = values.map_err(|e| format!("not a comma-separated list of reals: {e}"))?;
    if values.is_empty() {
        return Err("empty r list".into());
    }
    if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(format!("non-finite value {bad}"));
    }
    Ok(RList(values))
}

#[derive(Args, Debug)]
pub struct CanonArgs {
    #[arg(long)]
    pub state: PathBuf,
    /// The two input modes.
    #[arg(long, value_delimiter = ',', default_value = "0,1")]
    pub inputs: Vec<usize>,
    #[arg(long, default_value_t = 2)]
    pub output: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cvdist: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
