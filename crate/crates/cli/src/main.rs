//! `qpkc`: command-line driver for the entangled-pair cipher simulator.
//!
//! Every command is a pure function of its arguments and the seed: stdout
//! and all written files are byte-identical across reruns. Timing goes to
//! stderr only. Exit codes: 0 success, 1 usage or input problems, 2 the
//! protocol aborted after detecting eavesdropping, 3 a broken internal
//! invariant.

mod commands;
mod error;
mod files;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "qpkc",
    version,
    about = "Simulator for a public-key cipher on shared entangled pairs",
    propagate_version = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Generate a key pair from a seed
    Keygen(KeygenArgs),
    /// Run one full protocol session end to end
    Run(RunArgs),
    /// Bob's side: agree on keys, encrypt a bit message, save the session
    Encrypt(EncryptArgs),
    /// Alice's side: replay a saved session and decrypt a ciphertext
    Decrypt(DecryptArgs),
    /// Measure an attack strategy's detection and success rates
    Attack(AttackArgs),
    /// Check the simulator's exact identities and a small session
    Selftest,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, ValueEnum, Debug)]
pub enum StrategyArg {
    /// Measure and resend along one fixed axis
    InterceptResendFixed,
    /// Measure and resend along a fresh random axis per pair
    InterceptResendRandom,
    /// Passive: guess the secret channels outright
    ChannelGuess,
    /// Passive: distinguish the two cipher gates from a ciphertext qubit
    CiphertextDistinguish,
}

/// Sizing shared by every command that runs sessions.
#[derive(Args, Clone, Copy)]
pub struct SessionArgs {
    /// Key length in pairs
    #[arg(long, default_value_t = 64)]
    pub n: usize,
    /// Pool size [default: enough survivors for n plus a margin]
    #[arg(long)]
    pub m: Option<usize>,
    /// Fraction of the pool sacrificed to the eavesdropping check
    #[arg(long, default_value_t = 0.25)]
    pub fraction: f64,
    /// Abort when the CHSH estimate is at or below this value
    #[arg(long, default_value_t = 2.5)]
    pub threshold: f64,
}

/// Eve's configuration for commands that let her tamper.
#[derive(Args, Clone, Copy)]
pub struct EveArgs {
    /// Eavesdropping axis in radians (fixed intercept strategy only)
    #[arg(long, default_value_t = 0.0)]
    pub axis: f64,
    /// Probability that any given pair is touched
    #[arg(long, default_value_t = 1.0)]
    pub coverage: f64,
    /// Eve reads both legs of each touched pair
    #[arg(long)]
    pub both_legs: bool,
}

#[derive(Args)]
pub struct KeygenArgs {
    /// Key length in pairs
    #[arg(long, default_value_t = 64)]
    pub n: usize,
    /// Master seed (QPKC_SEED overrides)
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the public key file here
    #[arg(long)]
    pub public: Option<PathBuf>,
    /// Write the private key file here
    #[arg(long)]
    pub private: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub session: SessionArgs,
    /// Master seed (QPKC_SEED overrides)
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Plaintext bits, e.g. 01101 [default: seed-derived random bits]
    #[arg(long)]
    pub message: Option<String>,
    /// Let Eve run this strategy during distribution
    #[arg(long, value_enum)]
    pub eve: Option<StrategyArg>,
    #[command(flatten)]
    pub eve_args: EveArgs,
    /// Write the full session transcript here
    #[arg(long)]
    pub transcript: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Args)]
pub struct EncryptArgs {
    #[command(flatten)]
    pub session: SessionArgs,
    /// Master seed (QPKC_SEED overrides)
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Plaintext bits, e.g. 01101
    #[arg(long)]
    pub message: String,
    /// Write the ciphertext file here
    #[arg(long)]
    pub ciphertext: PathBuf,
    /// Write the session file (Alice's decryption capability) here
    #[arg(long)]
    pub session_file: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Args)]
pub struct DecryptArgs {
    /// Session file written by encrypt
    #[arg(long)]
    pub session_file: PathBuf,
    /// Ciphertext file to decrypt
    #[arg(long)]
    pub ciphertext: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Args)]
pub struct AttackArgs {
    #[command(flatten)]
    pub session: SessionArgs,
    /// Strategy to measure
    #[arg(long, value_enum)]
    pub strategy: StrategyArg,
    #[command(flatten)]
    pub eve_args: EveArgs,
    /// Number of independent trials
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    /// Pairs guessed jointly per trial (channel-guess only)
    #[arg(long, default_value_t = 1)]
    pub pairs: usize,
    /// Worker threads; the report is identical for any value
    #[arg(long, default_value_t = 1)]
    pub parallel: usize,
    /// Master seed (QPKC_SEED overrides)
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not errors; real usage errors
            // report through exit code 1.
            let code = u8::from(e.use_stderr());
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let started = std::time::Instant::now();
    let result = commands::dispatch(cli);
    eprintln!("timing: total {:.3?}", started.elapsed());
    match result {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
