//! `honeyotp`: run the server and honeychecker, register users, write QR
//! files and emulate an authenticator app.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

mod authenticator;
mod client;
mod qr;
mod serve;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tracing_subscriber::EnvFilter;

#[derive(Debug, Parser)]
#[command(
    name = "honeyotp",
    version,
    about = "Honeytoken two-factor authentication"
)]
struct Cli {
    /// TOML configuration file; HONEYOTP_* variables override it.
    #[arg(long, global = true, env = "HONEYOTP_CONFIG")]
    config: Option<PathBuf>,

    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    /// Log as JSON lines.
    #[arg(long, global = true)]
    log_json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the HTTP server.
    Serve,
    /// Run the honeychecker service.
    Honeychecker,
    /// Register a user on a running server.
    Register(RegisterArgs),
    /// Write PNG and SVG QR codes for otpauth URIs.
    Qr(QrArgs),
    /// Show the current codes for otpauth URIs.
    Authenticator(AuthenticatorArgs),
    /// Unlock a locked account on a running server.
    Unlock(UnlockArgs),
}

#[derive(Debug, Args)]
struct ServerArg {
    /// Base URL of the server.
    #[arg(long, env = "HONEYOTP_SERVER", default_value = "http://127.0.0.1:8080")]
    server: String,
}

#[derive(Debug, Args)]
struct RegisterArgs {
    #[command(flatten)]
    server: ServerArg,
    #[arg(long)]
    username: String,
    #[arg(long, env = "HONEYOTP_PASSWORD", hide_env_values = true)]
    password: String,
    #[arg(long)]
    firstname: String,
    #[arg(long)]
    lastname: String,
    /// E.164 phone number for SMS delivery.
    #[arg(long)]
    phone: String,
    /// Genuine slot, 1..=N. Remember it; it is never shown again.
    #[arg(long)]
    position: u32,
    /// Also write each slot's QR code here.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Args)]
struct QrArgs {
    /// otpauth URIs.
    #[arg(required = true)]
    uris: Vec<String>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Overwrite existing files.
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Args)]
struct AuthenticatorArgs {
    /// otpauth URIs, one per slot.
    #[arg(required = true)]
    uris: Vec<String>,
    /// Unix time to compute codes for; implies --once.
    #[arg(long, allow_negative_numbers = true)]
    at: Option<i64>,
    /// Print one table and exit.
    #[arg(long)]
    once: bool,
}

#[derive(Debug, Args)]
struct UnlockArgs {
    #[command(flatten)]
    server: ServerArg,
    #[arg(long)]
    username: String,
    #[arg(long, env = "HONEYOTP_ADMIN_TOKEN", hide_env_values = true)]
    token: String,
}

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

pub type CmdResult = Result<(), Failure>;

fn init_logging(verbose: u8, json: bool) {
    let default = match verbose {
        0 => "info",
        1 => "debug",
        _ => "trace",
    };
    let filter = EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new(default));
    let builder = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr);
    if json {
        builder.json().init();
    } else {
        builder.init();
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.verbose, cli.log_json);
    let config = cli.config.as_deref();
    let result = match cli.command {
        Command::Serve => serve::serve(config),
        Command::Honeychecker => serve::honeychecker(config),
        Command::Register(a) => client::register(&a),
        Command::Qr(a) => qr::run(&a.uris, &a.out, a.force),
        Command::Authenticator(a) => authenticator::run(&a.uris, a.at, a.once || a.at.is_some()),
        Command::Unlock(a) => client::unlock(&a.server.server, &a.username, &a.token),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
