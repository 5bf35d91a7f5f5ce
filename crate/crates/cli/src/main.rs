//! `prism`: run simulations, compare arms, audit text and exercise the vault.

mod commands;
mod config;
mod error;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use prism_core::simulator::Policy;
use prism_core::vault::{FieldContext, Role};

use crate::config::{parse_policy, parse_seeds, SeedRange};
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "prism", version, about = "Privacy-bounded group assignment: simulation and audit tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one arm of the synthetic experiment into a run directory.
    Simulate {
        /// Scenario JSON; defaults apply to missing fields.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, conflicts_with = "seeds")]
        seed: Option<u64>,
        /// Seed range such as 0..20; writes one sub-directory per seed.
        #[arg(long, value_parser = parse_seeds)]
        seeds: Option<SeedRange>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        rules: Option<PathBuf>,
        #[arg(long, value_parser = parse_policy)]
        policy: Option<Policy>,
    },
    /// Compare a static and an adaptive run (directories or metrics.json files).
    Compare {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Scan JSON-lines messages for residual identifiers.
    LeakAudit {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        rules: Option<PathBuf>,
    },
    /// Print field tokens for values given as flags or on stdin.
    TokenizeDemo {
        #[arg(long, default_value = "email")]
        context: FieldContext,
        #[arg(long = "value")]
        values: Vec<String>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Exercise controlled restoration against a synthetic identity.
    RestoreDemo {
        #[arg(long, default_value = "coach")]
        role: Role,
        /// Treat the requester as lacking a verified second factor.
        #[arg(long)]
        no_mfa: bool,
        #[arg(long, default_value = "deliver reviewed coaching message")]
        purpose: String,
        #[arg(long, default_value_t = 1)]
        attempts: usize,
        #[arg(long)]
        audit_out: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Approve, edit or discard one draft of a run.
    Review {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        draft: String,
        #[arg(long)]
        decision: String,
        #[arg(long)]
        text: Option<String>,
        #[arg(long)]
        reviewer: String,
        #[arg(long)]
        rules: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let mut err = std::io::stderr();
    match cli.command {
        Command::Simulate {
            scenario,
            seed,
            seeds,
            out: dir,
            config,
            rules,
            policy,
        } => commands::simulate(
            commands::SimulateArgs {
                scenario,
                seed,
                seeds: seeds.map(|s| s.0),
                out: dir,
                config,
                rules,
                policy,
            },
            &mut out,
        ),
        Command::Compare { a, b, json } => commands::compare(&a, &b, json, &mut out),
        Command::LeakAudit { input, rules } => commands::leak_audit_cmd(&input, rules.as_deref(), &mut out),
        Command::TokenizeDemo { context, values, config } => {
            commands::tokenize_demo(config.as_deref(), context, values, &mut out, &mut err)
        }
        Command::RestoreDemo {
            role,
            no_mfa,
            purpose,
            attempts,
            audit_out,
            config,
        } => commands::restore_demo(
            commands::RestoreArgs {
                config,
                role,
                mfa: !no_mfa,
                purpose,
                attempts,
                audit_out,
            },
            &mut out,
            &mut err,
        ),
        Command::Review {
            run,
            draft,
            decision,
            text,
            reviewer,
            rules,
        } => commands::review(
            commands::ReviewArgs {
                run,
                draft,
                decision,
                text,
                reviewer,
                rules,
            },
            &mut out,
        ),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = std::io::stdout().flush();
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
