use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use weylwalk_cli::config::Override;
use weylwalk_cli::{cmd_list, cmd_report, cmd_run, cmd_validate, Context, Exit};

#[derive(Parser, Debug)]
#[command(name = "weylwalk", version, about = "Run Weyl-walk experiments and report their verdicts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug)]
struct Common {
    /// TOML configuration; the bundled one when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory [env: WEYLWALK_OUT].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one scenario, or `all`, and write CSV/JSON records.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "all")]
        scenario: String,
        /// Master seed [env: WEYLWALK_SEED].
        #[arg(long)]
        seed: Option<u64>,
        /// `scenario.field=value`; the target may also be `walks` or `all`.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<Override>,
    },
    /// Check the configuration and the hypotheses of each scenario.
    Validate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "all")]
        scenario: String,
    },
    /// Summarise the runs found in the output directory.
    Report {
        #[command(flatten)]
        common: Common,
    },
    /// List scenario names.
    List {
        #[command(flatten)]
        common: Common,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut stdout = std::io::stdout().lock();
    let result = match cli.command {
        Command::Run { common, scenario, seed, overrides } => {
            Context::new(common.config.as_deref(), seed, common.out, &overrides)
                .and_then(|ctx| cmd_run(&ctx, &scenario, &overrides, &mut stdout))
        }
        Command::Validate { common, scenario } => Context::new(common.config.as_deref(), None, common.out, &[])
            .and_then(|ctx| cmd_validate(&ctx, &scenario, &mut stdout)),
        Command::Report { common } => Context::new(common.config.as_deref(), None, common.out, &[])
            .and_then(|ctx| cmd_report(&ctx.out, &mut stdout)),
        Command::List { common } => {
            Context::new(common.config.as_deref(), None, common.out, &[]).map(|ctx| cmd_list(&ctx, &mut stdout))
        }
    };
    let code = match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            Exit::Config
        }
    };
    ExitCode::from(code as u8)
}
