use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use rmb_cli::{parse_config, run, Command, RunOptions};

/// Runs one experiment described by a config file.
#[derive(Parser, Debug)]
#[command(name = "rmb-lab", version)]
struct Args {
    /// simulate, collide, mi-scan, ode, bloch, kink or lax-check
    command: String,
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output_dir` in the config).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    /// Seed for the random fields of `lax-check`.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let Some(command) = Command::parse(&args.command) else {
        eprintln!("rmb-lab: unknown command `{}`", args.command);
        return ExitCode::from(2);
    };
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("rmb-lab: {}: {e}", args.config.display());
            return ExitCode::from(2);
        }
    };
    let cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("rmb-lab: {}: {e}", args.config.display());
            return ExitCode::from(2);
        }
    };
    if cfg.command != command {
        eprintln!(
            "rmb-lab: config is for `{}`, not `{}`",
            cfg.command.as_str(),
            command.as_str()
        );
        return ExitCode::from(2);
    }
    let opts = RunOptions {
        out: args.out,
        threads: args.threads,
        seed: args.seed,
    };
    match run(&cfg, &opts) {
        Ok(m) => {
            println!("{}", m.path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("rmb-lab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
