use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use triggerkit_cli::{dispatch, error_line, load_config, CliError, Command, Options};

/// Stability checks and simulations for sampled feedback of a heat/ODE cascade.
#[derive(Parser, Debug)]
#[command(name = "triggerkit", version)]
struct Args {
    /// simulate | check | frontier | bounds | gamma-estimate
    command: String,
    /// TOML run configuration
    config: PathBuf,
    /// Directory for output files (defaults to the working directory)
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Number of grid nodes for every supremum over an interval
    #[arg(long, value_name = "N")]
    seed_grid: Option<usize>,
    /// Also write an SVG plot of the simulation
    #[arg(long)]
    svg: bool,
}

fn execute(args: Args) -> Result<i32, CliError> {
    let command = Command::from_name(&args.command).ok_or_else(|| {
        CliError::Usage(format!(
            "unknown command {:?}; expected simulate, check, frontier, bounds or gamma-estimate",
            args.command
        ))
    })?;
    let cfg = load_config(&args.config)?;
    let opts = Options {
        out_dir: args.out,
        seed_grid: args.seed_grid,
        svg: args.svg,
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    let code = dispatch(command, &cfg, &opts, &mut lock)?;
    lock.flush()?;
    Ok(code)
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            // Keep clap's message, drop its usage footer.
            let msg = e.to_string();
            let text: Vec<&str> = msg
                .lines()
                .take_while(|l| !l.starts_with("Usage:") && !l.starts_with("For more information"))
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .collect();
            let text = text.join(" ");
            let text = text.strip_prefix("error: ").unwrap_or(&text);
            eprintln!("{}", error_line(&CliError::Usage(text.to_string())));
            return ExitCode::from(2);
        }
    };
    match execute(args) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("{}", error_line(&e));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
