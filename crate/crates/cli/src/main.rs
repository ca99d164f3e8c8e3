use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use lumen_cli::commands;
use lumen_cli::{EXIT_INPUT, EXIT_OK};

#[derive(Parser)]
#[command(name = "lumen", version, about = "Near-field reflector design")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the problem in a config file and write the artifacts.
    Solve {
        config: PathBuf,
        #[arg(short = 'o', long = "out")]
        out: PathBuf,
        /// Progress line every this many iterations (0 = silent).
        #[arg(long, default_value_t = 0)]
        log_every: usize,
    },
    /// Ray-trace a solution directory.
    Raytrace {
        dir: PathBuf,
        #[arg(long, default_value_t = 1_000_000)]
        rays: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run an invariant suite: geometry, ellipsoid, dual, reflector, ma, farfield or all.
    Verify {
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// tiny, small or full.
        #[arg(long, default_value = "small")]
        size: String,
    },
    /// Residual refinement study of a catalog reflector.
    Residual {
        #[arg(long)]
        catalog: String,
        #[arg(long, value_delimiter = ',', default_values_t = [32, 64, 128])]
        levels: Vec<usize>,
        /// Chart radius of the sampled disk.
        #[arg(long, default_value_t = 0.5)]
        radius: f64,
    },
    /// Every suite at the smallest size.
    Selftest {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT } else { EXIT_OK } as u8);
        }
    };
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let result = match cli.command {
        Command::Solve { config, out: dir, log_every } => commands::solve_cmd(&config, &dir, log_every, &mut out),
        Command::Raytrace { dir, rays, seed } => commands::raytrace_cmd(&dir, rays, seed, &mut out),
        Command::Verify { suite, seed, size } => commands::verify_cmd(&suite, seed, &size, &mut out),
        Command::Residual { catalog, levels, radius } => {
            commands::residual_cmd(&catalog, &levels, radius, &mut out, &mut io::stderr())
        }
        Command::Selftest { seed } => commands::selftest_cmd(seed, &mut out),
    };
    let _ = out.flush();
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
