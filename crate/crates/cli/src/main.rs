use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rcnfem_cli::{CliError, RunConfig};

#[derive(Parser)]
#[command(name = "rcnfem", version, propagate_version = true, about = "Relaxation Crank-Nicolson FEM for Schrodinger-Poisson")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// JSON config file with dotted keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set mesh.nc=64`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Single run with diagnostics and snapshots.
    Run(Common),
    /// Temporal convergence study over the listed time steps.
    ConvTime(Common),
    /// Spatial convergence study over the listed cell counts.
    ConvSpace(Common),
    /// Wall-time comparison against the iterative scheme.
    Compare(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                CliError::Core(rcnfem::Error::Config(_)) | CliError::Json(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    let (Command::Run(c) | Command::ConvTime(c) | Command::ConvSpace(c) | Command::Compare(c)) = &command;
    let cfg = RunConfig::load(c.config.as_deref(), &c.set)?;
    let dir = cfg.out_dir.display();
    match command {
        Command::Run(_) => {
            let out = rcnfem_cli::run(&cfg)?;
            let fin = &out.summary["final"];
            println!(
                "{} steps; final mass change {}, modified energy change {}; wrote {dir}",
                out.summary["steps"], fin["mass_change"], fin["energy_mod_change"]
            );
        }
        Command::ConvTime(_) | Command::ConvSpace(_) => {
            let out = if matches!(command, Command::ConvTime(_)) {
                rcnfem_cli::conv_time(&cfg)?
            } else {
                rcnfem_cli::conv_space(&cfg)?
            };
            for r in &out.rows {
                match r.order {
                    Some(o) => println!("{:>12} {:.6e} {:.3}", r.level, r.error, o),
                    None => println!("{:>12} {:.6e}", r.level, r.error),
                }
            }
            println!("wrote {dir}");
        }
        Command::Compare(_) => {
            let out = rcnfem_cli::compare(&cfg)?;
            println!("relaxation {:.3} s", out.relaxation_wall_s);
            for p in &out.policies {
                println!(
                    "{} {:.3} s, ratio {:.3}, mean iterations {:.2}, gap {:.3e}",
                    p.policy.label(),
                    p.wall_s,
                    p.ratio,
                    p.stats.mean_iterations(),
                    p.gap
                );
            }
            println!("wrote {dir}");
        }
    }
    Ok(())
}
