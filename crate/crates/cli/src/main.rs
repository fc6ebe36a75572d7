use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rofsim_cli::{
    cmd_calibrate, cmd_run, cmd_schema, cmd_sweep, CalibrationSpec, Exit, RunFlags, SchemaKind,
    SweepOptions, SweepSpec,
};

#[derive(Parser)]
#[command(
    name = "rofsim",
    version,
    about = "Duplex radio-over-fiber fronthaul simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one end-to-end simulation
    Run {
        /// Scenario JSON (full or partial); default testbed when omitted
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        symbols: Option<usize>,
        /// Disable every noise source and the injection penalty
        #[arg(long)]
        no_noise: bool,
        /// Write an RFIQ dump for each tap
        #[arg(long)]
        iq_dump: bool,
    },
    /// Sweep one parameter over values and seeds
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Sweep spec JSON; OF1 length 0..6 km when omitted
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        symbols: Option<usize>,
        #[arg(long)]
        no_noise: bool,
    },
    /// Fit free parameters to EVM targets
    Calibrate {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Calibration spec JSON; the built-in targets when omitted
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Print the JSON schema of a config file kind
    Schema {
        #[arg(long, value_enum, default_value = "scenario")]
        kind: Kind,
        /// Write to a file instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Scenario,
    Sweep,
    Calibration,
}

fn execute(cli: Cli) -> rofsim::Result<Exit> {
    match cli.command {
        Command::Run {
            config,
            out,
            seed,
            symbols,
            no_noise,
            iq_dump,
        } => {
            let flags = RunFlags {
                seed,
                symbols,
                no_noise,
                iq_dump,
            };
            let exit = cmd_run(config.as_deref(), &out, &flags)?;
            eprintln!("wrote {}", out.join("run.json").display());
            Ok(exit)
        }
        Command::Sweep {
            config,
            spec,
            out,
            symbols,
            no_noise,
        } => {
            let spec = match spec {
                Some(p) => SweepSpec::load(&p)?,
                None => SweepSpec::default(),
            };
            let opts = SweepOptions {
                threads: None,
                symbols,
                no_noise,
            };
            let exit = cmd_sweep(config.as_deref(), &spec, &out, &opts)?;
            eprintln!("wrote {}", out.join("sweep.csv").display());
            Ok(exit)
        }
        Command::Calibrate { config, spec, out } => {
            let spec = match spec {
                Some(p) => CalibrationSpec::load(&p)?,
                None => CalibrationSpec::default(),
            };
            let (exit, outcome) = cmd_calibrate(config.as_deref(), &spec, &out, None)?;
            eprintln!(
                "residual RMS {:.4} after {} evaluations; wrote {}",
                outcome.residual_rms,
                outcome.evaluations,
                out.join("fitted.json").display()
            );
            Ok(exit)
        }
        Command::Schema { kind, out } => {
            let kind = match kind {
                Kind::Scenario => SchemaKind::Scenario,
                Kind::Sweep => SchemaKind::Sweep,
                Kind::Calibration => SchemaKind::Calibration,
            };
            let text = cmd_schema(kind);
            match out {
                Some(p) => std::fs::write(p, text)?,
                None => print!("{text}"),
            }
            Ok(Exit::Success)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // usage errors map to the generic error code, not clap's 2
            return ExitCode::from(if e.use_stderr() {
                Exit::Error.code() as u8
            } else {
                0
            });
        }
    };
    match execute(cli) {
        Ok(exit) => ExitCode::from(exit.code() as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(Exit::Error.code() as u8)
        }
    }
}
