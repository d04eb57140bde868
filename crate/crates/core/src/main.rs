use clap::{Parser, Subcommand};
use pilot_field::cli_io::{emit_plot_data, output_root, run_experiment, ExperimentConfig, ResultBundle, EXPERIMENTS};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "pilot-field", version, about = "Pilot-wave field theory simulation lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        config: PathBuf,
        /// Output root (overrides PILOT_FIELD_OUTPUT_ROOT).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a config without running it.
    Validate { config: PathBuf },
    /// Write long-format plot data for one plot kind of a saved bundle.
    EmitPlots {
        bundle: PathBuf,
        kind: String,
        /// Output file; stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the available experiments.
    ListExperiments,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out } => ExperimentConfig::load(&config).and_then(|cfg| {
            let root = out.unwrap_or_else(output_root);
            let bundle = run_experiment(&cfg, &root)?;
            for c in &bundle.checks {
                println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            Ok(bundle.pass())
        }),
        Command::Validate { config } => ExperimentConfig::load(&config).map(|cfg| {
            println!("{}: ok ({})", config.display(), cfg.experiment);
            true
        }),
        Command::EmitPlots { bundle, kind, out } => ResultBundle::load(&bundle).and_then(|b| {
            let csv = emit_plot_data(&b, &kind)?;
            match out {
                Some(p) => std::fs::write(p, csv)?,
                None => print!("{csv}"),
            }
            Ok(true)
        }),
        Command::ListExperiments => {
            for (name, about) in EXPERIMENTS {
                println!("{name:<18} {about}");
            }
            Ok(true)
        }
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
