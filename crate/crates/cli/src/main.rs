//! `epmag`: writes the datasets behind eigenvalue, spectrum, splitting,
//! sensing and exceptional-arc plots as CSV, and checks adiabatic elimination.

mod commands;
mod params;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{ArcsArgs, EigenArgs, SenseArgs, SpectrumArgs, SplitArgs, ValidateArgs};

#[derive(Parser, Debug)]
#[command(name = "epmag", version, about = "Exceptional-point magnetometry datasets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Eigenvalue branches of the effective Hamiltonian versus J.
    Eigen(EigenArgs),
    /// Steady-state polarization-rotation spectra for a list of J values.
    Spectrum(SpectrumArgs),
    /// Peak separation versus J and the splitting onset.
    Split(SplitArgs),
    /// Power-law fit and slope enhancement just above the onset.
    Sense(SenseArgs),
    /// Exceptional point and splitting onsets versus saturation parameter.
    Arcs(ArcsArgs),
    /// Compares full and effective dynamics; exit status reflects the verdict.
    Validate(ValidateArgs),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Eigen(a) => commands::eigen(a),
        Command::Spectrum(a) => commands::spectrum(a),
        Command::Split(a) => commands::split(a),
        Command::Sense(a) => commands::sense(a),
        Command::Arcs(a) => commands::arcs(a),
        Command::Validate(a) => commands::validate(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
