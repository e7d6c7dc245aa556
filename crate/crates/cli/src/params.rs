//! Flags shared by every command and resolution of the physical parameters.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use epmag_core::units::khz_to_rad;
use epmag_core::{Channel, ModelKind, ParamsConfig, PhysicalParams, Table};
use serde::Serialize;

/// Saturation parameter, ground relaxation and excited-state width used when
/// neither a config file nor flags say otherwise.
pub const DEFAULT_KAPPA: f64 = 0.3;
pub const DEFAULT_GAMMA0_KHZ: f64 = 0.7;
pub const DEFAULT_GAMMA_BIG_KHZ: f64 = 5750.0;

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// JSON parameter file (kHz); flags below override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value = "eff3")]
    pub model: ModelKind,
    #[arg(long, default_value = "mag")]
    pub channel: Channel,
    /// Saturation parameter κ; sets the probe Rabi frequency from Γ and γ₀.
    #[arg(long, conflicts_with = "omega0_khz")]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub gamma_big_khz: Option<f64>,
    #[arg(long)]
    pub gamma0_khz: Option<f64>,
    #[arg(long)]
    pub omega0_khz: Option<f64>,
    #[arg(long)]
    pub j0_khz: Option<f64>,
    #[arg(long)]
    pub delta_rf_khz: Option<f64>,
    #[arg(long)]
    pub delta_opt_khz: Option<f64>,
}

impl Common {
    pub fn params(&self) -> Result<PhysicalParams> {
        let mut cfg = match &self.config {
            Some(path) => ParamsConfig::from_path(path).with_context(|| format!("reading {}", path.display()))?,
            None => ParamsConfig::from(&PhysicalParams::from_saturation(
                DEFAULT_KAPPA,
                khz_to_rad(DEFAULT_GAMMA0_KHZ),
                khz_to_rad(DEFAULT_GAMMA_BIG_KHZ),
                0.0,
                0.0,
            )?),
        };
        let overrides = [
            (self.gamma_big_khz, &mut cfg.gamma_big_khz),
            (self.gamma0_khz, &mut cfg.gamma0_khz),
            (self.omega0_khz, &mut cfg.omega0_khz),
            (self.j0_khz, &mut cfg.j0_khz),
            (self.delta_rf_khz, &mut cfg.delta_rf_khz),
            (self.delta_opt_khz, &mut cfg.delta_opt_khz),
        ];
        for (flag, slot) in overrides {
            if let Some(v) = flag {
                *slot = v;
            }
        }
        let p = cfg.to_params()?;
        Ok(match self.kappa {
            Some(k) => p.with_kappa(k)?,
            None => p,
        })
    }
}

/// Everything that determines a command's output, echoed as the first line.
#[derive(Serialize)]
pub struct RunConfig<'a, G: Serialize> {
    pub command: &'a str,
    pub params: ParamsConfig,
    pub kappa: f64,
    pub model: ModelKind,
    pub channel: Channel,
    pub grid: &'a G,
}

impl<'a, G: Serialize> RunConfig<'a, G> {
    pub fn new(command: &'a str, common: &Common, p: &PhysicalParams, grid: &'a G) -> Self {
        Self {
            command,
            params: ParamsConfig::from(p),
            kappa: p.kappa(),
            model: common.model,
            channel: common.channel,
            grid,
        }
    }

    pub fn header(&self) -> Result<String> {
        Ok(format!("config {}", serde_json::to_string(self)?))
    }
}

pub fn open_output(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).with_context(|| format!("creating {}", path.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

pub fn write_table(out: &Option<PathBuf>, table: &Table, comments: &[String]) -> Result<()> {
    let mut w = open_output(out)?;
    table.write(&mut w, comments)?;
    w.flush()?;
    Ok(())
}
