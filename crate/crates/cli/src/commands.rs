use std::io::Write;

use anyhow::{bail, Result};
use clap::Args;
use epmag_core::eigen::{branches_table, eigen_sweep};
use epmag_core::lindblad::{validate_elimination_with, EliminationOptions, EliminationReport};
use epmag_core::sensing::{
    enhancement_table, exceptional_arc_map, fit_sqrt_scaling, log_spaced_couplings, SlopeReference,
};
use epmag_core::spectra::{
    default_half_span_khz, locate_onset, splitting_curve_with, sweep_spectrum, swept_spectrum, symmetric_grid,
    SplitOptions, MIN_GRID_POINTS,
};
use epmag_core::units::{khz_to_rad, ms_to_s, s_to_ms};
use epmag_core::{PhysicalParams, Table};
use log::info;
use serde::Serialize;

use crate::params::{open_output, write_table, Common, RunConfig};

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v > 0.0 => Ok(v),
        Ok(v) => Err(format!("{v} must be positive and finite")),
        Err(e) => Err(e.to_string()),
    }
}

fn non_negative(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v >= 0.0 => Ok(v),
        Ok(v) => Err(format!("{v} must be non-negative and finite")),
        Err(e) => Err(e.to_string()),
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

#[derive(Args, Debug, Serialize)]
pub struct EigenArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
    /// Largest RF Rabi frequency J (kHz); the sweep starts at 0.
    #[arg(long, default_value_t = 0.5, value_parser = positive)]
    pub j_max_khz: f64,
    #[arg(long, default_value_t = 501, value_parser = clap::value_parser!(u32).range(2..))]
    pub j_points: u32,
}

pub fn eigen(a: EigenArgs) -> Result<bool> {
    let p = a.common.params()?;
    let js: Vec<f64> = linspace(0.0, a.j_max_khz, a.j_points as usize)
        .into_iter()
        .map(khz_to_rad)
        .collect();
    let table = branches_table(&eigen_sweep(&p, &js)?);
    write_table(
        &a.common.out,
        &table,
        &[RunConfig::new("eigen", &a.common, &p, &a).header()?],
    )?;
    Ok(true)
}

#[derive(Args, Debug, Serialize)]
pub struct SpectrumArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
    /// Comma-separated RF Rabi frequencies J (kHz), one spectrum each.
    #[arg(long, value_delimiter = ',', num_args = 1.., required = true, value_parser = non_negative)]
    pub j_khz: Vec<f64>,
    #[arg(long, default_value_t = 1001, value_parser = clap::value_parser!(u32).range(MIN_GRID_POINTS as i64..))]
    pub points: u32,
    /// Half-width of the RF detuning grid (kHz); sized to the largest J when absent.
    #[arg(long, value_parser = positive)]
    pub half_span_khz: Option<f64>,
    /// Record a slow sweep dwelling this long (ms) at each detuning instead
    /// of solving for steady states.
    #[arg(long, value_parser = positive)]
    pub dwell_ms: Option<f64>,
}

pub fn spectrum(mut a: SpectrumArgs) -> Result<bool> {
    let p = a.common.params()?;
    let half_span = match a.half_span_khz {
        Some(h) => h,
        None => a
            .j_khz
            .iter()
            .map(|&j| default_half_span_khz(&p.with_j(khz_to_rad(j))))
            .fold(0.0, f64::max),
    };
    a.half_span_khz = Some(half_span);
    let grid = symmetric_grid(half_span, a.points as usize)?;
    let mut table = Table::new(["j_khz", "delta_khz", "s_abs", "s_dis", "s_mag"]);
    for &j in &a.j_khz {
        info!("spectrum at J = {j} kHz");
        let pj = p.with_j(khz_to_rad(j));
        let s = match a.dwell_ms {
            Some(t) => swept_spectrum(&pj, &grid, a.common.model, ms_to_s(t))?,
            None => sweep_spectrum(&pj, &grid, a.common.model)?,
        };
        for k in 0..s.len() {
            table
                .rows
                .push(vec![j, s.delta_khz[k], s.s_abs[k], s.s_dis[k], s.s_mag[k]]);
        }
    }
    write_table(
        &a.common.out,
        &table,
        &[RunConfig::new("spectrum", &a.common, &p, &a).header()?],
    )?;
    Ok(true)
}

#[derive(Args, Debug, Serialize)]
pub struct SplitArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
    #[arg(long, default_value_t = 0.01, value_parser = positive)]
    pub j_min_khz: f64,
    #[arg(long, default_value_t = 0.6, value_parser = positive)]
    pub j_max_khz: f64,
    #[arg(long, default_value_t = 60, value_parser = clap::value_parser!(u32).range(2..))]
    pub j_points: u32,
    /// Detuning samples of the coarse peak scan on each half-line.
    #[arg(long, default_value_t = 500, value_parser = clap::value_parser!(u32).range(10..))]
    pub scan_points: u32,
}

fn split_options(common: &Common, scan_points: u32) -> SplitOptions {
    SplitOptions {
        model: common.model,
        scan_points: scan_points as usize,
        ..SplitOptions::default()
    }
}

pub fn split(a: SplitArgs) -> Result<bool> {
    if a.j_max_khz <= a.j_min_khz {
        bail!("--j-max-khz must exceed --j-min-khz");
    }
    let p = a.common.params()?;
    let js = linspace(a.j_min_khz, a.j_max_khz, a.j_points as usize);
    let curve = splitting_curve_with(&p, &js, a.common.channel, &split_options(&a.common, a.scan_points))?;
    let onset = match curve.onset_khz {
        Some(j) => format!("{j:?}"),
        None => "none".to_string(),
    };
    eprintln!("{} onset_khz {onset}", a.common.channel);
    let comments = [
        RunConfig::new("split", &a.common, &p, &a).header()?,
        format!("onset_khz {onset}"),
    ];
    write_table(&a.common.out, &curve.to_table(), &comments)?;
    Ok(true)
}

#[derive(Args, Debug, Serialize)]
pub struct SenseArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
    /// Smallest perturbation ε = J − J_onset, in units of J_onset.
    #[arg(long, default_value_t = 1e-4, value_parser = positive)]
    pub eps_min_rel: f64,
    #[arg(long, default_value_t = 30.0, value_parser = positive)]
    pub eps_max_rel: f64,
    #[arg(long, default_value_t = 80, value_parser = clap::value_parser!(u32).range(8..))]
    pub points: u32,
    /// Power-law fit window in units of J_onset.
    #[arg(long, default_value_t = 1e-2, value_parser = positive)]
    pub fit_min_rel: f64,
    #[arg(long, default_value_t = 1.0, value_parser = positive)]
    pub fit_max_rel: f64,
    /// Enhancement is normalized by the slope at this multiple of J_onset.
    #[arg(long, default_value_t = 10.0, value_parser = positive)]
    pub reference_factor: f64,
    #[arg(long, default_value_t = 500, value_parser = clap::value_parser!(u32).range(10..))]
    pub scan_points: u32,
}

pub fn sense(a: SenseArgs) -> Result<bool> {
    if a.eps_max_rel <= a.eps_min_rel || a.fit_max_rel <= a.fit_min_rel {
        bail!("perturbation and fit ranges must be increasing");
    }
    let p = a.common.params()?;
    let onset = locate_onset(&p, a.common.channel, a.common.model, 1e-10)?;
    info!("onset at {onset} kHz");
    let js = log_spaced_couplings(onset, a.eps_min_rel, a.eps_max_rel, a.points as usize)?;
    let mut options = split_options(&a.common, a.scan_points);
    options.onset_tolerance_khz = Some(1e-3 * onset);
    let mut curve = splitting_curve_with(&p, &js, a.common.channel, &options)?;
    curve.onset_khz = Some(onset);
    let fit = fit_sqrt_scaling(&curve, (a.fit_min_rel * onset, a.fit_max_rel * onset))?;
    let table = enhancement_table(
        &curve,
        SlopeReference::Asymptotic {
            j_factor: a.reference_factor,
        },
    )?;
    eprintln!(
        "exponent {:.4} over {} points, onset_khz {onset:?}",
        fit.exponent, fit.points
    );
    let comments = [
        RunConfig::new("sense", &a.common, &p, &a).header()?,
        format!("onset_khz {onset:?}"),
        format!("fit {}", serde_json::to_string(&fit)?),
    ];
    write_table(&a.common.out, &table, &comments)?;
    Ok(true)
}

#[derive(Args, Debug, Serialize)]
pub struct ArcsArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
    #[arg(long, default_value_t = 0.05, value_parser = positive)]
    pub kappa_min: f64,
    #[arg(long, default_value_t = 1.0, value_parser = positive)]
    pub kappa_max: f64,
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u32).range(1..))]
    pub kappa_points: u32,
}

pub fn arcs(a: ArcsArgs) -> Result<bool> {
    let grid = if a.kappa_points == 1 {
        vec![a.kappa_min]
    } else if a.kappa_max > a.kappa_min {
        linspace(a.kappa_min, a.kappa_max, a.kappa_points as usize)
    } else {
        bail!("--kappa-max must exceed --kappa-min");
    };
    let p = a.common.params()?;
    let arcs = exceptional_arc_map(&p, &grid, a.common.model)?;
    write_table(
        &a.common.out,
        &arcs.to_table(),
        &[RunConfig::new("arcs", &a.common, &p, &a).header()?],
    )?;
    Ok(true)
}

#[derive(Args, Debug, Serialize)]
pub struct ValidateArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
    /// Γ/Ω; rescales Γ and Ω at fixed κ and γ₀.
    #[arg(long, value_parser = positive)]
    pub gamma_ratio: Option<f64>,
    /// RF Rabi frequency J (kHz); the configured J, or 0.3 kHz if that is zero.
    #[arg(long, value_parser = positive)]
    pub j_khz: Option<f64>,
    /// Comparison window (ms); five ground relaxation times when absent.
    #[arg(long, value_parser = positive)]
    pub t_final_ms: Option<f64>,
    #[arg(long, default_value_t = 400, value_parser = clap::value_parser!(u32).range(1..))]
    pub samples: u32,
}

/// J used by `validate` when neither the flag nor the configuration sets one.
const VALIDATE_DEFAULT_J_KHZ: f64 = 0.3;

#[derive(Serialize)]
struct ValidateOutput<'a, G: Serialize> {
    config: RunConfig<'a, G>,
    report: EliminationReport,
}

pub fn validate(mut a: ValidateArgs) -> Result<bool> {
    let base = a.common.params()?;
    let j = match a.j_khz {
        Some(j) => khz_to_rad(j),
        None if base.j() > 0.0 => base.j(),
        None => khz_to_rad(VALIDATE_DEFAULT_J_KHZ),
    };
    let mut p = base.with_j(j);
    if let Some(r) = a.gamma_ratio {
        let (kappa, g0) = (base.kappa(), base.gamma_0);
        let mut q = PhysicalParams::from_saturation(kappa, g0, kappa * g0 * r * r, j, base.delta_rf)?;
        q.delta_opt = base.delta_opt;
        p = q;
    }
    let t_final = match a.t_final_ms {
        Some(t) => ms_to_s(t),
        None => 5.0 / p.gamma_0,
    };
    a.t_final_ms = Some(s_to_ms(t_final));
    let options = EliminationOptions {
        samples: a.samples as usize,
        ..EliminationOptions::default()
    };
    let report = validate_elimination_with(&p, t_final, &options)?;
    let verdict = if report.pass { "PASS" } else { "FAIL" };
    eprintln!("{verdict} max_deviation {:.3e}", report.max_deviation);
    let out = ValidateOutput {
        config: RunConfig::new("validate", &a.common, &p, &a),
        report,
    };
    let mut w = open_output(&a.common.out)?;
    serde_json::to_writer_pretty(&mut w, &out)?;
    writeln!(w)?;
    w.flush()?;
    Ok(report.pass)
}
