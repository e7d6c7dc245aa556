//! Sensing figures of merit derived from splitting curves: power-law fits of
//! the separation, the slope enhancement near the splitting onset, and maps of
//! the exceptional point and onsets over the saturation parameter.
//!
//! The perturbation is the coupling offset `ε = J − J_onset`.

use std::f64::consts::SQRT_2;

use rayon::prelude::*;
use serde::Serialize;

use crate::eigen::j_ep;
use crate::error::{Error, Result};
use crate::export::Table;
use crate::lindblad::ModelKind;
use crate::model::PhysicalParams;
use crate::spectra::{locate_onset, Channel};
use crate::units::rad_to_khz;

pub use crate::spectra::SplittingCurve;

/// Default reference coupling for the asymptotic slope, in units of the onset.
pub const DEFAULT_REFERENCE_FACTOR: f64 = 10.0;
/// Minimum number of points for a power-law fit.
pub const MIN_FIT_POINTS: usize = 8;

/// Closed-form splitting onset
/// `γ₀·√((8κ² + 6κ + 1)/(8κ(16κ(2κ + 3) + 21) + 26))`, in the units of `gamma_0`.
pub fn closed_form_onset(kappa: f64, gamma_0: f64) -> f64 {
    let k = kappa;
    gamma_0 * ((8.0 * k * k + 6.0 * k + 1.0) / (8.0 * k * (16.0 * k * (2.0 * k + 3.0) + 21.0) + 26.0)).sqrt()
}

/// Closed-form separation `2√(2·J_o·(J − J_o))` above the onset `J_o`, 0 below.
pub fn closed_form_separation(onset: f64, j: f64) -> f64 {
    if j <= onset {
        0.0
    } else {
        2.0 * (2.0 * onset * (j - onset)).sqrt()
    }
}

/// Slope of [`closed_form_separation`] relative to the linear-regime slope
/// 2√2: `√(2J_o/ε)/(2√2)`.
pub fn closed_form_enhancement(onset: f64, epsilon: f64) -> f64 {
    (2.0 * onset / epsilon).sqrt() / (2.0 * SQRT_2)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScalingFit {
    pub exponent: f64,
    /// `e^intercept` of the log-log line, in kHz^(1 − exponent).
    pub prefactor: f64,
    /// `(ε_min, ε_max)` in kHz.
    pub window: (f64, f64),
    /// RMS residual of the log-log fit.
    pub residual: f64,
    pub points: usize,
}

/// Least-squares line through `(ln ε, ln separation)` for curve points with
/// `ε = J − onset` inside `window` (kHz) and a positive separation.
pub fn fit_sqrt_scaling(curve: &SplittingCurve, window: (f64, f64)) -> Result<ScalingFit> {
    let (lo, hi) = window;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "fit window ({lo}, {hi}) must be positive and ordered"
        )));
    }
    let onset = curve
        .onset_khz
        .ok_or_else(|| Error::InsufficientData("curve has no splitting onset".into()))?;
    let (xs, ys): (Vec<f64>, Vec<f64>) = curve
        .j_khz
        .iter()
        .zip(&curve.separation_khz)
        .filter_map(|(&j, &s)| {
            let eps = j - onset;
            (eps >= lo && eps <= hi && s > 0.0).then(|| (eps.ln(), s.ln()))
        })
        .unzip();
    let n = xs.len();
    if n < MIN_FIT_POINTS {
        return Err(Error::InsufficientData(format!(
            "{n} points inside the fit window, need {MIN_FIT_POINTS}"
        )));
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if !(sxx > 0.0) {
        return Err(Error::InsufficientData("fit points share a single perturbation".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    Ok(ScalingFit {
        exponent: slope,
        prefactor: intercept.exp(),
        window,
        residual: (rss / n as f64).sqrt(),
        points: n,
    })
}

/// Normalization of the enhancement factor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum SlopeReference {
    /// Curve slope at `J = j_factor·onset`.
    Asymptotic { j_factor: f64 },
    /// A given slope (dimensionless, kHz per kHz).
    Fixed(f64),
}

impl Default for SlopeReference {
    fn default() -> Self {
        SlopeReference::Asymptotic {
            j_factor: DEFAULT_REFERENCE_FACTOR,
        }
    }
}

/// Points strictly above the onset, where the separation is smooth in J.
fn split_branch(curve: &SplittingCurve) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let onset = curve
        .onset_khz
        .ok_or_else(|| Error::InsufficientData("curve has no splitting onset".into()))?;
    let (j, s): (Vec<f64>, Vec<f64>) = curve
        .j_khz
        .iter()
        .zip(&curve.separation_khz)
        .filter(|(&j, &s)| j > onset && s > 0.0)
        .map(|(&j, &s)| (j, s))
        .unzip();
    if j.len() < 3 {
        return Err(Error::InsufficientData("fewer than three split points".into()));
    }
    Ok((onset, j, s))
}

/// `d(separation)/dJ` at `j` from the quadratic through the three grid points
/// nearest to `j` (a central difference when `j` is a grid point).
fn slope_at(js: &[f64], ss: &[f64], j: f64) -> Result<f64> {
    let n = js.len();
    if !(j >= js[0] && j <= js[n - 1]) {
        return Err(Error::OutOfSupport(format!(
            "J = {j} kHz outside [{}, {}] kHz",
            js[0],
            js[n - 1]
        )));
    }
    let nearest = (0..n)
        .min_by(|&a, &b| (js[a] - j).abs().total_cmp(&(js[b] - j).abs()))
        .expect("non-empty");
    let i = nearest.clamp(1, n - 2);
    let (x0, x1, x2) = (js[i - 1], js[i], js[i + 1]);
    let (y0, y1, y2) = (ss[i - 1], ss[i], ss[i + 1]);
    Ok(y0 * (2.0 * j - x1 - x2) / ((x0 - x1) * (x0 - x2))
        + y1 * (2.0 * j - x0 - x2) / ((x1 - x0) * (x1 - x2))
        + y2 * (2.0 * j - x0 - x1) / ((x2 - x0) * (x2 - x1)))
}

/// Separation slope at `onset + epsilon` divided by the reference slope.
pub fn enhancement_factor(curve: &SplittingCurve, epsilon_khz: f64, reference: SlopeReference) -> Result<f64> {
    let (onset, js, ss) = split_branch(curve)?;
    if !(epsilon_khz > 0.0) {
        return Err(Error::OutOfSupport(format!(
            "perturbation {epsilon_khz} must be positive"
        )));
    }
    let slope = slope_at(&js, &ss, onset + epsilon_khz)?;
    let reference = match reference {
        SlopeReference::Asymptotic { j_factor } => slope_at(&js, &ss, j_factor * onset)?,
        SlopeReference::Fixed(s) => s,
    };
    if !(reference.abs() > 0.0) {
        return Err(Error::InvalidParameter("reference slope is zero".into()));
    }
    Ok(slope / reference)
}

/// `epsilon_khz, separation_khz, enhancement` for every split grid point
/// where the enhancement is defined.
pub fn enhancement_table(curve: &SplittingCurve, reference: SlopeReference) -> Result<Table> {
    let (onset, js, ss) = split_branch(curve)?;
    let mut t = Table::new(["epsilon_khz", "separation_khz", "enhancement"]);
    for (&j, &s) in js.iter().zip(&ss) {
        let e = enhancement_factor(curve, j - onset, reference)?;
        t.rows.push(vec![j - onset, s, e]);
    }
    Ok(t)
}

/// Couplings (kHz) `onset·(1 + r)` for `r` log-spaced over `[r_min, r_max]`.
pub fn log_spaced_couplings(onset_khz: f64, r_min: f64, r_max: f64, points: usize) -> Result<Vec<f64>> {
    if !(onset_khz > 0.0 && r_min > 0.0 && r_max > r_min) || points < 2 {
        return Err(Error::InvalidGrid(
            "log spacing needs 0 < r_min < r_max and two points".into(),
        ));
    }
    let ratio = (r_max / r_min).ln();
    Ok((0..points)
        .map(|k| onset_khz * (1.0 + r_min * (ratio * k as f64 / (points - 1) as f64).exp()))
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ArcRow {
    pub kappa: f64,
    pub j_ep_khz: f64,
    pub j_opr_khz: f64,
    pub j_abs_khz: f64,
}

impl ArcRow {
    /// `J_EP ≤ J_OPR < J_abs`.
    pub fn ordered(&self) -> bool {
        self.j_ep_khz <= self.j_opr_khz && self.j_opr_khz < self.j_abs_khz
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ArcTable {
    pub gamma0_khz: f64,
    pub rows: Vec<ArcRow>,
}

impl ArcTable {
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(["kappa", "j_ep_khz", "j_opr_khz", "j_abs_khz"]);
        for r in &self.rows {
            t.rows.push(vec![r.kappa, r.j_ep_khz, r.j_opr_khz, r.j_abs_khz]);
        }
        t
    }
}

/// For each κ: the exceptional point and the splitting onsets of the OPR
/// magnitude and of the absorption channel. `p_template` supplies γ₀ and Γ.
pub fn exceptional_arc_map(p_template: &PhysicalParams, kappa_grid: &[f64], model: ModelKind) -> Result<ArcTable> {
    p_template.validate()?;
    if kappa_grid.is_empty() || kappa_grid.iter().any(|k| !(k.is_finite() && *k > 0.0)) {
        return Err(Error::InvalidGrid("saturation parameters must be positive".into()));
    }
    if kappa_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidGrid("saturation grid must be strictly increasing".into()));
    }
    let rows = kappa_grid
        .par_iter()
        .enumerate()
        .map(|(i, &kappa)| {
            let row = || -> Result<ArcRow> {
                let p = p_template.with_kappa(kappa)?.with_delta_rf(0.0);
                Ok(ArcRow {
                    kappa,
                    j_ep_khz: rad_to_khz(j_ep(&p)?),
                    j_opr_khz: locate_onset(&p, Channel::Mag, model, 1e-9)?,
                    j_abs_khz: locate_onset(&p, Channel::Abs, model, 1e-9)?,
                })
            };
            row().map_err(|e| Error::at(i, e))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ArcTable {
        gamma0_khz: rad_to_khz(p_template.gamma_0),
        rows,
    })
}
