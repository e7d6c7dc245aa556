//! Peak splitting versus RF coupling.
//!
//! Split detection does not rely on a detuning grid: a spectrum is split when
//! its centre is a local minimum, decided from the sign of the curvature of
//! the continuous steady-state signal at δ = 0. Peak positions are found by
//! scanning the positive-detuning half of the spectrum and refining each
//! maximum by golden-section search on the signal itself, so separations stay
//! meaningful far below the scan spacing.

use rayon::prelude::*;
use serde::Serialize;

use super::{amplitude_at, default_half_span_khz, Channel, PEAK_THRESHOLD, SIGNAL_FLOOR};
use crate::error::{Error, Result};
use crate::export::Table;
use crate::lindblad::ModelKind;
use crate::model::PhysicalParams;
use crate::optimize::{bisect, golden_section_min};
use crate::units::{khz_to_rad, rad_to_khz};

/// Probe offset for the curvature test, in units of the resonance width
/// `γ₀ + γ_opt/2`.
const CURVATURE_PROBE: f64 = 1e-2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SplitOptions {
    pub model: ModelKind,
    /// Half-span of the peak scan; defaults to the spectrum default.
    pub half_span_khz: Option<f64>,
    /// Samples on the positive half of the spectrum.
    pub scan_points: usize,
    /// Onset bisection tolerance; defaults to 1/100 of the local J spacing.
    pub onset_tolerance_khz: Option<f64>,
}

impl Default for SplitOptions {
    fn default() -> Self {
        Self {
            model: ModelKind::Eff3,
            half_span_khz: None,
            scan_points: 500,
            onset_tolerance_khz: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SplittingPoint {
    pub j_khz: f64,
    /// `pos₊ − pos₋` of the dominant peak pair, 0 when the highest peak sits
    /// at the centre.
    pub separation_khz: f64,
    /// Peaks above threshold, counting both halves of the spectrum.
    pub n_peaks: usize,
    pub center_dip: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SplittingCurve {
    pub channel: Channel,
    /// Couplings J/2π in kHz, increasing.
    pub j_khz: Vec<f64>,
    /// Peak separations in kHz.
    pub separation_khz: Vec<f64>,
    pub n_peaks: Vec<usize>,
    /// Smallest split coupling, refined between grid points.
    pub onset_khz: Option<f64>,
}

impl SplittingCurve {
    /// A curve from given values, e.g. a closed-form model.
    pub fn new(channel: Channel, j_khz: Vec<f64>, separation_khz: Vec<f64>, onset_khz: Option<f64>) -> Result<Self> {
        if j_khz.len() != separation_khz.len() {
            return Err(Error::DimensionMismatch {
                expected: j_khz.len(),
                found: separation_khz.len(),
            });
        }
        check_j_grid(&j_khz)?;
        if separation_khz.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::InvalidParameter(
                "separations must be finite and non-negative".into(),
            ));
        }
        let n_peaks = separation_khz.iter().map(|&s| if s > 0.0 { 2 } else { 1 }).collect();
        Ok(Self {
            channel,
            j_khz,
            separation_khz,
            n_peaks,
            onset_khz,
        })
    }

    pub fn len(&self) -> usize {
        self.j_khz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.j_khz.is_empty()
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new(["j_khz", "delta_f_khz", "n_peaks"]);
        for i in 0..self.len() {
            t.rows
                .push(vec![self.j_khz[i], self.separation_khz[i], self.n_peaks[i] as f64]);
        }
        t
    }
}

fn check_j_grid(j_khz: &[f64]) -> Result<()> {
    if j_khz.is_empty() {
        return Err(Error::InvalidGrid("coupling grid is empty".into()));
    }
    if j_khz.iter().any(|j| !(j.is_finite() && *j >= 0.0)) {
        return Err(Error::InvalidGrid("couplings must be finite and non-negative".into()));
    }
    if j_khz.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidGrid("coupling grid must be strictly increasing".into()));
    }
    Ok(())
}

fn signal(p: &PhysicalParams, channel: Channel, model: ModelKind, delta: f64) -> Result<f64> {
    Ok(channel.value(amplitude_at(p, model, delta)?))
}

/// True when δ = 0 is a local minimum of the channel signal.
///
/// The curvature is estimated from symmetric second differences at probe
/// offsets `h` and `h/2`, combined by Richardson extrapolation to cancel the
/// `O(h²)` term.
pub fn center_dip(p: &PhysicalParams, channel: Channel, model: ModelKind) -> Result<bool> {
    let width = p.gamma_0 + p.gamma_opt() / 2.0;
    let h = CURVATURE_PROBE * width;
    let s0 = signal(p, channel, model, 0.0)?;
    let second = |h: f64| -> Result<f64> {
        let sp = signal(p, channel, model, h)?;
        let sm = signal(p, channel, model, -h)?;
        Ok((sp + sm - 2.0 * s0) / (h * h))
    };
    let c1 = second(h)?;
    let c2 = second(h / 2.0)?;
    Ok((4.0 * c2 - c1) / 3.0 > 0.0)
}

/// Maximizes the channel signal on `[a, b]` (rad/s). Returns position and value.
fn refine_max(p: &PhysicalParams, channel: Channel, model: ModelKind, a: f64, b: f64) -> Result<(f64, f64)> {
    let tol = 1e-10 * (b - a).abs().max(f64::MIN_POSITIVE);
    let (x, neg) = golden_section_min(|d| signal(p, channel, model, d).map(|v| -v), a, b, tol)?;
    Ok((x, -neg))
}

/// Peak analysis of one coupling (`p.j()`).
pub(crate) fn split_point(p: &PhysicalParams, channel: Channel, options: &SplitOptions) -> Result<SplittingPoint> {
    let model = options.model;
    let j_khz = rad_to_khz(p.j());
    let half_span = khz_to_rad(options.half_span_khz.unwrap_or_else(|| default_half_span_khz(p)));
    let k_max = options.scan_points.max(4);
    let step = half_span / k_max as f64;
    let v: Vec<f64> = (0..=k_max)
        .into_par_iter()
        .map(|k| signal(p, channel, model, k as f64 * step))
        .collect::<Result<_>>()?;
    let vmax = v.iter().copied().fold(0.0, f64::max);
    if !(vmax > SIGNAL_FLOOR) {
        return Ok(SplittingPoint {
            j_khz,
            separation_khz: 0.0,
            n_peaks: 0,
            center_dip: false,
        });
    }
    let dip = center_dip(p, channel, model)?;

    let mut brackets: Vec<(f64, f64)> = (1..k_max)
        .filter(|&k| v[k] > v[k - 1] && v[k] >= v[k + 1])
        .map(|k| ((k - 1) as f64 * step, (k + 1) as f64 * step))
        .collect();
    if dip && v[1] <= v[0] {
        // the innermost peak lies below the first scan point
        brackets.insert(0, (0.0, step));
    }
    let mut peaks = Vec::with_capacity(brackets.len());
    for (a, b) in brackets {
        let (x, h) = refine_max(p, channel, model, a, b)?;
        if h >= PEAK_THRESHOLD * vmax.max(h) && x > 0.0 {
            peaks.push((x, h));
        }
    }
    let n_peaks = 2 * peaks.len() + usize::from(!dip);
    let center = if dip { f64::NEG_INFINITY } else { v[0] };
    let top = peaks.iter().copied().max_by(|a, b| a.1.total_cmp(&b.1));
    let separation_khz = match top {
        Some((x, h)) if h > center => {
            let width = step.min(x);
            let (xm, _) = refine_max(p, channel, model, -x - width, -x + width)?;
            rad_to_khz(x - xm)
        }
        _ => 0.0,
    };
    Ok(SplittingPoint {
        j_khz,
        separation_khz,
        n_peaks,
        center_dip: dip,
    })
}

/// Bisects for the smallest coupling (kHz) whose spectrum is split, given a
/// bracket whose lower end is unsplit and upper end split.
pub fn find_onset(
    p_template: &PhysicalParams,
    channel: Channel,
    model: ModelKind,
    lo_khz: f64,
    hi_khz: f64,
    tol_khz: f64,
) -> Result<f64> {
    let split = |j_khz: f64| center_dip(&p_template.with_j(khz_to_rad(j_khz)), channel, model);
    if split(lo_khz)? || !split(hi_khz)? {
        return Err(Error::BracketFailure(format!(
            "onset is not bracketed by [{lo_khz}, {hi_khz}] kHz"
        )));
    }
    let (_, hi) = bisect(split, lo_khz, hi_khz, tol_khz)?;
    Ok(hi)
}

/// Locates the splitting onset without a coupling grid: a geometric scan of
/// J over `[1e-3, 50]·γ₀` followed by bisection to `tol_rel` relative.
pub fn locate_onset(p_template: &PhysicalParams, channel: Channel, model: ModelKind, tol_rel: f64) -> Result<f64> {
    let g0 = rad_to_khz(p_template.gamma_0);
    let n = 60;
    let grid: Vec<f64> = (0..n)
        .map(|k| g0 * 1e-3 * (5e4f64).powf(k as f64 / (n - 1) as f64))
        .collect();
    let mut prev = grid[0];
    if center_dip(&p_template.with_j(khz_to_rad(prev)), channel, model)? {
        return Err(Error::BracketFailure(
            "spectrum already split at the smallest scanned coupling".into(),
        ));
    }
    for &j in &grid[1..] {
        if center_dip(&p_template.with_j(khz_to_rad(j)), channel, model)? {
            return find_onset(p_template, channel, model, prev, j, tol_rel * j);
        }
        prev = j;
    }
    Err(Error::BracketFailure("no splitting up to 50·γ₀".into()))
}

/// Peak separation along `j_khz` with default options.
pub fn splitting_curve(p_template: &PhysicalParams, j_khz: &[f64], channel: Channel) -> Result<SplittingCurve> {
    splitting_curve_with(p_template, j_khz, channel, &SplitOptions::default())
}

pub fn splitting_curve_with(
    p_template: &PhysicalParams,
    j_khz: &[f64],
    channel: Channel,
    options: &SplitOptions,
) -> Result<SplittingCurve> {
    p_template.validate()?;
    check_j_grid(j_khz)?;
    let points: Vec<SplittingPoint> = j_khz
        .par_iter()
        .enumerate()
        .map(|(i, &j)| split_point(&p_template.with_j(khz_to_rad(j)), channel, options).map_err(|e| Error::at(i, e)))
        .collect::<Result<_>>()?;

    let model = options.model;
    let onset_khz = match points.iter().position(|pt| pt.separation_khz > 0.0) {
        None => None,
        Some(0) => {
            // split from the first grid point on: walk down until unsplit
            let hi = j_khz[0];
            let mut lo = hi / 2.0;
            let dip = |j: f64| center_dip(&p_template.with_j(khz_to_rad(j)), channel, model);
            let mut found = false;
            for _ in 0..60 {
                if !dip(lo)? {
                    found = true;
                    break;
                }
                lo /= 2.0;
            }
            if found && dip(hi)? {
                let tol = options.onset_tolerance_khz.unwrap_or((hi - lo) / 100.0);
                Some(find_onset(p_template, channel, model, lo, hi, tol)?)
            } else {
                Some(hi)
            }
        }
        Some(k) => {
            let (lo, hi) = (j_khz[k - 1], j_khz[k]);
            let tol = options.onset_tolerance_khz.unwrap_or((hi - lo) / 100.0);
            if points[k].center_dip {
                Some(find_onset(p_template, channel, model, lo, hi, tol)?)
            } else {
                Some(hi)
            }
        }
    };
    Ok(SplittingCurve {
        channel,
        j_khz: j_khz.to_vec(),
        separation_khz: points.iter().map(|p| p.separation_khz).collect(),
        n_peaks: points.iter().map(|p| p.n_peaks).collect(),
        onset_khz,
    })
}
