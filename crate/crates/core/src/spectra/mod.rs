//! Optical-polarization-rotation (OPR) spectra versus RF detuning, peak
//! detection and splitting observables.
//!
//! The OPR response is the complex amplitude `A = i(ρ₁₀ − ρ₂₁)` of the
//! steady state. Its real part is the absorptive quadrature `S_abs` (even in
//! δ, a single positive peak at weak coupling), its imaginary part the
//! dispersive quadrature `S_dis` (odd in δ), and `S = |A|` the magnitude.
//! All signals are dimensionless; only positions and ratios are meaningful.

mod split;

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::export::Table;
use crate::lindblad::{
    evolve_sampled, model_liouvillian, model_steady_state, DensityMatrix, ModelKind, STABILITY_FACTOR,
};
use crate::matrix::c64;
use crate::model::PhysicalParams;
use crate::units::{khz_to_rad, rad_to_khz};

pub use split::{
    center_dip, find_onset, locate_onset, splitting_curve, splitting_curve_with, SplitOptions, SplittingCurve,
    SplittingPoint,
};

/// Peaks lower than this fraction of the global maximum are ignored.
pub const PEAK_THRESHOLD: f64 = 0.01;
/// Signals whose maximum is below this are treated as identically zero.
pub const SIGNAL_FLOOR: f64 = 1e-12;
/// Default number of detuning samples.
pub const DEFAULT_GRID_POINTS: usize = 1001;
/// Smallest allowed detuning grid.
pub const MIN_GRID_POINTS: usize = 101;
/// Minimum default half-span of the detuning grid, kHz.
pub const DEFAULT_HALF_SPAN_KHZ: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    /// OPR magnitude `|A|`.
    Mag,
    /// Absorption alone, `|Re A|`.
    Abs,
}

impl Channel {
    pub fn value(self, amplitude: Complex64) -> f64 {
        match self {
            Channel::Mag => amplitude.norm(),
            Channel::Abs => amplitude.re.abs(),
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Channel::Mag => "mag",
            Channel::Abs => "abs",
        })
    }
}

impl FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mag" => Ok(Channel::Mag),
            "abs" => Ok(Channel::Abs),
            other => Err(Error::InvalidParameter(format!(
                "unknown channel '{other}' (expected mag or abs)"
            ))),
        }
    }
}

/// `A = i(ρ₁₀ − ρ₂₁)`.
pub fn opr_amplitude(rho: &DensityMatrix) -> Complex64 {
    c64(0.0, 1.0) * (rho.element(1, 0) - rho.element(2, 1))
}

/// OPR amplitude of the steady state at RF detuning `delta` (rad/s).
pub fn amplitude_at(p: &PhysicalParams, model: ModelKind, delta: f64) -> Result<Complex64> {
    Ok(opr_amplitude(&model_steady_state(&p.with_delta_rf(delta), model)?))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Spectrum {
    /// δ/2π in kHz, uniform and strictly increasing.
    pub delta_khz: Vec<f64>,
    pub s_abs: Vec<f64>,
    pub s_dis: Vec<f64>,
    /// `√(s_abs² + s_dis²)`.
    pub s_mag: Vec<f64>,
}

impl Spectrum {
    pub fn new(delta_khz: Vec<f64>, s_abs: Vec<f64>, s_dis: Vec<f64>) -> Result<Self> {
        let n = delta_khz.len();
        for len in [s_abs.len(), s_dis.len()] {
            if len != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: len,
                });
            }
        }
        check_grid(&delta_khz, 1)?;
        if s_abs.iter().chain(&s_dis).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("spectrum samples must be finite".into()));
        }
        let s_mag = s_abs.iter().zip(&s_dis).map(|(a, d)| (a * a + d * d).sqrt()).collect();
        Ok(Self {
            delta_khz,
            s_abs,
            s_dis,
            s_mag,
        })
    }

    pub fn len(&self) -> usize {
        self.delta_khz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delta_khz.is_empty()
    }

    pub fn step_khz(&self) -> f64 {
        if self.len() < 2 {
            0.0
        } else {
            (self.delta_khz[self.len() - 1] - self.delta_khz[0]) / (self.len() - 1) as f64
        }
    }

    pub fn channel(&self, channel: Channel) -> Vec<f64> {
        match channel {
            Channel::Mag => self.s_mag.clone(),
            Channel::Abs => self.s_abs.iter().map(|v| v.abs()).collect(),
        }
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new(["delta_khz", "s_abs", "s_dis", "s_mag"]);
        for i in 0..self.len() {
            t.rows
                .push(vec![self.delta_khz[i], self.s_abs[i], self.s_dis[i], self.s_mag[i]]);
        }
        t
    }
}

fn check_grid(delta_khz: &[f64], min_points: usize) -> Result<()> {
    if delta_khz.len() < min_points {
        return Err(Error::InvalidGrid(format!(
            "need at least {min_points} detuning points, got {}",
            delta_khz.len()
        )));
    }
    if delta_khz.iter().any(|d| !d.is_finite()) {
        return Err(Error::InvalidGrid("detunings must be finite".into()));
    }
    if delta_khz.len() < 2 {
        return Ok(());
    }
    let n = delta_khz.len();
    let step = (delta_khz[n - 1] - delta_khz[0]) / (n - 1) as f64;
    if !(step > 0.0) {
        return Err(Error::InvalidGrid("detunings must be strictly increasing".into()));
    }
    for (k, w) in delta_khz.windows(2).enumerate() {
        if ((w[1] - w[0]) - step).abs() > 1e-6 * step {
            return Err(Error::InvalidGrid(format!("detuning grid is not uniform at index {k}")));
        }
    }
    Ok(())
}

/// `points` detunings (kHz) uniformly covering `[−half_span, half_span]`,
/// exactly antisymmetric about zero.
pub fn symmetric_grid(half_span_khz: f64, points: usize) -> Result<Vec<f64>> {
    if !(half_span_khz > 0.0 && half_span_khz.is_finite()) || points < 2 {
        return Err(Error::InvalidGrid(format!(
            "half span {half_span_khz} and {points} points do not form a grid"
        )));
    }
    let denom = (points - 1) as f64;
    Ok((0..points)
        .map(|i| half_span_khz * (2.0 * i as f64 - denom) / denom)
        .collect())
}

/// Half-span (kHz) of the default detuning grid: at least
/// [`DEFAULT_HALF_SPAN_KHZ`] and five times the largest of J, κγ₀ and γ₀.
pub fn default_half_span_khz(p: &PhysicalParams) -> f64 {
    let widest = p.j().max(p.kappa() * p.gamma_0).max(p.gamma_0);
    DEFAULT_HALF_SPAN_KHZ.max(5.0 * rad_to_khz(widest))
}

pub fn default_delta_grid(p: &PhysicalParams) -> Vec<f64> {
    symmetric_grid(default_half_span_khz(p), DEFAULT_GRID_POINTS).expect("default grid parameters are valid")
}

/// Steady-state OPR spectrum over `delta_khz`.
///
/// The grid must be uniform with at least [`MIN_GRID_POINTS`] points and
/// reach ±5·max(J, κγ₀). Grid points are solved in parallel; a failure is
/// reported with its grid index.
pub fn sweep_spectrum(p_template: &PhysicalParams, delta_khz: &[f64], model: ModelKind) -> Result<Spectrum> {
    p_template.validate()?;
    check_grid(delta_khz, MIN_GRID_POINTS)?;
    let needed = 5.0 * rad_to_khz(p_template.j().max(p_template.kappa() * p_template.gamma_0));
    let (lo, hi) = (delta_khz[0], delta_khz[delta_khz.len() - 1]);
    if lo > -needed || hi < needed {
        return Err(Error::InvalidGrid(format!(
            "grid [{lo}, {hi}] kHz does not span ±{needed} kHz"
        )));
    }
    let amplitudes: Vec<Complex64> = delta_khz
        .par_iter()
        .enumerate()
        .map(|(i, &d)| amplitude_at(p_template, model, khz_to_rad(d)).map_err(|e| Error::at(i, e)))
        .collect::<Result<_>>()?;
    Spectrum::new(
        delta_khz.to_vec(),
        amplitudes.iter().map(|a| a.re).collect(),
        amplitudes.iter().map(|a| a.im).collect(),
    )
}

/// Spectrum recorded during a slow detuning sweep, for cross-checking the
/// quasi-static [`sweep_spectrum`].
///
/// The state starts in the steady state of the first grid point, then
/// evolves for `dwell_s` seconds at each detuning in turn; the amplitude is
/// read at the end of each dwell. Dwells much longer than `1/γ₀` reproduce
/// the steady-state spectrum, shorter ones show the lag of a finite sweep.
pub fn swept_spectrum(
    p_template: &PhysicalParams,
    delta_khz: &[f64],
    model: ModelKind,
    dwell_s: f64,
) -> Result<Spectrum> {
    p_template.validate()?;
    check_grid(delta_khz, 2)?;
    if !(dwell_s > 0.0 && dwell_s.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "dwell must be positive, got {dwell_s}"
        )));
    }
    let at = |d: f64| p_template.with_delta_rf(khz_to_rad(d));
    let mut rho = model_steady_state(&at(delta_khz[0]), model)?;
    let mut amplitudes = Vec::with_capacity(delta_khz.len());
    for (i, &d) in delta_khz.iter().enumerate() {
        let step = || -> Result<DensityMatrix> {
            let l = model_liouvillian(&at(d), model)?;
            let dt = (STABILITY_FACTOR / l.norm()).min(dwell_s);
            let t = evolve_sampled(&l, &rho, dwell_s, dt, 1)?;
            Ok(t.states.into_iter().last().expect("one sample"))
        };
        rho = step().map_err(|e| Error::at(i, e))?;
        amplitudes.push(opr_amplitude(&rho));
    }
    Spectrum::new(
        delta_khz.to_vec(),
        amplitudes.iter().map(|a| a.re).collect(),
        amplitudes.iter().map(|a| a.im).collect(),
    )
}

/// The same spectrum with the dispersive quadrature removed, so that the
/// magnitude channel is `|s_abs|`.
pub fn absorption_only_spectrum(spectrum: &Spectrum) -> Spectrum {
    Spectrum {
        delta_khz: spectrum.delta_khz.clone(),
        s_abs: spectrum.s_abs.clone(),
        s_dis: vec![0.0; spectrum.len()],
        s_mag: spectrum.s_abs.iter().map(|v| v.abs()).collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PeakSet {
    /// Ascending, kHz.
    pub positions: Vec<f64>,
    pub heights: Vec<f64>,
    pub count: usize,
}

impl PeakSet {
    /// The highest peak together with its mirror partner (the peak closest to
    /// the reflected position), ordered `(negative, positive)`. `None` when
    /// the highest peak has no partner on the other side.
    pub fn dominant_pair(&self) -> Option<(f64, f64)> {
        let top = (0..self.count).max_by(|&a, &b| self.heights[a].total_cmp(&self.heights[b]))?;
        let x = self.positions[top];
        let partner = (0..self.count)
            .filter(|&k| k != top && self.positions[k].signum() != x.signum() && self.positions[k] != 0.0)
            .min_by(|&a, &b| (self.positions[a] + x).abs().total_cmp(&(self.positions[b] + x).abs()))?;
        if x == 0.0 {
            return None;
        }
        let (a, b) = (x.min(self.positions[partner]), x.max(self.positions[partner]));
        Some((a, b))
    }

    /// Separation of the dominant pair, 0 when the highest peak is unpaired.
    pub fn separation(&self) -> f64 {
        self.dominant_pair().map_or(0.0, |(a, b)| b - a)
    }
}

/// Local maxima of a channel, refined by a parabola through each maximum and
/// its two neighbours. Maxima below [`PEAK_THRESHOLD`] of the largest sample
/// are dropped.
pub fn detect_peaks(spectrum: &Spectrum, channel: Channel) -> Result<PeakSet> {
    let n = spectrum.len();
    if n < 5 {
        return Err(Error::InsufficientData(format!(
            "peak detection needs at least 5 samples, got {n}"
        )));
    }
    let v = spectrum.channel(channel);
    let vmax = v.iter().copied().fold(0.0, f64::max);
    if !(vmax > SIGNAL_FLOOR) {
        return Err(Error::NoPeak);
    }
    let h = spectrum.step_khz();
    let mut positions = Vec::new();
    let mut heights = Vec::new();
    for i in 1..n - 1 {
        if !(v[i] > v[i - 1] && v[i] >= v[i + 1]) || v[i] < PEAK_THRESHOLD * vmax {
            continue;
        }
        let (a, b, c) = (v[i - 1], v[i], v[i + 1]);
        let denom = a - 2.0 * b + c;
        let (offset, height) = if denom < 0.0 {
            let t = 0.5 * (a - c) / denom;
            (t, b - 0.25 * (a - c) * t)
        } else {
            (0.0, b)
        };
        positions.push(spectrum.delta_khz[i] + offset * h);
        heights.push(height);
    }
    if positions.is_empty() {
        return Err(Error::NoPeak);
    }
    Ok(PeakSet {
        count: positions.len(),
        positions,
        heights,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn reference(j_khz: f64) -> PhysicalParams {
        PhysicalParams::from_saturation(0.3, khz_to_rad(0.7), khz_to_rad(5750.0), khz_to_rad(j_khz), 0.0).unwrap()
    }

    fn synthetic(grid: &[f64], f: impl Fn(f64) -> f64) -> Spectrum {
        Spectrum::new(
            grid.to_vec(),
            grid.iter().map(|&d| f(d)).collect(),
            vec![0.0; grid.len()],
        )
        .unwrap()
    }

    #[test]
    fn grid_is_antisymmetric() {
        let g = symmetric_grid(2.0, 1001).unwrap();
        assert_eq!(g[0], -2.0);
        assert_eq!(g[500], 0.0);
        for i in 0..1001 {
            assert_eq!(g[i], -g[1000 - i]);
        }
        assert!(symmetric_grid(0.0, 11).is_err());
    }

    #[test]
    fn rejects_bad_spectra() {
        assert!(Spectrum::new(vec![0.0, 1.0], vec![0.0], vec![0.0, 0.0]).is_err());
        assert!(Spectrum::new(vec![0.0, 1.0, 3.0], vec![0.0; 3], vec![0.0; 3]).is_err());
        assert!(Spectrum::new(vec![0.0, 1.0], vec![f64::NAN, 0.0], vec![0.0; 2]).is_err());
        let g = symmetric_grid(1.0, 51).unwrap();
        assert!(matches!(
            sweep_spectrum(&reference(0.1), &g, ModelKind::Eff3),
            Err(Error::InvalidGrid(_))
        ));
        let narrow = symmetric_grid(0.5, 201).unwrap();
        assert!(matches!(
            sweep_spectrum(&reference(0.3), &narrow, ModelKind::Eff3),
            Err(Error::InvalidGrid(_))
        ));
    }

    #[test]
    fn no_coupling_no_signal() {
        let p = reference(0.0);
        let s = sweep_spectrum(&p, &default_delta_grid(&p), ModelKind::Eff3).unwrap();
        assert!(s.s_abs.iter().chain(&s.s_dis).all(|v| v.abs() < 1e-12));
        assert!(matches!(detect_peaks(&s, Channel::Mag), Err(Error::NoPeak)));
    }

    #[test]
    fn weak_coupling_single_peak() {
        let p = reference(0.05);
        let s = sweep_spectrum(&p, &default_delta_grid(&p), ModelKind::Eff3).unwrap();
        let peaks = detect_peaks(&s, Channel::Mag).unwrap();
        assert_eq!(peaks.count, 1, "{peaks:?}");
        assert!(peaks.positions[0].abs() < s.step_khz() / 10.0);
        // the absorptive quadrature carries a positive central peak
        assert!(s.s_abs[500] > 0.0);
    }

    #[test]
    fn coupling_above_onset_splits() {
        let p = reference(0.15);
        let s = sweep_spectrum(&p, &default_delta_grid(&p), ModelKind::Eff3).unwrap();
        let peaks = detect_peaks(&s, Channel::Mag).unwrap();
        assert_eq!(peaks.count, 2, "{peaks:?}");
        assert!((peaks.positions[0] + peaks.positions[1]).abs() < 2.0 * s.step_khz());
        assert!(peaks.separation() > 0.0);
    }

    #[test]
    fn magnitude_is_symmetric() {
        for j in [0.05, 0.15, 0.4] {
            let p = reference(j);
            let s = sweep_spectrum(&p, &default_delta_grid(&p), ModelKind::Eff3).unwrap();
            let n = s.len();
            for i in 0..n {
                assert!((s.s_mag[i] - s.s_mag[n - 1 - i]).abs() <= 1e-8);
                assert!((s.s_abs[i] - s.s_abs[n - 1 - i]).abs() <= 1e-8);
                assert!((s.s_dis[i] + s.s_dis[n - 1 - i]).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn absorption_only_drops_dispersion() {
        let g = symmetric_grid(1.0, 101).unwrap();
        let s = synthetic(&g, |d| 1.0 / (1.0 + d * d));
        let a = absorption_only_spectrum(&s);
        assert_eq!(a.s_mag, s.s_mag);
        let mixed = Spectrum::new(
            g.clone(),
            s.s_abs.clone(),
            g.iter().map(|d| d / (1.0 + d * d)).collect(),
        )
        .unwrap();
        let a = absorption_only_spectrum(&mixed);
        assert!(a.s_mag.iter().zip(&mixed.s_abs).all(|(m, v)| *m == v.abs()));
        assert!(a.s_dis.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn synthetic_peaks() {
        let g = symmetric_grid(5.0, 201).unwrap();
        let single = synthetic(&g, |d| 1.0 / (1.0 + d * d));
        let p = detect_peaks(&single, Channel::Abs).unwrap();
        assert_eq!(p.count, 1);
        assert!(p.positions[0].abs() < single.step_khz() / 10.0);
        assert_eq!(p.separation(), 0.0);

        let lor = |x: f64| 1.0 / (1.0 + 4.0 * x * x);
        let double = synthetic(&g, |d| lor(d - 1.3) + lor(d + 1.3));
        let p = detect_peaks(&double, Channel::Abs).unwrap();
        assert_eq!(p.count, 2);
        assert!((p.positions[0] + p.positions[1]).abs() < 2.0 * double.step_khz());
        assert!((p.separation() - 2.6).abs() < 0.05);

        let short = Spectrum::new(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 0.0], vec![0.0; 3]).unwrap();
        assert!(matches!(
            detect_peaks(&short, Channel::Mag),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn small_shoulders_are_discarded() {
        let g = symmetric_grid(5.0, 201).unwrap();
        let s = synthetic(&g, |d| {
            1.0 / (1.0 + d * d) + 0.005 * (-(d - 3.0) * (d - 3.0) * 20.0).exp()
        });
        assert_eq!(detect_peaks(&s, Channel::Abs).unwrap().count, 1);
    }

    #[test]
    fn grid_refinement_is_stable() {
        let p = reference(0.3);
        let coarse = sweep_spectrum(&p, &symmetric_grid(3.0, 301).unwrap(), ModelKind::Eff3).unwrap();
        let fine = sweep_spectrum(&p, &symmetric_grid(3.0, 601).unwrap(), ModelKind::Eff3).unwrap();
        let a = detect_peaks(&coarse, Channel::Mag).unwrap();
        let b = detect_peaks(&fine, Channel::Mag).unwrap();
        assert_eq!(a.count, b.count);
        for (x, y) in a.positions.iter().zip(&b.positions) {
            assert!((x - y).abs() < coarse.step_khz() / 10.0, "{x} vs {y}");
        }
    }

    #[test]
    fn models_agree_on_peak_positions() {
        let p = reference(0.3);
        let g = default_delta_grid(&p);
        let eff = detect_peaks(&sweep_spectrum(&p, &g, ModelKind::Eff3).unwrap(), Channel::Mag).unwrap();
        let full = detect_peaks(&sweep_spectrum(&p, &g, ModelKind::Full4).unwrap(), Channel::Mag).unwrap();
        let (a, b) = (eff.separation(), full.separation());
        assert!((a - b).abs() <= 0.05 * a, "{a} vs {b}");
    }

    #[test]
    fn channel_names_round_trip() {
        for c in [Channel::Mag, Channel::Abs] {
            assert_eq!(c.to_string().parse::<Channel>().unwrap(), c);
        }
        assert!("dis".parse::<Channel>().is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn magnitude_definition(re in proptest::collection::vec(-1.0f64..1.0, 5), im in proptest::collection::vec(-1.0f64..1.0, 5)) {
            let s = Spectrum::new(vec![0.0, 1.0, 2.0, 3.0, 4.0], re.clone(), im.clone()).unwrap();
            for i in 0..5 {
                prop_assert_eq!(s.s_mag[i], (re[i] * re[i] + im[i] * im[i]).sqrt());
            }
        }
    }

    #[test]
    fn slow_sweep_matches_steady_state() {
        let p = reference(0.2);
        let grid = symmetric_grid(2.0, 201).unwrap();
        for model in [ModelKind::Eff3, ModelKind::Full4] {
            let qs = sweep_spectrum(&p, &grid, model).unwrap();
            let slow = swept_spectrum(&p, &grid, model, 30.0 / p.gamma_0).unwrap();
            let peak = qs.s_mag.iter().cloned().fold(0.0, f64::max);
            let dev = qs
                .s_mag
                .iter()
                .zip(&slow.s_mag)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(dev <= 1e-6 * peak, "{model}: {dev:e}");
        }
        let fast = swept_spectrum(&p, &grid, ModelKind::Eff3, 0.05 / p.gamma_0).unwrap();
        let qs = sweep_spectrum(&p, &grid, ModelKind::Eff3).unwrap();
        let lag = qs
            .s_mag
            .iter()
            .zip(&fast.s_mag)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(lag > 1e-3 * qs.s_mag.iter().cloned().fold(0.0, f64::max));
        assert!(swept_spectrum(&p, &grid, ModelKind::Eff3, 0.0).is_err());
    }
}
