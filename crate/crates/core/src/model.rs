//! Physical parameters and Hamiltonians of the driven four-level system.
//!
//! Basis order is `(|0⟩, |1⟩, |2⟩, |3⟩)`: three Zeeman sublevels of the ground
//! state coupled by an RF field, and one excited state `|3⟩` reached from `|1⟩`
//! by the probe laser. All rates are angular frequencies in rad/s.

use std::f64::consts::SQRT_2;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{c64, ComplexMatrix};
use crate::units::{khz_to_rad, rad_to_khz};

/// Γ must exceed every other rate by this factor for adiabatic elimination of
/// the excited state to be considered valid.
pub const SEPARATION_FACTOR: f64 = 50.0;

const SQRT_3: f64 = 1.732_050_807_568_877_2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    /// Excited-state spontaneous decay rate Γ.
    pub gamma_big: f64,
    /// Ground-sublevel relaxation rate γ₀.
    pub gamma_0: f64,
    /// Bare optical Rabi frequency Ω₀.
    pub omega_0: f64,
    /// Bare RF Rabi frequency J₀.
    pub j_0: f64,
    /// RF detuning δ.
    pub delta_rf: f64,
    /// Optical detuning Δ.
    pub delta_opt: f64,
}

impl PhysicalParams {
    pub fn new(gamma_big: f64, gamma_0: f64, omega_0: f64, j_0: f64, delta_rf: f64, delta_opt: f64) -> Result<Self> {
        let p = Self {
            gamma_big,
            gamma_0,
            omega_0,
            j_0,
            delta_rf,
            delta_opt,
        };
        p.validate()?;
        Ok(p)
    }

    /// Parameterizes the probe strength through the saturation parameter
    /// κ = Ω²/(Γγ₀) instead of Ω₀. `j` is the effective RF Rabi frequency.
    pub fn from_saturation(kappa: f64, gamma_0: f64, gamma_big: f64, j: f64, delta_rf: f64) -> Result<Self> {
        if !(kappa.is_finite() && kappa >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "saturation parameter must be finite and non-negative, got {kappa}"
            )));
        }
        let omega = (kappa * gamma_big * gamma_0).sqrt();
        Self::new(
            gamma_big,
            gamma_0,
            2.0 * SQRT_3 * omega,
            2.0 * SQRT_2 * j,
            delta_rf,
            0.0,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("gamma_big", self.gamma_big),
            ("gamma_0", self.gamma_0),
            ("omega_0", self.omega_0),
            ("j_0", self.j_0),
            ("delta_rf", self.delta_rf),
            ("delta_opt", self.delta_opt),
        ];
        if let Some((name, v)) = fields.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("{name} is not finite ({v})")));
        }
        if self.gamma_big <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "gamma_big must be positive, got {}",
                self.gamma_big
            )));
        }
        if self.gamma_0 <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "gamma_0 must be positive, got {}",
                self.gamma_0
            )));
        }
        if self.omega_0 < 0.0 || self.j_0 < 0.0 {
            return Err(Error::InvalidParameter("Rabi frequencies must be non-negative".into()));
        }
        Ok(())
    }

    /// Effective optical Rabi frequency Ω = Ω₀/(2√3).
    pub fn omega(&self) -> f64 {
        self.omega_0 / (2.0 * SQRT_3)
    }

    /// Effective RF Rabi frequency J = J₀/(2√2).
    pub fn j(&self) -> f64 {
        self.j_0 / (2.0 * SQRT_2)
    }

    /// Optical-pumping decay of `|1⟩`, γ_opt = 4Ω²/Γ.
    pub fn gamma_opt(&self) -> f64 {
        4.0 * self.omega().powi(2) / self.gamma_big
    }

    /// Saturation parameter κ = Ω²/(Γγ₀).
    pub fn kappa(&self) -> f64 {
        self.omega().powi(2) / (self.gamma_big * self.gamma_0)
    }

    /// True when Γ dominates every other rate by [`SEPARATION_FACTOR`].
    pub fn scales_separated(&self) -> bool {
        let fastest_other = [
            self.omega(),
            self.j(),
            self.delta_rf.abs(),
            self.delta_opt.abs(),
            self.gamma_0,
        ]
        .into_iter()
        .fold(0.0, f64::max);
        self.gamma_big >= SEPARATION_FACTOR * fastest_other
    }

    /// Same system with effective RF coupling `j`.
    pub fn with_j(mut self, j: f64) -> Self {
        self.j_0 = 2.0 * SQRT_2 * j;
        self
    }

    pub fn with_delta_rf(mut self, delta_rf: f64) -> Self {
        self.delta_rf = delta_rf;
        self
    }

    /// Same Γ and γ₀, probe strength rescaled to saturation parameter `kappa`.
    pub fn with_kappa(self, kappa: f64) -> Result<Self> {
        let mut p = Self::from_saturation(kappa, self.gamma_0, self.gamma_big, self.j(), self.delta_rf)?;
        p.delta_opt = self.delta_opt;
        Ok(p)
    }
}

/// JSON parameter document. All values are ν/2π in kHz.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    pub gamma_big_khz: f64,
    pub gamma0_khz: f64,
    pub omega0_khz: f64,
    pub j0_khz: f64,
    pub delta_rf_khz: f64,
    pub delta_opt_khz: f64,
}

impl ParamsConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_params(&self) -> Result<PhysicalParams> {
        PhysicalParams::new(
            khz_to_rad(self.gamma_big_khz),
            khz_to_rad(self.gamma0_khz),
            khz_to_rad(self.omega0_khz),
            khz_to_rad(self.j0_khz),
            khz_to_rad(self.delta_rf_khz),
            khz_to_rad(self.delta_opt_khz),
        )
    }
}

impl From<&PhysicalParams> for ParamsConfig {
    fn from(p: &PhysicalParams) -> Self {
        Self {
            gamma_big_khz: rad_to_khz(p.gamma_big),
            gamma0_khz: rad_to_khz(p.gamma_0),
            omega0_khz: rad_to_khz(p.omega_0),
            j0_khz: rad_to_khz(p.j_0),
            delta_rf_khz: rad_to_khz(p.delta_rf),
            delta_opt_khz: rad_to_khz(p.delta_opt),
        }
    }
}

/// Converts an RF field amplitude to the bare RF Rabi frequency J₀.
///
/// The default proportionality comes from the static-field calibration
/// 0.65 G ↔ 453 kHz Zeeman splitting; callers with a measured RF calibration
/// should supply their own.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldCalibration {
    pub khz_per_mg: f64,
}

impl Default for FieldCalibration {
    fn default() -> Self {
        Self {
            khz_per_mg: 453.0 / 650.0,
        }
    }
}

impl FieldCalibration {
    /// J₀/2π in kHz for an RF amplitude in mG.
    pub fn j0_khz(&self, b_rf_mg: f64) -> f64 {
        self.khz_per_mg * b_rf_mg
    }

    pub fn b_rf_mg(&self, j0_khz: f64) -> f64 {
        j0_khz / self.khz_per_mg
    }
}

/// Rotating-frame Hamiltonian of the full four-level system.
pub fn build_full_hamiltonian(p: &PhysicalParams) -> Result<ComplexMatrix> {
    p.validate()?;
    let (d, dd, j, w) = (p.delta_rf, p.delta_opt, p.j(), p.omega());
    ComplexMatrix::from_real_rows(&[
        vec![-d, j, 0.0, 0.0],
        vec![j, 0.0, j, -w],
        vec![0.0, j, d, 0.0],
        vec![0.0, -w, 0.0, -dd],
    ])
}

/// Effective non-Hermitian Hamiltonian of the ground manifold after the
/// excited state is eliminated. Only defined at zero optical detuning.
pub fn build_effective_hnh(p: &PhysicalParams) -> Result<ComplexMatrix> {
    p.validate()?;
    if p.delta_opt != 0.0 {
        return Err(Error::UnsupportedConfiguration(format!(
            "effective Hamiltonian requires zero optical detuning, got {}",
            p.delta_opt
        )));
    }
    if !p.scales_separated() {
        log::warn!(
            "gamma_big = {:.3e} rad/s is not {}x larger than the other rates; \
             the effective Hamiltonian may be inaccurate",
            p.gamma_big,
            SEPARATION_FACTOR
        );
    }
    Ok(hnh_matrix(p.j(), p.delta_rf, [0.0, p.gamma_opt(), 0.0]))
}

/// Three-level Hamiltonian in which each ground sublevel carries its own
/// effective decay `g_k` (diagonal `-i g_k / 2`).
///
/// This is the minimal extension that allows all three eigenvalues to
/// coalesce; it reduces to [`build_effective_hnh`] for `g0 = g2 = 0`.
pub fn build_generalized_hnh(j: f64, delta_rf: f64, g0: f64, g1: f64, g2: f64) -> Result<ComplexMatrix> {
    for (name, g) in [("g0", g0), ("g1", g1), ("g2", g2)] {
        if !(g.is_finite() && g >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "decay {name} must be finite and non-negative, got {g}"
            )));
        }
    }
    if !(j.is_finite() && delta_rf.is_finite()) {
        return Err(Error::InvalidParameter("coupling and detuning must be finite".into()));
    }
    Ok(hnh_matrix(j, delta_rf, [g0, g1, g2]))
}

fn hnh_matrix(j: f64, d: f64, decays: [f64; 3]) -> ComplexMatrix {
    let z = Complex64::default();
    let jc = c64(j, 0.0);
    ComplexMatrix::from_fn(3, |r, c| match (r, c) {
        (0, 0) => c64(-d, -decays[0] / 2.0),
        (1, 1) => c64(0.0, -decays[1] / 2.0),
        (2, 2) => c64(d, -decays[2] / 2.0),
        (0, 1) | (1, 0) | (1, 2) | (2, 1) => jc,
        _ => z,
    })
}
