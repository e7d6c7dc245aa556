//! Lindblad master equation for the four-level system and its effective
//! three-level reduction.
//!
//! Density matrices are vectorized column-major, `vec(ρ)[i + j·d] = ρ_ij`, so
//! that `vec(AρB) = (Bᵀ ⊗ A) vec(ρ)`. In this convention
//!
//! ```text
//! L = −i(I ⊗ H − Hᵀ ⊗ I) + Σ_k r_k (C̄_k ⊗ C_k − ½ I ⊗ C_k†C_k − ½ (C_k†C_k)ᵀ ⊗ I)
//! ```
//!
//! Decay channels:
//!
//! * full model: spontaneous emission `|g⟩⟨3|` at Γ/3 into each ground sublevel;
//! * effective model: optical pumping `|g⟩⟨1|` at γ_opt/3 into each ground
//!   sublevel, which reproduces the `−iγ_opt/2` diagonal of the effective
//!   Hamiltonian and returns the pumped population to the ground manifold;
//! * both: ground relaxation by population exchange `|g′⟩⟨g|` between every
//!   ordered pair of ground sublevels, optionally with extra dephasing
//!   `|g⟩⟨g|`, see [`Relaxation`].

mod density;
mod evolve;

use std::fmt;
use std::str::FromStr;

use nalgebra::linalg::SVD;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{c64, ComplexMatrix};
use crate::model::{build_full_hamiltonian, PhysicalParams};

pub use density::{DensityMatrix, Physicality, HERMITICITY_TOLERANCE, POSITIVITY_TOLERANCE, TRACE_TOLERANCE};
pub use evolve::{
    evolve, evolve_sampled, validate_elimination, validate_elimination_with, EliminationOptions, EliminationReport,
    Trajectory, ELIMINATION_THRESHOLD, STABILITY_FACTOR,
};

/// Null-space threshold: the smallest singular value must not exceed this
/// fraction of `‖L‖`.
pub const STATIONARY_TOLERANCE: f64 = 1e-8;
/// Uniqueness threshold: the second-smallest singular value must exceed this
/// fraction of `‖L‖`.
pub const UNIQUENESS_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// Four levels including the excited state.
    Full4,
    /// Three ground sublevels with the excited state eliminated.
    Eff3,
}

impl ModelKind {
    pub fn dim(self) -> usize {
        match self {
            ModelKind::Full4 => 4,
            ModelKind::Eff3 => 3,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Full4 => "full4",
            ModelKind::Eff3 => "eff3",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "full4" => Ok(ModelKind::Full4),
            "eff3" => Ok(ModelKind::Eff3),
            other => Err(Error::InvalidParameter(format!(
                "unknown model '{other}' (expected full4 or eff3)"
            ))),
        }
    }
}

/// Ground-relaxation channel strengths in units of γ₀.
///
/// A ground coherence decays at `(2·exchange + dephasing)·γ₀`; the default
/// (`exchange = 0.5`, `dephasing = 0`) makes that exactly γ₀.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Relaxation {
    /// Rate of each ordered population-exchange jump `|g′⟩⟨g|`.
    pub exchange: f64,
    /// Rate of each projector jump `|g⟩⟨g|`.
    pub dephasing: f64,
}

impl Default for Relaxation {
    fn default() -> Self {
        Self {
            exchange: 0.5,
            dephasing: 0.0,
        }
    }
}

impl Relaxation {
    /// Decay rate of a ground coherence in units of γ₀.
    pub fn coherence_rate(&self) -> f64 {
        2.0 * self.exchange + self.dephasing
    }
}

/// One Lindblad channel: jump operator and its rate.
#[derive(Clone, Debug, PartialEq)]
pub struct Decay {
    pub jump: ComplexMatrix,
    pub rate: f64,
}

impl Decay {
    pub fn new(jump: ComplexMatrix, rate: f64) -> Self {
        Self { jump, rate }
    }
}

/// Superoperator acting on column-major vectorized density matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct Liouvillian {
    matrix: ComplexMatrix,
    dim: usize,
}

impl Liouvillian {
    /// Dimension of the underlying Hilbert space.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.matrix.norm()
    }

    /// `L[ρ]` as a matrix.
    pub fn apply(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        if rho.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: rho.dim(),
            });
        }
        ComplexMatrix::unvectorize(&self.matrix.mul_vec(&rho.vectorize()))
    }
}

pub fn build_liouvillian(h: &ComplexMatrix, decays: &[Decay]) -> Result<Liouvillian> {
    let d = h.dim();
    if let Some(bad) = decays.iter().find(|c| c.jump.dim() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: bad.jump.dim(),
        });
    }
    if let Some(bad) = decays.iter().find(|c| !(c.rate.is_finite() && c.rate >= 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "decay rate must be finite and non-negative, got {}",
            bad.rate
        )));
    }
    if !h.is_finite() {
        return Err(Error::InvalidParameter("Hamiltonian has non-finite entries".into()));
    }
    let id = ComplexMatrix::identity(d);
    let minus_i = c64(0.0, -1.0);
    let mut l = (id.kron(h) - h.transpose().kron(&id)).scale(minus_i);
    for c in decays {
        if c.rate == 0.0 {
            continue;
        }
        let cdc = &c.jump.adjoint() * &c.jump;
        let term = c.jump.conj().kron(&c.jump)
            - id.kron(&cdc).scale(c64(0.5, 0.0))
            - cdc.transpose().kron(&id).scale(c64(0.5, 0.0));
        l = l + term.scale(c64(c.rate, 0.0));
    }
    Ok(Liouvillian { matrix: l, dim: d })
}

fn ground_relaxation(dim: usize, gamma_0: f64, relaxation: &Relaxation) -> Vec<Decay> {
    let mut out = Vec::new();
    for from in 0..3 {
        for to in 0..3 {
            if from != to {
                out.push(Decay::new(
                    ComplexMatrix::transition(dim, to, from),
                    relaxation.exchange * gamma_0,
                ));
            }
        }
    }
    if relaxation.dephasing > 0.0 {
        for g in 0..3 {
            out.push(Decay::new(
                ComplexMatrix::projector(dim, g),
                relaxation.dephasing * gamma_0,
            ));
        }
    }
    out
}

/// Decay channels with the default ground relaxation.
pub fn default_decay_set(p: &PhysicalParams, model: ModelKind) -> Result<Vec<Decay>> {
    decay_set(p, model, &Relaxation::default())
}

pub fn decay_set(p: &PhysicalParams, model: ModelKind, relaxation: &Relaxation) -> Result<Vec<Decay>> {
    p.validate()?;
    if !(relaxation.exchange >= 0.0 && relaxation.dephasing >= 0.0)
        || !(relaxation.exchange.is_finite() && relaxation.dephasing.is_finite())
    {
        return Err(Error::InvalidParameter(
            "relaxation strengths must be finite and non-negative".into(),
        ));
    }
    let dim = model.dim();
    let (source, rate) = match model {
        ModelKind::Full4 => (3, p.gamma_big / 3.0),
        ModelKind::Eff3 => (1, p.gamma_opt() / 3.0),
    };
    let mut out: Vec<Decay> = (0..3)
        .map(|g| Decay::new(ComplexMatrix::transition(dim, g, source), rate))
        .collect();
    out.extend(ground_relaxation(dim, p.gamma_0, relaxation));
    Ok(out)
}

/// Hermitian Hamiltonian driving the coherent part of the given model. For
/// the effective model this is the Hermitian part of the non-Hermitian
/// Hamiltonian; the pumping loss enters through the decay set.
pub fn model_hamiltonian(p: &PhysicalParams, model: ModelKind) -> Result<ComplexMatrix> {
    match model {
        ModelKind::Full4 => build_full_hamiltonian(p),
        ModelKind::Eff3 => {
            p.validate()?;
            if p.delta_opt != 0.0 {
                return Err(Error::UnsupportedConfiguration(format!(
                    "effective model requires zero optical detuning, got {}",
                    p.delta_opt
                )));
            }
            crate::model::build_generalized_hnh(p.j(), p.delta_rf, 0.0, 0.0, 0.0)
        }
    }
}

/// Liouvillian of the given model with the default decay set.
pub fn model_liouvillian(p: &PhysicalParams, model: ModelKind) -> Result<Liouvillian> {
    model_liouvillian_with(p, model, &Relaxation::default())
}

pub fn model_liouvillian_with(p: &PhysicalParams, model: ModelKind, relaxation: &Relaxation) -> Result<Liouvillian> {
    build_liouvillian(&model_hamiltonian(p, model)?, &decay_set(p, model, relaxation)?)
}

/// Stationary state from the null space of `L`.
///
/// The right singular vector of the smallest singular value is reshaped,
/// Hermitized and trace-normalized. Errors when no singular value is below
/// [`STATIONARY_TOLERANCE`]·‖L‖, or when the second one is not above
/// [`UNIQUENESS_TOLERANCE`]·‖L‖ (several decoupled stationary sectors).
pub fn steady_state(l: &Liouvillian) -> Result<DensityMatrix> {
    let norm = l.norm();
    let svd = SVD::new(l.matrix().as_matrix().clone(), false, true);
    let v_t = svd.v_t.expect("requested V^H");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
    let sigma_min = svd.singular_values[order[0]];
    let sigma_2 = order.get(1).map_or(f64::INFINITY, |&k| svd.singular_values[k]);
    if sigma_min > STATIONARY_TOLERANCE * norm {
        return Err(Error::NoStationaryState { sigma_min, norm });
    }
    if !(sigma_2 > UNIQUENESS_TOLERANCE * norm) {
        return Err(Error::DegenerateSteadyState { sigma_2, norm });
    }
    let v: Vec<_> = v_t.row(order[0]).iter().map(|x| x.conj()).collect();
    DensityMatrix::normalized(&ComplexMatrix::unvectorize(&v)?, POSITIVITY_TOLERANCE)
}

/// Steady state of the given model with the default decay set.
pub fn model_steady_state(p: &PhysicalParams, model: ModelKind) -> Result<DensityMatrix> {
    steady_state(&model_liouvillian(p, model)?)
}
