use nalgebra::linalg::SymmetricEigen;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matrix::{c64, ComplexMatrix};

/// Hermiticity tolerance (absolute, entrywise) for a valid state.
pub const HERMITICITY_TOLERANCE: f64 = 1e-10;
/// Trace tolerance for a valid state.
pub const TRACE_TOLERANCE: f64 = 1e-10;
/// Smallest eigenvalue allowed for a valid state.
pub const POSITIVITY_TOLERANCE: f64 = 1e-9;

/// Deviations of a state from the physical constraints.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Physicality {
    /// `|tr ρ − 1|`.
    pub trace_error: f64,
    /// Largest entry of `|ρ − ρ†|`.
    pub hermiticity_error: f64,
    /// Smallest eigenvalue of the Hermitian part.
    pub min_eigenvalue: f64,
}

impl Physicality {
    pub fn of(m: &ComplexMatrix) -> Self {
        let eig = SymmetricEigen::new(m.hermitian_part().into_matrix());
        Self {
            trace_error: (m.trace() - c64(1.0, 0.0)).norm(),
            hermiticity_error: m.max_abs_diff(&m.adjoint()),
            min_eigenvalue: eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }

    pub fn within(&self, trace: f64, hermiticity: f64, positivity: f64) -> bool {
        self.trace_error <= trace && self.hermiticity_error <= hermiticity && self.min_eigenvalue >= -positivity
    }
}

/// A density matrix. The models use dimensions 3 and 4; any size is accepted.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(ComplexMatrix);

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positive semidefiniteness.
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        Self::checked(m, POSITIVITY_TOLERANCE)
    }

    pub(crate) fn checked(m: ComplexMatrix, positivity: f64) -> Result<Self> {
        if m.dim() == 0 {
            return Err(Error::InvalidState("empty matrix".into()));
        }
        if !m.is_finite() {
            return Err(Error::InvalidState("non-finite entries".into()));
        }
        let phys = Physicality::of(&m);
        if !phys.within(TRACE_TOLERANCE, HERMITICITY_TOLERANCE, positivity) {
            return Err(Error::InvalidState(format!(
                "trace error {:.3e}, hermiticity error {:.3e}, min eigenvalue {:.3e}",
                phys.trace_error, phys.hermiticity_error, phys.min_eigenvalue
            )));
        }
        Ok(Self(m))
    }

    /// Hermitizes and trace-normalizes `m`, then validates it.
    pub(crate) fn normalized(m: &ComplexMatrix, positivity: f64) -> Result<Self> {
        let h = m.hermitian_part();
        let tr = h.trace().re;
        if !(tr.abs() > 0.0 && tr.is_finite()) {
            return Err(Error::InvalidState(format!("cannot normalize a state with trace {tr}")));
        }
        Self::checked(h.scale(c64(1.0 / tr, 0.0)), positivity)
    }

    /// `|k⟩⟨k|`.
    pub fn pure(dim: usize, k: usize) -> Result<Self> {
        if k >= dim {
            return Err(Error::InvalidState(format!(
                "level {k} out of range for dimension {dim}"
            )));
        }
        Self::new(ComplexMatrix::projector(dim, k))
    }

    /// Equal mixture of the three ground sublevels (excited level empty).
    pub fn uniform_ground(dim: usize) -> Result<Self> {
        let diag: Vec<Complex64> = (0..dim)
            .map(|k| c64(if k < 3 { 1.0 / 3.0 } else { 0.0 }, 0.0))
            .collect();
        Self::new(ComplexMatrix::from_diagonal(&diag))
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    /// `ρ_ij`.
    pub fn element(&self, i: usize, j: usize) -> Complex64 {
        self.0[(i, j)]
    }

    pub fn physicality(&self) -> Physicality {
        Physicality::of(&self.0)
    }

    /// The 3×3 ground block renormalized to unit trace.
    pub fn ground_block(&self) -> ComplexMatrix {
        let g = ComplexMatrix::from_fn(3, |i, j| self.0[(i, j)]);
        let tr = g.trace().re;
        if tr > 0.0 {
            g.scale(c64(1.0 / tr, 0.0))
        } else {
            g
        }
    }
}
