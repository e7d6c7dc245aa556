//! Fixed-step time evolution and the adiabatic-elimination check.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use super::{model_liouvillian_with, DensityMatrix, Liouvillian, ModelKind, Relaxation};
use crate::error::{Error, Result};
use crate::export::Table;
use crate::matrix::{c64, ComplexMatrix};
use crate::model::PhysicalParams;
use crate::units::s_to_ms;

/// Largest allowed `dt·‖L‖`.
pub const STABILITY_FACTOR: f64 = 0.1;
/// Smallest eigenvalue allowed for a trajectory sample.
pub const SAMPLE_POSITIVITY_TOLERANCE: f64 = 1e-7;
/// Largest entry of `|ρ − ρ†|` allowed along a trajectory.
pub const SAMPLE_HERMITICITY_TOLERANCE: f64 = 1e-8;
/// Trace drift allowed per unit of `‖L‖·t` (and at least this much in total).
pub const TRACE_DRIFT_TOLERANCE: f64 = 1e-8;
/// Peak-normalized coherence deviation below which elimination passes.
pub const ELIMINATION_THRESHOLD: f64 = 0.05;

#[derive(Clone, Debug)]
pub struct Trajectory {
    /// Sample times in seconds, starting at 0.
    pub times: Vec<f64>,
    /// Hermitized, trace-normalized samples.
    pub states: Vec<DensityMatrix>,
    /// Largest `|tr ρ − 1|` of the raw integrated state.
    pub max_trace_drift: f64,
    /// Largest entry of `|ρ − ρ†|` of the raw integrated state.
    pub max_hermiticity_error: f64,
}

impl Trajectory {
    /// Ground-subspace elements: columns `t_ms`, then `re_rho_ij` for every
    /// `i ≤ j < 3`, then `im_rho_ij`. Raw elements, not renormalized.
    pub fn to_table(&self) -> Table {
        self.table(3)
    }

    /// Same layout over every level of the state.
    pub fn to_table_all(&self) -> Table {
        self.table(self.states.first().map_or(0, DensityMatrix::dim))
    }

    fn table(&self, levels: usize) -> Table {
        let d = levels.min(self.states.first().map_or(0, DensityMatrix::dim));
        let pairs: Vec<(usize, usize)> = (0..d).flat_map(|i| (i..d).map(move |j| (i, j))).collect();
        let mut cols = vec!["t_ms".to_string()];
        cols.extend(pairs.iter().map(|(i, j)| format!("re_rho_{i}{j}")));
        cols.extend(pairs.iter().map(|(i, j)| format!("im_rho_{i}{j}")));
        let mut t = Table::new(cols);
        for (time, rho) in self.times.iter().zip(&self.states) {
            let mut row = vec![s_to_ms(*time)];
            row.extend(pairs.iter().map(|&(i, j)| rho.element(i, j).re));
            row.extend(pairs.iter().map(|&(i, j)| rho.element(i, j).im));
            t.rows.push(row);
        }
        t
    }
}

/// One classical RK4 step for `ẋ = Lx` is multiplication by the degree-4
/// Taylor polynomial of `exp(hL)`.
fn rk4_propagator(l: &DMatrix<Complex64>, h: f64) -> DMatrix<Complex64> {
    let n = l.nrows();
    let hl = l * c64(h, 0.0);
    let mut term = DMatrix::<Complex64>::identity(n, n);
    let mut out = term.clone();
    for k in 1..=4 {
        term = &term * &hl * c64(1.0 / k as f64, 0.0);
        out += &term;
    }
    out
}

fn matrix_power(m: &DMatrix<Complex64>, mut k: usize) -> DMatrix<Complex64> {
    let n = m.nrows();
    let mut result = DMatrix::<Complex64>::identity(n, n);
    let mut base = m.clone();
    while k > 0 {
        if k & 1 == 1 {
            result = &result * &base;
        }
        k >>= 1;
        if k > 0 {
            base = &base * &base;
        }
    }
    result
}

/// Integrates `vec(ρ̇) = L vec(ρ)` with fixed-step RK4 and records every step.
///
/// Requires `dt ≤ 0.1/‖L‖` and `t_final ≥ dt`. The step is shortened slightly
/// when needed so that the last sample lands on `t_final`.
pub fn evolve(l: &Liouvillian, rho0: &DensityMatrix, t_final: f64, dt: f64) -> Result<Trajectory> {
    check_step(l, t_final, dt)?;
    let steps = (t_final / dt).ceil() as usize;
    run(l, rho0, t_final, steps, steps)
}

/// Like [`evolve`], but records only `samples + 1` equally spaced states
/// (including the initial one). Between samples the RK4 step map is applied
/// as a precomputed power, so long trajectories cost one matrix–vector
/// product per sample.
pub fn evolve_sampled(
    l: &Liouvillian,
    rho0: &DensityMatrix,
    t_final: f64,
    dt: f64,
    samples: usize,
) -> Result<Trajectory> {
    check_step(l, t_final, dt)?;
    if samples == 0 {
        return Err(Error::InvalidParameter("at least one sample is required".into()));
    }
    let per_sample = (t_final / samples as f64 / dt).ceil().max(1.0) as usize;
    run(l, rho0, t_final, samples, per_sample * samples)
}

fn check_step(l: &Liouvillian, t_final: f64, dt: f64) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite() && t_final.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "time step {dt} and duration {t_final} must be positive and finite"
        )));
    }
    let norm = l.norm();
    if norm > 0.0 {
        let bound = STABILITY_FACTOR / norm;
        if dt > bound {
            return Err(Error::StabilityViolation { dt, bound });
        }
    }
    if t_final < dt {
        return Err(Error::InvalidParameter(format!(
            "duration {t_final} is shorter than the step {dt}"
        )));
    }
    Ok(())
}

fn run(l: &Liouvillian, rho0: &DensityMatrix, t_final: f64, samples: usize, steps: usize) -> Result<Trajectory> {
    if rho0.dim() != l.dim() {
        return Err(Error::DimensionMismatch {
            expected: l.dim(),
            found: rho0.dim(),
        });
    }
    let per_sample = steps / samples;
    let h = t_final / steps as f64;
    let stride = matrix_power(&rk4_propagator(l.matrix().as_matrix(), h), per_sample);
    let drift_bound = TRACE_DRIFT_TOLERANCE * (l.norm() * t_final).max(1.0);

    let mut v = DVector::from_vec(rho0.matrix().vectorize());
    let mut next = v.clone();
    let mut times = Vec::with_capacity(samples + 1);
    let mut states = Vec::with_capacity(samples + 1);
    times.push(0.0);
    states.push(rho0.clone());
    let mut max_trace_drift: f64 = 0.0;
    let mut max_hermiticity_error: f64 = 0.0;
    for s in 1..=samples {
        next.gemv(c64(1.0, 0.0), &stride, &v, c64(0.0, 0.0));
        std::mem::swap(&mut v, &mut next);
        let raw = ComplexMatrix::unvectorize(v.as_slice())?;
        let drift = (raw.trace() - c64(1.0, 0.0)).norm();
        let herm = raw.max_abs_diff(&raw.adjoint());
        max_trace_drift = max_trace_drift.max(drift);
        max_hermiticity_error = max_hermiticity_error.max(herm);
        if drift > drift_bound || herm > SAMPLE_HERMITICITY_TOLERANCE {
            return Err(Error::InvalidState(format!(
                "integration drifted at sample {s}: trace {drift:.3e}, hermiticity {herm:.3e}"
            )));
        }
        times.push(t_final * s as f64 / samples as f64);
        states.push(DensityMatrix::normalized(&raw, SAMPLE_POSITIVITY_TOLERANCE).map_err(|e| Error::at(s, e))?);
    }
    Ok(Trajectory {
        times,
        states,
        max_trace_drift,
        max_hermiticity_error,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EliminationOptions {
    /// Number of comparison times after `t = 0`.
    pub samples: usize,
    /// Initial ground level; `None` starts from the equal ground mixture.
    pub initial_level: Option<usize>,
    #[serde(skip)]
    pub relaxation: Relaxation,
}

impl Default for EliminationOptions {
    fn default() -> Self {
        Self {
            samples: 400,
            initial_level: None,
            relaxation: Relaxation::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EliminationReport {
    /// Largest ground-coherence difference divided by the peak coherence
    /// magnitude of either model (absolute when both stay below 1e-12).
    pub max_deviation: f64,
    pub max_abs_deviation: f64,
    pub peak_coherence: f64,
    /// Largest ground-population difference (informational).
    pub max_population_deviation: f64,
    pub scales_separated: bool,
    pub t_final: f64,
    pub pass: bool,
}

/// Evolves the full and effective models from the same initial ground state
/// and compares the ground coherences `ρ_01, ρ_02, ρ_12` over `[0, t_final]`.
/// The full-model ground block is renormalized after tracing out `|3⟩`.
///
/// Returns a failing report rather than an error when Γ does not dominate the
/// other rates; detecting that breakdown is the purpose of the check.
pub fn validate_elimination(p: &PhysicalParams, t_final: f64) -> Result<EliminationReport> {
    validate_elimination_with(p, t_final, &EliminationOptions::default())
}

pub fn validate_elimination_with(
    p: &PhysicalParams,
    t_final: f64,
    options: &EliminationOptions,
) -> Result<EliminationReport> {
    p.validate()?;
    if !(t_final > 0.0 && t_final.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "duration must be positive, got {t_final}"
        )));
    }
    let initial = |dim: usize| match options.initial_level {
        Some(k) if k < 3 => DensityMatrix::pure(dim, k),
        Some(k) => Err(Error::InvalidParameter(format!(
            "initial level {k} is not a ground sublevel"
        ))),
        None => DensityMatrix::uniform_ground(dim),
    };
    let trajectory = |model: ModelKind| -> Result<Trajectory> {
        let l = model_liouvillian_with(p, model, &options.relaxation)?;
        let dt = (STABILITY_FACTOR / l.norm()).min(t_final);
        evolve_sampled(&l, &initial(model.dim())?, t_final, dt, options.samples)
    };
    let full = trajectory(ModelKind::Full4)?;
    let eff = trajectory(ModelKind::Eff3)?;

    let pairs = [(0, 1), (0, 2), (1, 2)];
    let mut max_abs: f64 = 0.0;
    let mut peak: f64 = 0.0;
    let mut pop: f64 = 0.0;
    for (f, e) in full.states.iter().zip(&eff.states) {
        let g = f.ground_block();
        for &(i, j) in &pairs {
            max_abs = max_abs.max((g[(i, j)] - e.element(i, j)).norm());
            peak = peak.max(g[(i, j)].norm()).max(e.element(i, j).norm());
        }
        for k in 0..3 {
            pop = pop.max((g[(k, k)] - e.element(k, k)).norm());
        }
    }
    let max_deviation = if peak > 1e-12 { max_abs / peak } else { max_abs };
    Ok(EliminationReport {
        max_deviation,
        max_abs_deviation: max_abs,
        peak_coherence: peak,
        max_population_deviation: pop,
        scales_separated: p.scales_separated(),
        t_final,
        pass: max_deviation <= ELIMINATION_THRESHOLD,
    })
}
