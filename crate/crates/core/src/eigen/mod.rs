//! Complex eigendecomposition of small non-Hermitian matrices, the closed-form
//! spectrum of the effective Hamiltonian at zero RF detuning, and location of
//! exceptional points (EPs).
//!
//! At δ = 0 the effective Hamiltonian has eigenvalues
//!
//! ```text
//! E0 = 0,   E± = −iκγ₀ ± √(2J² − κ²γ₀²)
//! ```
//!
//! so the pair `E±` coalesces at `J_EP = κγ₀/√2`. Below `J_EP` the pair has
//! equal (zero) real parts and split imaginary parts; above it the imaginary
//! parts are equal and the real parts split.

mod search;
mod solver;
mod sweep;

use std::cmp::Ordering;
use std::f64::consts::SQRT_2;
use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matrix::{c64, ComplexMatrix};
use crate::model::PhysicalParams;

pub use search::{find_ep2, find_ep3, Ep3Options, Ep3Point, Ep3Result, Ep3SearchBox};
pub use sweep::{branches_table, eigen_sweep, BranchPoint};

/// Default relative half-width of the band around `J_EP` labelled exceptional.
pub const DEFAULT_EP_TOLERANCE: f64 = 1e-6;

/// Iteration cap per dimension for the QR eigenvalue iteration.
pub const QR_ITERATIONS_PER_DIM: usize = 1000;

// eigenvalues this close (relative to the matrix scale) share a null space
const CLUSTER_TOLERANCE: f64 = 1e-10;
// singular values below this (relative) count towards the geometric multiplicity
const NULL_SINGULAR_TOLERANCE: f64 = 1e-8;
// imaginary parts this close (relative) are treated as equal when sorting
const SORT_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    /// Sorted by descending imaginary part, then ascending real part.
    pub values: Vec<Complex64>,
    /// Unit-norm right eigenvectors, aligned with `values`.
    pub vectors: Vec<Vec<Complex64>>,
    /// Smallest `|λ_i − λ_j|` over distinct pairs.
    pub min_pair_distance: f64,
    /// Largest `|⟨v_i, v_j⟩|` over distinct pairs; approaches 1 at an EP.
    pub max_vector_overlap: f64,
}

impl EigenDecomposition {
    /// Largest `‖M v − λ v‖` over all pairs.
    pub fn residual(&self, m: &ComplexMatrix) -> f64 {
        self.values
            .iter()
            .zip(&self.vectors)
            .map(|(&l, v)| {
                m.mul_vec(v)
                    .iter()
                    .zip(v)
                    .map(|(mv, vi)| (mv - l * vi).norm_sqr())
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }

    pub fn sum(&self) -> Complex64 {
        self.values.iter().sum()
    }

    /// `|⟨v_i, v_j⟩|`.
    pub fn overlap(&self, i: usize, j: usize) -> f64 {
        inner(&self.vectors[i], &self.vectors[j]).norm()
    }
}

pub(crate) fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Eigenvalues and right eigenvectors of a square complex matrix.
///
/// 3×3 inputs use the characteristic cubic; other sizes use shifted QR with
/// an iteration cap of [`QR_ITERATIONS_PER_DIM`]·dim.
pub fn decompose(m: &ComplexMatrix) -> Result<EigenDecomposition> {
    if !m.is_finite() {
        return Err(Error::InvalidParameter("matrix has non-finite entries".into()));
    }
    let n = m.dim();
    let mut values = if n == 3 {
        solver::eigenvalues_3x3(m).to_vec()
    } else {
        solver::eigenvalues_qr(m, QR_ITERATIONS_PER_DIM * n.max(1))?
    };
    let scale = m.norm().max(values.iter().map(|v| v.norm()).fold(0.0, f64::max));
    sort_eigenvalues(&mut values, scale);

    let vectors = eigenvectors(m, &values, scale);
    let mut min_pair_distance = if n < 2 { 0.0 } else { f64::INFINITY };
    let mut max_vector_overlap: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            min_pair_distance = min_pair_distance.min((values[i] - values[j]).norm());
            max_vector_overlap = max_vector_overlap.max(inner(&vectors[i], &vectors[j]).norm());
        }
    }
    Ok(EigenDecomposition {
        values,
        vectors,
        min_pair_distance,
        max_vector_overlap: max_vector_overlap.min(1.0),
    })
}

fn sort_eigenvalues(values: &mut [Complex64], scale: f64) {
    let tol = SORT_TOLERANCE * scale;
    let before = |a: &Complex64, b: &Complex64| -> bool {
        if (a.im - b.im).abs() > tol {
            a.im > b.im
        } else {
            a.re.total_cmp(&b.re) == Ordering::Less
        }
    };
    // insertion sort: the comparator is tolerance based and not a total order
    for i in 1..values.len() {
        let mut k = i;
        while k > 0 && before(&values[k], &values[k - 1]) {
            values.swap(k, k - 1);
            k -= 1;
        }
    }
}

fn eigenvectors(m: &ComplexMatrix, values: &[Complex64], scale: f64) -> Vec<Vec<Complex64>> {
    let n = values.len();
    let mut out: Vec<Option<Vec<Complex64>>> = vec![None; n];
    for i in 0..n {
        if out[i].is_some() {
            continue;
        }
        let cluster: Vec<usize> = (i..n)
            .filter(|&j| out[j].is_none() && (values[j] - values[i]).norm() <= CLUSTER_TOLERANCE * scale)
            .collect();
        let center = cluster.iter().map(|&j| values[j]).sum::<Complex64>() / cluster.len() as f64;
        let (vecs, sigmas) = solver::near_null_vectors(m, center, cluster.len());
        // geometric multiplicity; a defective cluster reuses its single vector
        let multiplicity = sigmas
            .iter()
            .take(cluster.len())
            .filter(|&&s| s <= NULL_SINGULAR_TOLERANCE * scale.max(f64::MIN_POSITIVE))
            .count()
            .max(1);
        for (t, &j) in cluster.iter().enumerate() {
            let mut v = vecs[t.min(multiplicity - 1)].clone();
            solver::normalize_phase(&mut v);
            out[j] = Some(v.iter().copied().collect());
        }
    }
    out.into_iter().map(|v| v.unwrap_or_default()).collect()
}

/// Closed-form eigenvalues of the effective Hamiltonian at δ = 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnalyticSpectrum {
    pub e0: Complex64,
    pub e_plus: Complex64,
    pub e_minus: Complex64,
}

impl AnalyticSpectrum {
    pub fn as_array(&self) -> [Complex64; 3] {
        [self.e0, self.e_plus, self.e_minus]
    }
}

fn require_zero_detuning(p: &PhysicalParams) -> Result<()> {
    if p.delta_rf != 0.0 {
        return Err(Error::UnsupportedConfiguration(format!(
            "closed-form spectrum is only defined at zero RF detuning, got {}",
            p.delta_rf
        )));
    }
    Ok(())
}

/// `E0 = 0`, `E± = −iκγ₀ ± √(2J² − κ²γ₀²)` with the square root taken on the
/// branch with non-negative real part (non-negative imaginary part when the
/// radicand is negative).
pub fn analytic_spectrum(p: &PhysicalParams) -> Result<AnalyticSpectrum> {
    p.validate()?;
    require_zero_detuning(p)?;
    let damping = p.kappa() * p.gamma_0;
    let radicand = 2.0 * p.j().powi(2) - damping.powi(2);
    let root = if radicand >= 0.0 {
        c64(radicand.sqrt(), 0.0)
    } else {
        c64(0.0, (-radicand).sqrt())
    };
    let center = c64(0.0, -damping);
    Ok(AnalyticSpectrum {
        e0: Complex64::default(),
        e_plus: center + root,
        e_minus: center - root,
    })
}

/// EP coupling `J_EP = κγ₀/√2`.
pub fn j_ep(p: &PhysicalParams) -> Result<f64> {
    p.validate()?;
    Ok(p.kappa() * p.gamma_0 / SQRT_2)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PhaseLabel {
    /// `J > J_EP`: equal linewidths, split resonance frequencies.
    PtSymmetricLike,
    /// `J < J_EP`: equal resonance frequencies, split linewidths.
    PtBrokenLike,
    Exceptional,
}

impl fmt::Display for PhaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PhaseLabel::PtSymmetricLike => "PT_SYMMETRIC_LIKE",
            PhaseLabel::PtBrokenLike => "PT_BROKEN_LIKE",
            PhaseLabel::Exceptional => "EXCEPTIONAL",
        })
    }
}

pub fn classify_phase(p: &PhysicalParams, tol_rel: f64) -> Result<PhaseLabel> {
    require_zero_detuning(p)?;
    if !(tol_rel > 0.0 && tol_rel.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "EP tolerance must be positive, got {tol_rel}"
        )));
    }
    let jep = j_ep(p)?;
    let j = p.j();
    Ok(if (j - jep).abs() <= tol_rel * jep {
        PhaseLabel::Exceptional
    } else if j > jep {
        PhaseLabel::PtSymmetricLike
    } else {
        PhaseLabel::PtBrokenLike
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_effective_hnh;
    use crate::units::{khz_to_rad, rad_to_khz};
    use proptest::prelude::*;

    fn reference(j_khz: f64) -> PhysicalParams {
        PhysicalParams::from_saturation(0.3, khz_to_rad(0.7), khz_to_rad(5750.0), khz_to_rad(j_khz), 0.0).unwrap()
    }

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn diagonal_sorted() {
        let m = ComplexMatrix::from_diagonal(&[c64(1.0, 0.0), c64(0.0, 2.0), c64(-3.0, 0.0)]);
        let d = decompose(&m).unwrap();
        assert!(close(d.values[0], c64(0.0, 2.0), 1e-12));
        assert!(close(d.values[1], c64(-3.0, 0.0), 1e-12));
        assert!(close(d.values[2], c64(1.0, 0.0), 1e-12));
        assert!(d.residual(&m) < 1e-12);
        assert!(d.max_vector_overlap < 1e-12);
    }

    #[test]
    fn decoupled_effective_hamiltonian() {
        let p =
            PhysicalParams::from_saturation(0.3, khz_to_rad(0.7), khz_to_rad(5750.0), 0.0, khz_to_rad(1.0)).unwrap();
        let m = build_effective_hnh(&p).unwrap();
        let d = decompose(&m).unwrap();
        let w = khz_to_rad(1.0);
        assert!(close(d.values[0], c64(-w, 0.0), 1e-9 * w));
        assert!(close(d.values[1], c64(w, 0.0), 1e-9 * w));
        assert!(close(d.values[2], c64(0.0, -khz_to_rad(0.42)), 1e-9 * w));
    }

    #[test]
    fn scalar_shift_triple_eigenvalue_keeps_independent_vectors() {
        let g = 3.0;
        let m = crate::model::build_generalized_hnh(0.0, 0.0, g, g, g).unwrap();
        let d = decompose(&m).unwrap();
        for v in &d.values {
            assert!(close(*v, c64(0.0, -g / 2.0), 1e-12));
        }
        assert!(d.max_vector_overlap < 1e-9, "{}", d.max_vector_overlap);
        assert!(d.residual(&m) < 1e-12);
    }

    #[test]
    fn analytic_at_ep_reference_values() {
        let jep = j_ep(&reference(0.1)).unwrap();
        assert!((rad_to_khz(jep) - 0.21 / 2f64.sqrt()).abs() < 1e-12);
        assert!((rad_to_khz(jep) - 0.14849).abs() < 1e-5);
        // rounds to the quoted 0.15 kHz
        assert_eq!((rad_to_khz(jep) * 100.0).round() / 100.0, 0.15);
        let s = analytic_spectrum(&reference(0.1).with_j(jep)).unwrap();
        let expect = c64(0.0, -khz_to_rad(0.21));
        // the square root amplifies rounding in 2J² − κ²γ₀² at the EP itself
        assert!(close(s.e_plus, expect, 1e-6 * expect.norm()));
        assert!(close(s.e_minus, expect, 1e-6 * expect.norm()));
    }

    #[test]
    fn analytic_above_and_below_ep() {
        // J = 0.3 kHz: √(2·0.09 − 0.0441) = √0.1359 = 0.368646...
        let above = analytic_spectrum(&reference(0.3)).unwrap();
        assert!((rad_to_khz(above.e_plus.re) - 0.1359f64.sqrt()).abs() < 1e-12);
        assert!((rad_to_khz(above.e_plus.re) - 0.3687).abs() < 1e-4);
        assert!((rad_to_khz(above.e_minus.re) + 0.3687).abs() < 1e-4);
        assert!((rad_to_khz(above.e_plus.im) + 0.21).abs() < 1e-12);

        // J = 0.1 kHz: √(0.0441 − 0.02) = 0.155242; −0.21 ± 0.155242
        let below = analytic_spectrum(&reference(0.1)).unwrap();
        assert_eq!(below.e_plus.re, 0.0);
        assert!((rad_to_khz(below.e_plus.im) + 0.0548).abs() < 1e-4);
        assert!((rad_to_khz(below.e_minus.im) + 0.3652).abs() < 1e-4);
        assert_eq!(below.e0, Complex64::default());
    }

    #[test]
    fn analytic_requires_zero_detuning() {
        let p = reference(0.1).with_delta_rf(1.0);
        assert!(matches!(analytic_spectrum(&p), Err(Error::UnsupportedConfiguration(_))));
        assert!(matches!(
            classify_phase(&p, 1e-6),
            Err(Error::UnsupportedConfiguration(_))
        ));
    }

    #[test]
    fn j_ep_simple_cases() {
        let p = PhysicalParams::from_saturation(0.0, 1.0, 100.0, 1.0, 0.0).unwrap();
        assert_eq!(j_ep(&p).unwrap(), 0.0);
        let q = PhysicalParams::from_saturation(1.0, khz_to_rad(1.0), khz_to_rad(1e4), 0.0, 0.0).unwrap();
        assert!((rad_to_khz(j_ep(&q).unwrap()) - 1.0 / 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn phase_labels() {
        let jep = j_ep(&reference(0.1)).unwrap();
        let at = |f: f64| classify_phase(&reference(0.1).with_j(jep * f), DEFAULT_EP_TOLERANCE).unwrap();
        assert_eq!(at(2.0), PhaseLabel::PtSymmetricLike);
        assert_eq!(at(1.0 + 1e-9), PhaseLabel::Exceptional);
        assert_eq!(at(0.5), PhaseLabel::PtBrokenLike);
        assert_eq!(PhaseLabel::PtBrokenLike.to_string(), "PT_BROKEN_LIKE");
        assert!(classify_phase(&reference(0.1), 0.0).is_err());
    }

    #[test]
    fn overlap_grows_toward_ep() {
        let jep = j_ep(&reference(0.1)).unwrap();
        for f in [1.0 - 1e-3, 1.0 - 1e-5, 1.0 + 1e-5, 1.0 + 1e-3] {
            let m = build_effective_hnh(&reference(0.1).with_j(jep * f)).unwrap();
            let d = decompose(&m).unwrap();
            assert!(d.max_vector_overlap >= 0.99, "f={f}: {}", d.max_vector_overlap);
            assert!(d.residual(&m) <= 1e-9 * m.norm());
        }
    }

    #[test]
    fn larger_dims_use_qr() {
        let m = ComplexMatrix::from_fn(9, |i, j| {
            c64(((i * 7 + j * 3) % 5) as f64 - 2.0, ((i + j) % 3) as f64 * 0.1)
        });
        let d = decompose(&m).unwrap();
        assert!((d.sum() - m.trace()).norm() <= 1e-9 * m.norm());
        assert!(d.residual(&m) <= 1e-9 * m.norm(), "{}", d.residual(&m));
    }

    #[test]
    fn non_finite_rejected() {
        let mut m = ComplexMatrix::identity(3);
        m[(0, 1)] = c64(f64::NAN, 0.0);
        assert!(decompose(&m).is_err());
    }

    fn arb_params() -> impl Strategy<Value = PhysicalParams> {
        (0.01f64..2.0, 0.1f64..3.0, 0.0f64..2.0).prop_map(|(kappa, g0, j)| {
            PhysicalParams::from_saturation(kappa, khz_to_rad(g0), khz_to_rad(1e4), khz_to_rad(j), 0.0).unwrap()
        })
    }

    proptest! {
        #[test]
        fn trace_identity(p in arb_params(), d in -3.0f64..3.0) {
            let p = p.with_delta_rf(khz_to_rad(d));
            let m = build_effective_hnh(&p).unwrap();
            let dec = decompose(&m).unwrap();
            let expect = c64(0.0, -p.gamma_opt() / 2.0);
            prop_assert!((dec.sum() - expect).norm() <= 1e-9 * m.norm());
            prop_assert!(dec.residual(&m) <= 1e-9 * m.norm());
        }

        #[test]
        fn branch_structure(p in arb_params()) {
            let s = analytic_spectrum(&p).unwrap();
            let jep = j_ep(&p).unwrap();
            let scale = p.kappa() * p.gamma_0;
            if p.j() < jep {
                prop_assert!(s.e_plus.re.abs() < 1e-9 * scale);
                prop_assert!(s.e_minus.re.abs() < 1e-9 * scale);
                prop_assert!(s.e_plus.im > s.e_minus.im);
            } else {
                prop_assert!((s.e_plus.im + scale).abs() <= 1e-9 * scale);
                prop_assert!((s.e_minus.im + scale).abs() <= 1e-9 * scale);
                prop_assert!((s.e_plus.re + s.e_minus.re).abs() <= 1e-9 * scale);
            }
        }
    }
}
