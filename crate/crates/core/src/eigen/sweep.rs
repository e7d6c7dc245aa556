//! Eigenvalue branches of the effective Hamiltonian along a coupling sweep.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use serde::Serialize;

use super::{decompose, inner};
use crate::error::{Error, Result};
use crate::export::Table;
use crate::model::{build_generalized_hnh, PhysicalParams};
use crate::units::rad_to_khz;

/// Eigenvalues at one coupling, labelled by branch (all in rad/s).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BranchPoint {
    pub j: f64,
    pub e0: Complex64,
    pub e_plus: Complex64,
    pub e_minus: Complex64,
}

/// Splits the sorted eigenvalues into `E0` (largest overlap with the dark
/// state `(|0⟩ − |2⟩)/√2`) and the `E±` pair, with `E+` the member of larger
/// real part (larger imaginary part on a tie).
fn label_by_dark_state(values: &[Complex64], vectors: &[Vec<Complex64>], scale: f64) -> [Complex64; 3] {
    let dark = [
        Complex64::new(FRAC_1_SQRT_2, 0.0),
        Complex64::default(),
        Complex64::new(-FRAC_1_SQRT_2, 0.0),
    ];
    let k0 = (0..3)
        .max_by(|&a, &b| {
            inner(&dark, &vectors[a])
                .norm()
                .total_cmp(&inner(&dark, &vectors[b]).norm())
        })
        .unwrap_or(0);
    let rest: Vec<Complex64> = (0..3).filter(|&k| k != k0).map(|k| values[k]).collect();
    let tie = 1e-12 * scale;
    let (a, b) = (rest[0], rest[1]);
    let a_first = if (a.re - b.re).abs() > tie {
        a.re > b.re
    } else {
        a.im >= b.im
    };
    if a_first {
        [values[k0], a, b]
    } else {
        [values[k0], b, a]
    }
}

/// Relabels `current` to minimize the total distance to `previous`.
fn match_nearest(previous: &[Complex64; 3], current: [Complex64; 3]) -> [Complex64; 3] {
    const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let cost = |p: &[usize; 3]| -> f64 { (0..3).map(|k| (current[p[k]] - previous[k]).norm()).sum() };
    let best = PERMS
        .iter()
        .min_by(|a, b| cost(a).total_cmp(&cost(b)))
        .expect("non-empty permutation table");
    best.map(|k| current[k])
}

/// Diagonalizes the effective Hamiltonian at each coupling in `j_values`
/// (rad/s, increasing), keeping the remaining parameters of `p_template`.
///
/// At zero detuning every point is labelled independently: the dark state
/// identifies `E0` and the pair is ordered by real part. At nonzero detuning
/// there is no such symmetry, so the first point is labelled the same way and
/// later points follow by nearest-neighbour matching.
pub fn eigen_sweep(p_template: &PhysicalParams, j_values: &[f64]) -> Result<Vec<BranchPoint>> {
    p_template.validate()?;
    if j_values.is_empty() {
        return Err(Error::InvalidGrid("coupling grid is empty".into()));
    }
    if j_values.windows(2).any(|w| !(w[1] > w[0])) || j_values.iter().any(|j| !(j.is_finite() && *j >= 0.0)) {
        return Err(Error::InvalidGrid(
            "coupling grid must be non-negative and strictly increasing".into(),
        ));
    }
    let gamma_opt = p_template.gamma_opt();
    let delta = p_template.delta_rf;
    let mut out: Vec<BranchPoint> = Vec::with_capacity(j_values.len());
    for (i, &j) in j_values.iter().enumerate() {
        let point = (|| -> Result<BranchPoint> {
            let m = build_generalized_hnh(j, delta, 0.0, gamma_opt, 0.0)?;
            let d = decompose(&m)?;
            let scale = m.norm().max(f64::MIN_POSITIVE);
            let labelled = match out.last() {
                Some(prev) if delta != 0.0 => match_nearest(
                    &[prev.e0, prev.e_plus, prev.e_minus],
                    [d.values[0], d.values[1], d.values[2]],
                ),
                _ => label_by_dark_state(&d.values, &d.vectors, scale),
            };
            Ok(BranchPoint {
                j,
                e0: labelled[0],
                e_plus: labelled[1],
                e_minus: labelled[2],
            })
        })()
        .map_err(|e| Error::at(i, e))?;
        out.push(point);
    }
    Ok(out)
}

/// Columns `j_khz, re_E0_khz, im_E0_khz, re_Ep_khz, im_Ep_khz, re_Em_khz, im_Em_khz`.
pub fn branches_table(branches: &[BranchPoint]) -> Table {
    let mut t = Table::new([
        "j_khz",
        "re_E0_khz",
        "im_E0_khz",
        "re_Ep_khz",
        "im_Ep_khz",
        "re_Em_khz",
        "im_Em_khz",
    ]);
    for b in branches {
        let mut row = vec![rad_to_khz(b.j)];
        for e in [b.e0, b.e_plus, b.e_minus] {
            row.extend([rad_to_khz(e.re), rad_to_khz(e.im)]);
        }
        t.rows.push(row);
    }
    t
}
