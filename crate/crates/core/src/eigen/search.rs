//! Numerical location of second- and third-order exceptional points.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use super::{decompose, EigenDecomposition};
use crate::error::{Error, Result};
use crate::matrix::ComplexMatrix;
use crate::model::{build_generalized_hnh, PhysicalParams};
use crate::optimize::{golden_section_min, nelder_mead};

const EP2_SCAN_POINTS: usize = 100;

/// Locates the second-order EP of the effective Hamiltonian by minimizing the
/// smallest eigenvalue spacing over `J ∈ (0, 10κγ₀]`.
///
/// The spacing also vanishes as `J → 0` (where `E+` meets `E0`), so the
/// search first scans for an interior local minimum and then refines it by
/// golden-section search.
pub fn find_ep2(p_template: &PhysicalParams) -> Result<f64> {
    p_template.validate()?;
    if p_template.delta_rf != 0.0 {
        return Err(Error::UnsupportedConfiguration(
            "EP search requires zero RF detuning".into(),
        ));
    }
    let upper = 10.0 * p_template.kappa() * p_template.gamma_0;
    if !(upper > 0.0) {
        return Err(Error::BracketFailure(
            "search interval is empty (zero saturation parameter)".into(),
        ));
    }
    let gamma_opt = p_template.gamma_opt();
    let spacing = |j: f64| -> Result<f64> {
        let m = build_generalized_hnh(j, 0.0, 0.0, gamma_opt, 0.0)?;
        Ok(decompose(&m)?.min_pair_distance)
    };

    let grid: Vec<f64> = (1..=EP2_SCAN_POINTS)
        .map(|k| upper * k as f64 / EP2_SCAN_POINTS as f64)
        .collect();
    let values = grid.iter().map(|&j| spacing(j)).collect::<Result<Vec<_>>>()?;
    let best = (1..grid.len() - 1)
        .filter(|&i| values[i] <= values[i - 1] && values[i] <= values[i + 1])
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))
        .ok_or_else(|| Error::BracketFailure("no interior minimum of the eigenvalue spacing".into()))?;

    let (j, _) = golden_section_min(spacing, grid[best - 1], grid[best + 1], 1e-14 * grid[best])?;
    Ok(j)
}

/// Parameter point of the three-decay Hamiltonian (all rates in rad/s).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Ep3Point {
    pub j: f64,
    pub delta_rf: f64,
    pub g0: f64,
    pub g1: f64,
    pub g2: f64,
}

impl Ep3Point {
    fn as_array(&self) -> [f64; 5] {
        [self.j, self.delta_rf, self.g0, self.g1, self.g2]
    }

    fn from_array(a: [f64; 5]) -> Self {
        Self {
            j: a[0],
            delta_rf: a[1],
            g0: a[2],
            g1: a[3],
            g2: a[4],
        }
    }

    pub fn hamiltonian(&self) -> Result<ComplexMatrix> {
        build_generalized_hnh(self.j, self.delta_rf, self.g0, self.g1, self.g2)
    }

    fn decay_scale(&self) -> f64 {
        self.g0.max(self.g1).max(self.g2)
    }
}

/// Closed search intervals; an interval with `lo == hi` pins that parameter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ep3SearchBox {
    pub j: (f64, f64),
    pub delta_rf: (f64, f64),
    pub g0: (f64, f64),
    pub g1: (f64, f64),
    pub g2: (f64, f64),
}

impl Ep3SearchBox {
    fn ranges(&self) -> [(f64, f64); 5] {
        [self.j, self.delta_rf, self.g0, self.g1, self.g2]
    }

    fn validate(&self) -> Result<()> {
        for (lo, hi) in self.ranges() {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::InvalidParameter(format!(
                    "search interval ({lo}, {hi}) is not a finite ordered range"
                )));
            }
        }
        for (lo, _) in [self.g0, self.g1, self.g2] {
            if lo < 0.0 {
                return Err(Error::InvalidParameter("decay ranges must be non-negative".into()));
            }
        }
        Ok(())
    }

    fn scale(&self) -> f64 {
        self.ranges()
            .iter()
            .map(|(lo, hi)| lo.abs().max(hi.abs()))
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Ep3Options {
    /// Success when the pairwise-distance sum is below this multiple of the
    /// largest decay at the optimum.
    pub threshold_rel: f64,
    /// Number of quasi-random simplex starts (the box center is always used).
    pub starts: usize,
    pub max_iter: usize,
}

impl Default for Ep3Options {
    fn default() -> Self {
        Self {
            threshold_rel: 1e-6,
            starts: 24,
            max_iter: 4000,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Ep3Result {
    pub point: Ep3Point,
    /// `|λ0−λ1| + |λ0−λ2| + |λ1−λ2|`.
    pub distance_sum: f64,
    pub pairwise: [f64; 3],
    pub max_vector_overlap: f64,
    pub min_vector_overlap: f64,
}

struct Evaluation {
    objective: f64,
    distance_sum: f64,
    pairwise: [f64; 3],
    max_overlap: f64,
    min_overlap: f64,
}

fn evaluate(point: &Ep3Point, scale: f64) -> Result<Evaluation> {
    let m = point.hamiltonian()?;
    let d: EigenDecomposition = decompose(&m)?;
    let pairs = [(0, 1), (0, 2), (1, 2)];
    let pairwise = pairs.map(|(i, j)| (d.values[i] - d.values[j]).norm());
    let overlaps = pairs.map(|(i, j)| d.overlap(i, j));
    let distance_sum: f64 = pairwise.iter().sum();
    // The overlap penalty separates genuine coalescence from diagonalizable
    // degeneracies such as a scalar matrix.
    let penalty: f64 = overlaps.iter().map(|o| 1.0 - o.min(1.0)).sum();
    Ok(Evaluation {
        objective: distance_sum / scale + penalty,
        distance_sum,
        pairwise,
        max_overlap: overlaps.iter().copied().fold(0.0, f64::max),
        min_overlap: overlaps.iter().copied().fold(1.0, f64::min),
    })
}

/// Searches the box for a point where all three eigenvalues (and eigenvectors)
/// of the three-decay Hamiltonian coalesce.
///
/// Stage one minimizes `Σ|λ_i − λ_j|/scale + Σ(1 − |⟨v_i, v_j⟩|)` by
/// multi-start Nelder–Mead. Stage two polishes the best point with
/// Gauss–Newton on the invariants `tr(A²)` and `det(A)` of the traceless part
/// `A`, which vanish together exactly at a triple eigenvalue.
pub fn find_ep3(search: &Ep3SearchBox, options: &Ep3Options) -> Result<Ep3Result> {
    search.validate()?;
    let ranges = search.ranges();
    let scale = search.scale().max(f64::MIN_POSITIVE);
    let free: Vec<usize> = (0..5).filter(|&k| ranges[k].1 > ranges[k].0).collect();

    let to_point = |u: &[f64]| -> Ep3Point {
        let mut a = ranges.map(|(lo, _)| lo);
        for (slot, &k) in free.iter().enumerate() {
            let (lo, hi) = ranges[k];
            a[k] = lo + u[slot].clamp(0.0, 1.0) * (hi - lo);
        }
        Ep3Point::from_array(a)
    };
    let objective = |u: &[f64]| -> Result<f64> { Ok(evaluate(&to_point(u), scale)?.objective) };

    let mut starts: Vec<Vec<f64>> = vec![vec![0.5; free.len()]];
    for s in 1..=options.starts {
        starts.push((0..free.len()).map(|d| halton(s, PRIMES[d])).collect());
    }

    let mut best: Option<(Vec<f64>, f64)> = None;
    for start in &starts {
        let r = nelder_mead(objective, start, 0.1, 1e-13, options.max_iter)?;
        if best.as_ref().is_none_or(|(_, v)| r.value < *v) {
            best = Some((r.x, r.value));
        }
    }
    let (u_best, _) = best.expect("at least one start");
    let mut point = to_point(&u_best);
    let mut eval = evaluate(&point, scale)?;

    if let Some(polished) = polish_invariants(&point, &free, &ranges, scale)? {
        let e = evaluate(&polished, scale)?;
        if e.objective < eval.objective {
            point = polished;
            eval = e;
        }
    }

    let decay_scale = if point.decay_scale() > 0.0 {
        point.decay_scale()
    } else {
        scale
    };
    let threshold = options.threshold_rel * decay_scale;
    if eval.distance_sum >= threshold {
        return Err(Error::NotFound {
            best: Box::new(point),
            residual: eval.distance_sum,
            threshold,
        });
    }
    Ok(Ep3Result {
        point,
        distance_sum: eval.distance_sum,
        pairwise: eval.pairwise,
        max_vector_overlap: eval.max_overlap,
        min_vector_overlap: eval.min_overlap,
    })
}

fn invariants(point: &Ep3Point, scale: f64) -> Result<DVector<f64>> {
    let m = point.hamiltonian()?;
    let shift = m.trace() / 3.0;
    let a = &m - &ComplexMatrix::identity(3).scale(shift);
    let a2 = (&a * &a).trace() / (scale * scale);
    let det: Complex64 = a.as_matrix().determinant() / (scale * scale * scale);
    Ok(DVector::from_vec(vec![a2.re, a2.im, det.re, det.im]))
}

fn polish_invariants(
    start: &Ep3Point,
    free: &[usize],
    ranges: &[(f64, f64); 5],
    scale: f64,
) -> Result<Option<Ep3Point>> {
    if free.is_empty() {
        return Ok(None);
    }
    let clamp = |a: [f64; 5]| -> [f64; 5] {
        let mut out = a;
        for k in 0..5 {
            out[k] = a[k].clamp(ranges[k].0, ranges[k].1);
        }
        out
    };
    let mut x = start.as_array();
    let mut r = invariants(&Ep3Point::from_array(x), scale)?;
    for _ in 0..60 {
        let rn = r.norm();
        if rn < 1e-16 {
            break;
        }
        let mut jac = DMatrix::<f64>::zeros(4, free.len());
        for (col, &k) in free.iter().enumerate() {
            let h = 1e-7 * (ranges[k].1 - ranges[k].0);
            let mut xp = x;
            let mut xm = x;
            xp[k] += h;
            xm[k] -= h;
            let d = (invariants(&Ep3Point::from_array(xp), scale)? - invariants(&Ep3Point::from_array(xm), scale)?)
                / (2.0 * h);
            jac.set_column(col, &d);
        }
        let Ok(pinv) = jac.pseudo_inverse(1e-12) else {
            break;
        };
        let step = -(pinv * &r);
        let mut t = 1.0;
        let mut improved = false;
        while t > 1e-6 {
            let mut cand = x;
            for (col, &k) in free.iter().enumerate() {
                cand[k] += t * step[col];
            }
            let cand = clamp(cand);
            let rc = invariants(&Ep3Point::from_array(cand), scale)?;
            if rc.norm() < rn {
                x = cand;
                r = rc;
                improved = true;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    Ok(Some(Ep3Point::from_array(x)))
}

const PRIMES: [usize; 5] = [2, 3, 5, 7, 11];

fn halton(mut index: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while index > 0 {
        f /= base as f64;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}
