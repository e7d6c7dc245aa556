//! Eigenvalue kernels behind [`super::decompose`].
//!
//! 3×3 matrices go through the characteristic cubic; every other dimension
//! uses Hessenberg reduction followed by shifted complex QR. Eigenvectors are
//! null vectors of `M − λI` taken from an SVD.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matrix::{c64, ComplexMatrix};

/// Roots of `λ³ + a λ² + b λ + c`, each polished by Newton steps on the cubic.
pub(crate) fn cubic_roots(a: Complex64, b: Complex64, c: Complex64) -> [Complex64; 3] {
    let shift = a / 3.0;
    let p = b - a * a / 3.0;
    let q = a * a * a * (2.0 / 27.0) - a * b / 3.0 + c;

    // depressed cubic t³ + p t + q = 0
    let disc = (q / 2.0) * (q / 2.0) + (p / 3.0) * (p / 3.0) * (p / 3.0);
    let sq = disc.sqrt();
    let w1 = -q / 2.0 + sq;
    let w2 = -q / 2.0 - sq;
    let w = if w1.norm() >= w2.norm() { w1 } else { w2 };

    let t = if w.norm() == 0.0 {
        // p = q = 0: triple root
        [Complex64::default(); 3]
    } else {
        let u = Complex64::from_polar(w.norm().cbrt(), w.arg() / 3.0);
        let v = -p / (3.0 * u);
        let omega = c64(-0.5, 3f64.sqrt() / 2.0);
        let omega2 = omega.conj();
        [u + v, omega * u + omega2 * v, omega2 * u + omega * v]
    };

    let poly = |x: Complex64| ((x + a) * x + b) * x + c;
    let dpoly = |x: Complex64| (3.0 * x + 2.0 * a) * x + b;
    t.map(|ti| {
        let mut x = ti - shift;
        let mut fx = poly(x).norm();
        for _ in 0..4 {
            let d = dpoly(x);
            if d.norm() == 0.0 || fx == 0.0 {
                break;
            }
            let cand = x - poly(x) / d;
            let fc = poly(cand).norm();
            if fc < fx {
                x = cand;
                fx = fc;
            } else {
                break;
            }
        }
        x
    })
}

/// Eigenvalues of a 3×3 matrix via its characteristic polynomial.
pub(crate) fn eigenvalues_3x3(m: &ComplexMatrix) -> [Complex64; 3] {
    let e = |i: usize, j: usize| m[(i, j)];
    let trace = e(0, 0) + e(1, 1) + e(2, 2);
    let minors = e(0, 0) * e(1, 1) - e(0, 1) * e(1, 0) + e(0, 0) * e(2, 2) - e(0, 2) * e(2, 0) + e(1, 1) * e(2, 2)
        - e(1, 2) * e(2, 1);
    let det = e(0, 0) * (e(1, 1) * e(2, 2) - e(1, 2) * e(2, 1)) - e(0, 1) * (e(1, 0) * e(2, 2) - e(1, 2) * e(2, 0))
        + e(0, 2) * (e(1, 0) * e(2, 1) - e(1, 1) * e(2, 0));
    cubic_roots(-trace, minors, -det)
}

/// Complex Givens rotation `G = [[c, s], [-s̄, c]]` with `G·(a, b)ᵀ = (r, 0)ᵀ`.
fn givens(a: Complex64, b: Complex64) -> (f64, Complex64) {
    let na = a.norm();
    let nb = b.norm();
    if nb == 0.0 {
        return (1.0, Complex64::default());
    }
    if na == 0.0 {
        return (0.0, c64(1.0, 0.0));
    }
    let r = na.hypot(nb);
    (na / r, (a / na) * b.conj() / r)
}

/// Eigenvalues by single-shift QR on the Hessenberg form.
pub(crate) fn eigenvalues_qr(m: &ComplexMatrix, max_iter: usize) -> Result<Vec<Complex64>> {
    let n = m.dim();
    if n == 0 {
        return Ok(Vec::new());
    }
    let scale = m.max_abs();
    if scale == 0.0 {
        return Ok(vec![Complex64::default(); n]);
    }
    let a = m.as_matrix() / c64(scale, 0.0);
    let mut h: DMatrix<Complex64> = nalgebra::linalg::Hessenberg::new(a).h();

    let eps = f64::EPSILON;
    let mut values = vec![Complex64::default(); n];
    let mut hi = n - 1;
    let mut iterations = 0usize;
    let mut since_deflation = 0usize;

    loop {
        if hi == 0 {
            values[0] = h[(0, 0)];
            break;
        }
        // find the start of the active unreduced block
        let mut lo = hi;
        while lo > 0 {
            let sub = h[(lo, lo - 1)].norm();
            let diag = h[(lo - 1, lo - 1)].norm() + h[(lo, lo)].norm();
            if sub <= eps * diag.max(f64::MIN_POSITIVE) || sub < 1e-300 {
                h[(lo, lo - 1)] = Complex64::default();
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            values[hi] = h[(hi, hi)];
            hi -= 1;
            since_deflation = 0;
            continue;
        }

        iterations += 1;
        since_deflation += 1;
        if iterations > max_iter {
            return Err(Error::ConvergenceFailure { iterations: max_iter });
        }

        let shift = if since_deflation % 11 == 10 {
            // exceptional shift to break cycles
            h[(hi, hi)] + c64(h[(hi, hi - 1)].norm() * 0.75, h[(hi, hi - 1)].norm() * 0.25)
        } else {
            wilkinson_shift(h[(hi - 1, hi - 1)], h[(hi - 1, hi)], h[(hi, hi - 1)], h[(hi, hi)])
        };

        for k in lo..=hi {
            h[(k, k)] -= shift;
        }
        let mut rotations = Vec::with_capacity(hi - lo);
        for k in lo..hi {
            let (c, s) = givens(h[(k, k)], h[(k + 1, k)]);
            for j in k..=hi {
                let x = h[(k, j)];
                let y = h[(k + 1, j)];
                h[(k, j)] = x * c + s * y;
                h[(k + 1, j)] = -s.conj() * x + y * c;
            }
            rotations.push((k, c, s));
        }
        for &(k, c, s) in &rotations {
            let last = (k + 2).min(hi);
            for i in lo..=last {
                let x = h[(i, k)];
                let y = h[(i, k + 1)];
                h[(i, k)] = x * c + y * s.conj();
                h[(i, k + 1)] = -x * s + y * c;
            }
        }
        for k in lo..=hi {
            h[(k, k)] += shift;
        }
    }

    Ok(values.into_iter().map(|v| v * scale).collect())
}

/// Eigenvalue of `[[a, b], [c, d]]` closest to `d`.
fn wilkinson_shift(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Complex64 {
    let half_tr = (a + d) / 2.0;
    let det = a * d - b * c;
    let root = (half_tr * half_tr - det).sqrt();
    let l1 = half_tr + root;
    let l2 = half_tr - root;
    if (l1 - d).norm() <= (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

/// Right singular vectors of `M − λI` for the `count` smallest singular values,
/// plus the singular values themselves in ascending order.
pub(crate) fn near_null_vectors(
    m: &ComplexMatrix,
    lambda: Complex64,
    count: usize,
) -> (Vec<DVector<Complex64>>, Vec<f64>) {
    let n = m.dim();
    let shifted = m.as_matrix() - DMatrix::<Complex64>::identity(n, n) * lambda;
    let svd = nalgebra::linalg::SVD::new(shifted, false, true);
    let v_t = svd.v_t.expect("requested V^H");
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let sigmas: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let vectors = order
        .iter()
        .take(count)
        .map(|&i| v_t.row(i).adjoint().into_owned())
        .collect();
    (vectors, sigmas)
}

/// Fixes the global phase so the largest-magnitude component is real positive.
pub(crate) fn normalize_phase(v: &mut DVector<Complex64>) {
    let norm = v.norm();
    if norm == 0.0 {
        return;
    }
    let pivot = v
        .iter()
        .copied()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .unwrap_or_default();
    let phase = if pivot.norm() > 0.0 {
        pivot.conj() / pivot.norm()
    } else {
        c64(1.0, 0.0)
    };
    *v *= phase / norm;
}
