//! Derivative-free scalar and simplex minimizers.

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section minimization of `f` on `[a, b]`.
///
/// Stops once the bracket is narrower than `x_tol` (absolute). Returns the
/// best abscissa seen and its value.
pub fn golden_section_min<E>(
    mut f: impl FnMut(f64) -> Result<f64, E>,
    mut a: f64,
    mut b: f64,
    x_tol: f64,
) -> Result<(f64, f64), E> {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    // Each step shrinks the bracket by 1/φ; 200 steps is far beyond f64 resolution.
    for _ in 0..200 {
        if (b - a).abs() <= x_tol {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc <= fd { (c, fc) } else { (d, fd) })
}

/// Bisection on a predicate that is false at `lo` and true at `hi`.
/// Returns the final `(lo, hi)` bracket.
pub fn bisect<E>(
    mut pred: impl FnMut(f64) -> Result<bool, E>,
    mut lo: f64,
    mut hi: f64,
    x_tol: f64,
) -> Result<(f64, f64), E> {
    for _ in 0..200 {
        if (hi - lo).abs() <= x_tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if pred(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((lo, hi))
}

#[derive(Clone, Debug)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
}

/// Nelder–Mead simplex minimization with standard coefficients.
///
/// `step` is the initial edge length along each coordinate. Terminates when
/// the simplex diameter drops below `x_tol` or after `max_iter` iterations.
pub fn nelder_mead<E>(
    mut f: impl FnMut(&[f64]) -> Result<f64, E>,
    x0: &[f64],
    step: f64,
    x_tol: f64,
    max_iter: usize,
) -> Result<SimplexResult, E> {
    let n = x0.len();
    if n == 0 {
        let value = f(x0)?;
        return Ok(SimplexResult {
            x: Vec::new(),
            value,
            iterations: 0,
        });
    }
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), f(x0)?));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += step;
        let v = f(&x)?;
        simplex.push((x, v));
    }

    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let diameter = simplex[1..]
            .iter()
            .map(|(x, _)| {
                x.iter()
                    .zip(&simplex[0].0)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if diameter <= x_tol {
            break;
        }

        let centroid: Vec<f64> = (0..n)
            .map(|k| simplex[..n].iter().map(|(x, _)| x[k]).sum::<f64>() / n as f64)
            .collect();
        let worst = simplex[n].clone();
        let along = |t: f64| -> Vec<f64> { centroid.iter().zip(&worst.0).map(|(c, w)| c + t * (c - w)).collect() };

        let xr = along(1.0);
        let fr = f(&xr)?;
        if fr < simplex[0].1 {
            let xe = along(2.0);
            let fe = f(&xe)?;
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < worst.1 {
            let xc = along(0.5);
            let fc = f(&xc)?;
            (xc, fc)
        } else {
            let xc = along(-0.5);
            let fc = f(&xc)?;
            (xc, fc)
        };
        if fc < worst.1.min(fr) {
            simplex[n] = (xc, fc);
            continue;
        }
        // shrink toward the best vertex
        let best = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let x: Vec<f64> = vertex
                .0
                .iter()
                .zip(&best)
                .map(|(xi, bi)| bi + 0.5 * (xi - bi))
                .collect();
            let v = f(&x)?;
            *vertex = (x, v);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, value) = simplex.swap_remove(0);
    Ok(SimplexResult { x, value, iterations })
}
