//! Small dense eigenvalue problems through the characteristic polynomial.
//!
//! The spectrum of an `n x n` real matrix (`n <= 16`) is obtained by
//! forming `det(lambda I - M)` with the Faddeev-LeVerrier recursion and
//! finding all of its roots simultaneously with the Aberth-Ehrlich
//! iteration. Clusters of nearly equal roots are merged and refined on the
//! appropriate derivative of the polynomial, which recovers multiple
//! eigenvalues to full precision instead of the `eps^(1/m)` the plain
//! iteration gives.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};

pub const MAX_EIGEN_DIM: usize = 16;
pub const MAX_SWEEPS: usize = 500;

/// Eigenvalues with `|lambda| <= ZERO_SNAP * scale` are reported as exactly 0.
pub const ZERO_SNAP: f64 = 1e-12;
/// Imaginary parts with `|Im| <= REAL_SNAP * scale` are dropped.
pub const REAL_SNAP: f64 = 1e-12;
/// Roots closer than `CLUSTER_RADIUS * scale` are treated as one multiple root.
const CLUSTER_RADIUS: f64 = 1e-5;

/// Coefficients `c_0..c_n` (ascending, `c_n = 1`) of `det(lambda I - M)`.
pub fn char_poly(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut coeffs = vec![0.0; n + 1];
    coeffs[n] = 1.0;
    let mut mk = DMatrix::<f64>::zeros(n, n);
    for k in 1..=n {
        // M_k = A M_{k-1} + c_{n-k+1} I
        mk = m * &mk;
        for i in 0..n {
            mk[(i, i)] += coeffs[n - k + 1];
        }
        let am = m * &mk;
        coeffs[n - k] = -am.trace() / k as f64;
    }
    coeffs
}

/// Evaluates `p` and `p'` at `z` by Horner's rule.
pub fn poly_eval(coeffs: &[f64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

/// `sum |c_k| |z|^k`, the natural scale for a residual `|p(z)|`.
pub fn poly_abs_scale(coeffs: &[f64], z: Complex64) -> f64 {
    let r = z.norm();
    coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c.abs())
}

fn derivative(coeffs: &[f64]) -> Vec<f64> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, c)| k as f64 * c)
        .collect()
}

/// All roots of the real polynomial `coeffs` (ascending order, nonzero leading
/// coefficient) by Aberth-Ehrlich iteration.
pub fn poly_roots(coeffs: &[f64]) -> Result<Vec<Complex64>> {
    let mut coeffs = coeffs.to_vec();
    while coeffs.len() > 1 && *coeffs.last().unwrap() == 0.0 {
        coeffs.pop();
    }
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("polynomial coefficients"));
    }
    let lead = *coeffs.last().unwrap();
    if coeffs.len() == 1 {
        return Ok(Vec::new());
    }
    let monic: Vec<f64> = coeffs.iter().map(|c| c / lead).collect();

    // exact zero roots
    let zeros = monic.iter().take_while(|c| **c == 0.0).count();
    let reduced = &monic[zeros..];
    let mut roots = vec![Complex64::new(0.0, 0.0); zeros];
    let deg = reduced.len() - 1;
    match deg {
        0 => return Ok(roots),
        1 => {
            roots.push(Complex64::new(-reduced[0], 0.0));
            return Ok(roots);
        }
        _ => {}
    }

    let mut z = initial_guesses(reduced);
    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut max_rel = 0.0f64;
        for i in 0..deg {
            let (p, dp) = poly_eval(reduced, z[i]);
            if p.norm() == 0.0 {
                continue;
            }
            let ratio = p / dp;
            let mut repulsion = Complex64::new(0.0, 0.0);
            for (j, zj) in z.iter().enumerate() {
                if j != i {
                    repulsion += (z[i] - zj).inv();
                }
            }
            let step = ratio / (Complex64::new(1.0, 0.0) - ratio * repulsion);
            if step.is_finite() {
                z[i] -= step;
                max_rel = max_rel.max(step.norm() / z[i].norm().max(1e-300));
            }
        }
        if max_rel < 1e-15 {
            converged = true;
            break;
        }
    }
    if !converged {
        // Multiple roots stall the relative-step test at ~sqrt(eps); accept
        // the iterate if residuals are small, otherwise report failure.
        let ok = z
            .iter()
            .all(|zi| poly_eval(reduced, *zi).0.norm() <= 1e-8 * poly_abs_scale(reduced, *zi));
        if !ok {
            return Err(Error::EigenNonConvergence(MAX_SWEEPS));
        }
    }

    for zi in z.iter_mut() {
        newton_polish(reduced, zi);
    }
    let z = refine_clusters(reduced, z);
    roots.extend(z);
    Ok(roots)
}

fn initial_guesses(monic: &[f64]) -> Vec<Complex64> {
    let deg = monic.len() - 1;
    // Cauchy upper bound and a Fujiwara-style lower radius
    let upper = 1.0 + monic[..deg].iter().map(|c| c.abs()).fold(0.0, f64::max);
    let radius = (monic[0].abs()).powf(1.0 / deg as f64).clamp(1e-3, upper);
    let center = -monic[deg - 1] / deg as f64;
    (0..deg)
        .map(|k| {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / deg as f64 + 0.4;
            Complex64::new(center, 0.0) + Complex64::from_polar(radius, theta)
        })
        .collect()
}

fn newton_polish(coeffs: &[f64], z: &mut Complex64) {
    for _ in 0..3 {
        let (p, dp) = poly_eval(coeffs, *z);
        if dp.norm() == 0.0 {
            return;
        }
        let next = *z - p / dp;
        if !next.is_finite() || poly_eval(coeffs, next).0.norm() >= p.norm() {
            return;
        }
        *z = next;
    }
}

/// Merges clusters of nearly coincident roots and refines each merged root
/// as a simple root of the `(m - 1)`-th derivative.
fn refine_clusters(coeffs: &[f64], roots: Vec<Complex64>) -> Vec<Complex64> {
    let scale = roots.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let radius = CLUSTER_RADIUS * scale;
    let n = roots.len();
    let mut label: Vec<usize> = (0..n).collect();
    fn find(label: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while label[r] != r {
            r = label[r];
        }
        label[i] = r;
        r
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (roots[i] - roots[j]).norm() < radius {
                let (a, b) = (find(&mut label, i), find(&mut label, j));
                if a != b {
                    label[b] = a;
                }
            }
        }
    }
    let mut out = roots.clone();
    for root in 0..n {
        let members: Vec<usize> = (0..n).filter(|&i| find(&mut label, i) == root).collect();
        if members.len() < 2 {
            continue;
        }
        let mult = members.len();
        let mean = members.iter().map(|&i| roots[i]).sum::<Complex64>() / mult as f64;
        let mut d = coeffs.to_vec();
        for _ in 0..mult - 1 {
            d = derivative(&d);
        }
        let mut z = mean;
        for _ in 0..50 {
            let (p, dp) = poly_eval(&d, z);
            if dp.norm() == 0.0 {
                break;
            }
            let step = p / dp;
            if !step.is_finite() {
                break;
            }
            z -= step;
            if step.norm() <= 1e-16 * z.norm().max(1e-300) {
                break;
            }
        }
        // keep the merged value only if it is at least as good as the mean
        let better = |w: Complex64| poly_eval(coeffs, w).0.norm();
        let pick = if z.is_finite() && (z - mean).norm() < radius && better(z) <= better(mean) {
            z
        } else {
            mean
        };
        for &i in &members {
            out[i] = pick;
        }
    }
    out
}

/// Eigenvalues of a real square matrix, with multiplicity, sorted by
/// descending real part then descending imaginary part.
///
/// Values within [`ZERO_SNAP`] of the origin (relative to `max(1, ||M||_F)`)
/// are reported as exactly zero, and near-real values are made real; complex
/// values are paired with their conjugates.
pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: m.ncols(),
        });
    }
    if n == 0 {
        return Err(invalid("matrix", "empty matrix"));
    }
    if n > MAX_EIGEN_DIM {
        return Err(invalid(
            "matrix",
            format!("dimension {n} exceeds {MAX_EIGEN_DIM}"),
        ));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix"));
    }
    let coeffs = char_poly(m);
    let roots = poly_roots(&coeffs)?;
    let scale = m.norm().max(1.0);
    Ok(clean_spectrum(roots, scale))
}

fn clean_spectrum(mut roots: Vec<Complex64>, scale: f64) -> Vec<Complex64> {
    for z in roots.iter_mut() {
        if z.norm() <= ZERO_SNAP * scale {
            *z = Complex64::new(0.0, 0.0);
        } else if z.im.abs() <= REAL_SNAP * scale {
            *z = Complex64::new(z.re, 0.0);
        }
    }
    // symmetrize conjugate pairs
    let mut upper: Vec<Complex64> = roots.iter().copied().filter(|z| z.im > 0.0).collect();
    let mut lower: Vec<Complex64> = roots.iter().copied().filter(|z| z.im < 0.0).collect();
    let mut out: Vec<Complex64> = roots.iter().copied().filter(|z| z.im == 0.0).collect();
    if upper.len() == lower.len() {
        let key = |z: &Complex64| (z.re, z.im.abs());
        upper.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
        lower.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
        for (u, l) in upper.iter().zip(&lower) {
            let re = 0.5 * (u.re + l.re);
            let im = 0.5 * (u.im - l.im);
            out.push(Complex64::new(re, im));
            out.push(Complex64::new(re, -im));
        }
    } else {
        out.extend(upper);
        out.extend(lower);
    }
    out.sort_by(|a, b| {
        b.re.partial_cmp(&a.re)
            .unwrap()
            .then(b.im.partial_cmp(&a.im).unwrap())
    });
    out
}

/// Numerical rank of a complex matrix by Gaussian elimination with partial
/// pivoting; pivots below `threshold * max(1, max |a_ij|)` count as zero.
pub fn complex_rank(rows: usize, cols: usize, data: &[Complex64], threshold: f64) -> usize {
    let mut a = data.to_vec();
    let scale = a.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let tol = threshold * scale;
    let mut rank = 0;
    for col in 0..cols {
        if rank == rows {
            break;
        }
        let (piv, piv_abs) =
            (rank..rows)
                .map(|r| (r, a[r * cols + col].norm()))
                .fold(
                    (rank, -1.0),
                    |best, cur| if cur.1 > best.1 { cur } else { best },
                );
        if piv_abs <= tol {
            continue;
        }
        for c in 0..cols {
            a.swap(rank * cols + c, piv * cols + c);
        }
        let p = a[rank * cols + col];
        for r in (rank + 1)..rows {
            let factor = a[r * cols + col] / p;
            if factor.norm() == 0.0 {
                continue;
            }
            for c in col..cols {
                let v = a[rank * cols + c];
                a[r * cols + c] -= factor * v;
            }
        }
        rank += 1;
    }
    rank
}

/// Dimension of the kernel of `M - lambda I`.
pub fn geometric_multiplicity(m: &DMatrix<f64>, lambda: Complex64, threshold: f64) -> usize {
    let n = m.nrows();
    let mut data = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let mut v = Complex64::new(m[(i, j)], 0.0);
            if i == j {
                v -= lambda;
            }
            data.push(v);
        }
    }
    n - complex_rank(n, n, &data, threshold)
}
