//! Built-in fractional Toda lattice models.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, Matrix3};

use crate::error::{invalid, Result};
use crate::system::{make_system, norm2, FractionalSystem, JacobianField};

/// The `n`-site fractional Toda lattice on `R^{2n-1}`.
///
/// State layout is `(x^1, ..., x^{n-1}, y^1, ..., y^n)` with the boundary
/// convention `x^0 = x^n = 0`:
///
/// ```text
/// D^q x^i = x^i (y^{i+1} - y^i)          i = 1..n-1
/// D^q y^j = 2 [(x^j)^2 - (x^{j-1})^2]    j = 1..n
/// ```
pub fn toda_lattice(n: usize) -> Result<FractionalSystem> {
    if n < 2 {
        return Err(invalid("n", "Toda lattice needs at least 2 sites"));
    }
    let dim = 2 * n - 1;
    let nx = n - 1;
    // x^i for i in 0..=n, zero outside 1..n-1
    let xs = move |s: &[f64], i: usize| if i == 0 || i == n { 0.0 } else { s[i - 1] };

    let field = move |s: &[f64]| {
        let y = &s[nx..];
        let mut out = Vec::with_capacity(dim);
        for i in 1..n {
            out.push(s[i - 1] * (y[i] - y[i - 1]));
        }
        for j in 1..=n {
            let a = xs(s, j);
            let b = xs(s, j - 1);
            out.push(2.0 * (a * a - b * b));
        }
        out
    };

    let jac: JacobianField = Arc::new(move |s: &[f64]| {
        let mut m = DMatrix::zeros(dim, dim);
        let y = &s[nx..];
        for i in 1..n {
            let row = i - 1;
            m[(row, row)] = y[i] - y[i - 1];
            m[(row, nx + i)] = s[i - 1];
            m[(row, nx + i - 1)] = -s[i - 1];
        }
        for j in 1..=n {
            let row = nx + j - 1;
            if j < n {
                m[(row, j - 1)] = 4.0 * s[j - 1];
            }
            if j > 1 {
                m[(row, j - 2)] = -4.0 * s[j - 2];
            }
        }
        m
    });

    let params = BTreeMap::from([("n".to_string(), n as f64)]);
    Ok(make_system(dim, field, Some(jac), params)?.with_name(format!("toda_lattice({n})")))
}

/// Two-site fractional Toda lattice with the linear control `-k y^2`,
/// written in the renamed coordinates `(x^1, x^2, x^3) = (x^1, y^1, y^2)`.
pub fn toda2_controlled(k: f64) -> Result<FractionalSystem> {
    check_k(k)?;
    let field = move |x: &[f64]| {
        let s = x[0] * x[0];
        vec![x[0] * (-x[1] + x[2]), 2.0 * s, -2.0 * s - k * x[2]]
    };
    let jac: JacobianField = Arc::new(move |x: &[f64]| {
        DMatrix::from_row_slice(
            3,
            3,
            &[
                -x[1] + x[2],
                -x[0],
                x[0],
                4.0 * x[0],
                0.0,
                0.0,
                -4.0 * x[0],
                0.0,
                -k,
            ],
        )
    });
    let params = BTreeMap::from([("k".to_string(), k)]);
    Ok(make_system(3, field, Some(jac), params)?.with_name("toda2"))
}

/// The controlled model obtained from [`toda2_controlled`] with feedback
/// `c1 x^1` and `c2 (x^2 - m)` around the equilibrium `(0, m, 0)`.
pub fn toda2_feedback(k: f64, c1: f64, c2: f64, m: f64) -> Result<FractionalSystem> {
    check_k(k)?;
    for (name, v) in [("c1", c1), ("c2", c2), ("m", m)] {
        if !v.is_finite() {
            return Err(invalid(name, "must be finite"));
        }
    }
    let field = move |x: &[f64]| {
        let s = x[0] * x[0];
        vec![
            x[0] * (-x[1] + x[2]) + c1 * x[0],
            2.0 * s + c2 * (x[1] - m),
            -2.0 * s - k * x[2],
        ]
    };
    let jac: JacobianField = Arc::new(move |x: &[f64]| {
        DMatrix::from_row_slice(
            3,
            3,
            &[
                -x[1] + x[2] + c1,
                -x[0],
                x[0],
                4.0 * x[0],
                c2,
                0.0,
                -4.0 * x[0],
                0.0,
                -k,
            ],
        )
    });
    let params = BTreeMap::from([
        ("c1".to_string(), c1),
        ("c2".to_string(), c2),
        ("k".to_string(), k),
        ("m".to_string(), m),
    ]);
    Ok(make_system(3, field, Some(jac), params)?.with_name("toda2_feedback"))
}

/// Matrices `(A, B)` with `f(x) = x^1 A x + x^3 B x` for [`toda2_controlled`].
pub fn toda2_matrix_form(k: f64) -> (Matrix3<f64>, Matrix3<f64>) {
    #[rustfmt::skip]
    let a = Matrix3::new(
        0.0, -1.0, 1.0,
        2.0, 0.0, 0.0,
        -2.0, 0.0, 0.0,
    );
    let mut b = Matrix3::zeros();
    b[(2, 2)] = -k;
    (a, b)
}

/// Lipschitz constant `sqrt(10) + |k| + 2(|x0| + delta)` for the two-site
/// controlled lattice on the box of half-width `delta` around `x0`.
///
/// `sqrt(10)` and `|k|` are the Frobenius norms of `A` and `B`.
pub fn lipschitz_bound(x0: &[f64], delta: f64, k: f64) -> Result<f64> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(invalid("delta", "must be positive and finite"));
    }
    if !k.is_finite() {
        return Err(invalid("k", "must be finite"));
    }
    let (a, b) = toda2_matrix_form(k);
    Ok(a.norm() + b.norm() + 2.0 * (norm2(x0) + delta))
}

fn check_k(k: f64) -> Result<()> {
    if k == 0.0 || !k.is_finite() {
        return Err(invalid("k", "must be a finite nonzero real"));
    }
    Ok(())
}
