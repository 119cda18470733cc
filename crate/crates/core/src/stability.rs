//! Equilibria, Jacobians and the Matignon stability test.
//!
//! An equilibrium `x_e` of `D^q x = f(x)` with `0 < q <= 1` is locally
//! asymptotically stable exactly when every eigenvalue of `J(x_e)` satisfies
//! `|arg lambda| > q pi / 2`. The quantity `(2/pi) min |arg lambda|` is the
//! critical order below which the equilibrium is stable.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::linalg;
use crate::system::{norm2, EquilibriumState, FractionalOrder, FractionalSystem};

/// Default half-width of the boundary band around `q pi / 2`.
pub const BOUNDARY_TOL: f64 = 1e-9;
/// Pivot threshold of the rank test used on boundary eigenvalues.
pub const RANK_PIVOT_TOL: f64 = 1e-10;
/// Imaginary parts below this count as real in [`sign_shortcut`].
pub const REAL_SPECTRUM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    AsymptoticallyStable,
    MarginallyStable,
    Unstable,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::AsymptoticallyStable => "AsymptoticallyStable",
            Verdict::MarginallyStable => "MarginallyStable",
            Verdict::Unstable => "Unstable",
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for Eigenvalue {
    fn from(z: Complex64) -> Self {
        Self { re: z.re, im: z.im }
    }
}

impl From<Eigenvalue> for Complex64 {
    fn from(e: Eigenvalue) -> Self {
        Complex64::new(e.re, e.im)
    }
}

/// Outcome of the Matignon test at one order `q`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub eigenvalues: Vec<Eigenvalue>,
    /// `|arg lambda_i|` in `[0, pi]`, with `arg 0 = 0`.
    pub args_abs: Vec<f64>,
    pub min_arg: f64,
    pub critical_order: f64,
    pub verdict: Verdict,
    pub q_used: f64,
    /// Whether boundary eigenvalues were checked for geometric multiplicity.
    pub multiplicity_checked: bool,
}

/// `|arg z|` with `arg 0 := 0`.
pub fn abs_arg(z: Complex64) -> f64 {
    if z.re == 0.0 && z.im == 0.0 {
        0.0
    } else {
        z.im.atan2(z.re).abs()
    }
}

/// Jacobian of the field at `x`: analytic when the system has one, otherwise
/// central differences with step `1e-6 max(1, |x_i|)`.
pub fn jacobian(system: &FractionalSystem, x: &[f64]) -> Result<DMatrix<f64>> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("Jacobian evaluation point"));
    }
    match system.analytic_jacobian(x) {
        Some(j) => j,
        None => finite_difference_jacobian(system, x),
    }
}

/// Central finite-difference Jacobian, regardless of any analytic one.
pub fn finite_difference_jacobian(system: &FractionalSystem, x: &[f64]) -> Result<DMatrix<f64>> {
    let n = system.dim();
    if x.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: x.len(),
        });
    }
    let mut jac = DMatrix::zeros(n, n);
    let mut xp = x.to_vec();
    for j in 0..n {
        let step = 1e-6 * x[j].abs().max(1.0);
        xp[j] = x[j] + step;
        let fp = system.eval(&xp)?;
        xp[j] = x[j] - step;
        let fm = system.eval(&xp)?;
        xp[j] = x[j];
        for i in 0..n {
            let d = (fp[i] - fm[i]) / (2.0 * step);
            if !d.is_finite() {
                return Err(Error::NonFinite("finite-difference Jacobian"));
            }
            jac[(i, j)] = d;
        }
    }
    Ok(jac)
}

/// Spectrum of a real square matrix; see [`linalg::eigenvalues`].
pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    linalg::eigenvalues(m)
}

/// `(2/pi) min_i |arg lambda_i|`, clamped to `[0, 2]`.
pub fn critical_order(eigs: &[Complex64]) -> f64 {
    let min_arg = eigs.iter().map(|z| abs_arg(*z)).fold(PI, f64::min);
    (2.0 / PI * min_arg).clamp(0.0, 2.0)
}

/// Applies the Matignon inequality `|arg lambda| > q pi / 2` to `eigs`.
///
/// Eigenvalues within `tol` of the boundary make the verdict depend on their
/// geometric multiplicity, which is only checked when `matrix` is given; a
/// boundary eigenvalue whose eigenspace is not one-dimensional is unstable.
pub fn matignon_classify(
    eigs: &[Complex64],
    q: FractionalOrder,
    tol: f64,
    matrix: Option<&DMatrix<f64>>,
) -> Result<StabilityReport> {
    if eigs.is_empty() {
        return Err(invalid("eigenvalues", "empty spectrum"));
    }
    if eigs.iter().any(|z| !z.is_finite()) {
        return Err(Error::NonFinite("eigenvalues"));
    }
    let threshold = q.value() * PI / 2.0;
    let args_abs: Vec<f64> = eigs.iter().map(|z| abs_arg(*z)).collect();
    let min_arg = args_abs.iter().copied().fold(PI, f64::min);

    let any_unstable = args_abs.iter().any(|a| *a < threshold - tol);
    let boundary: Vec<Complex64> = eigs
        .iter()
        .zip(&args_abs)
        .filter(|(_, a)| (**a - threshold).abs() <= tol)
        .map(|(z, _)| *z)
        .collect();

    let mut multiplicity_checked = false;
    let verdict = if any_unstable {
        Verdict::Unstable
    } else if boundary.is_empty() {
        Verdict::AsymptoticallyStable
    } else if let Some(m) = matrix {
        multiplicity_checked = true;
        let simple = boundary
            .iter()
            .all(|z| linalg::geometric_multiplicity(m, *z, RANK_PIVOT_TOL) == 1);
        if simple {
            Verdict::MarginallyStable
        } else {
            Verdict::Unstable
        }
    } else {
        Verdict::MarginallyStable
    };

    Ok(StabilityReport {
        eigenvalues: eigs.iter().copied().map(Eigenvalue::from).collect(),
        args_abs,
        min_arg,
        critical_order: critical_order(eigs),
        verdict,
        q_used: q.value(),
        multiplicity_checked,
    })
}

/// Sign test for real spectra, valid for every `q` in `(0, 1)`: a zero or
/// positive eigenvalue means unstable, an all-negative spectrum means
/// asymptotically stable.
pub fn sign_shortcut(eigs: &[Complex64]) -> Result<Verdict> {
    if eigs.is_empty() {
        return Err(invalid("eigenvalues", "empty spectrum"));
    }
    if eigs.iter().any(|z| z.im.abs() >= REAL_SPECTRUM_TOL) {
        return Err(Error::ComplexSpectrum);
    }
    Ok(if eigs.iter().any(|z| z.re >= 0.0) {
        Verdict::Unstable
    } else {
        Verdict::AsymptoticallyStable
    })
}

const STEP_TOL: f64 = 1e-14;

/// Settings for [`find_equilibria`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
    pub dedup_radius: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 100,
            max_halvings: 30,
            dedup_radius: 1e-8,
        }
    }
}

/// Distinct equilibria found from a set of seeds, plus the seeds that failed.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumSearch {
    pub equilibria: Vec<EquilibriumState>,
    pub failures: Vec<(usize, Error)>,
}

/// Runs damped Newton from every seed and returns the distinct certified
/// roots in seed order.
pub fn find_equilibria(
    system: &FractionalSystem,
    seeds: &[Vec<f64>],
    opts: NewtonOptions,
) -> EquilibriumSearch {
    let mut equilibria: Vec<EquilibriumState> = Vec::new();
    let mut failures = Vec::new();
    for (i, seed) in seeds.iter().enumerate() {
        match newton_from(system, seed, &opts) {
            Ok(eq) => {
                let dup = equilibria.iter().any(|e| {
                    norm2(
                        &e.x.iter()
                            .zip(&eq.x)
                            .map(|(a, b)| a - b)
                            .collect::<Vec<_>>(),
                    ) < opts.dedup_radius
                });
                if !dup {
                    equilibria.push(eq);
                }
            }
            Err(e) => failures.push((i, e)),
        }
    }
    EquilibriumSearch {
        equilibria,
        failures,
    }
}

fn newton_from(
    system: &FractionalSystem,
    seed: &[f64],
    opts: &NewtonOptions,
) -> Result<EquilibriumState> {
    if seed.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("Newton seed"));
    }
    let mut x = seed.to_vec();
    let mut fx = system.eval(&x)?;
    let mut r = norm2(&fx);
    let mut last_step = f64::INFINITY;
    for _ in 0..opts.max_iter {
        // On singular roots the residual is met long before the iterate
        // settles, so keep going until the step itself is negligible.
        if r == 0.0 || (r <= opts.tol && last_step <= STEP_TOL * (1.0 + norm2(&x))) {
            break;
        }
        let j = jacobian(system, &x)?;
        let svd = j.svd(true, true);
        let smax = svd.singular_values.max();
        if !(smax > 0.0) {
            return Err(invalid("jacobian", "singular Jacobian at Newton iterate"));
        }
        let rhs = -DVector::from_column_slice(&fx);
        let dx = svd
            .solve(&rhs, 1e-12 * smax)
            .map_err(|e| invalid("jacobian", e))?;

        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..=opts.max_halvings {
            let trial: Vec<f64> = x
                .iter()
                .zip(dx.iter())
                .map(|(a, d)| a + lambda * d)
                .collect();
            let ft = system.eval(&trial)?;
            let rt = norm2(&ft);
            if rt.is_finite() && rt < r {
                last_step = lambda * dx.norm();
                x = trial;
                fx = ft;
                r = rt;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if r < EquilibriumState::CERTIFIED_RESIDUAL {
        Ok(EquilibriumState { x, residual: r })
    } else {
        Err(Error::UncertifiedEquilibrium(r))
    }
}

/// Jacobian, spectrum and Matignon verdict at a certified equilibrium.
pub fn analyze(
    system: &FractionalSystem,
    eq: &EquilibriumState,
    q: FractionalOrder,
) -> Result<StabilityReport> {
    let eq = EquilibriumState::certify(system, eq.x.clone())?;
    let j = jacobian(system, &eq.x)?;
    let eigs = eigenvalues(&j)?;
    matignon_classify(&eigs, q, BOUNDARY_TOL, Some(&j))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::toda2_controlled;
    use crate::system::{linear_system, make_system};
    use nalgebra::dmatrix;
    use std::collections::BTreeMap;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn q(v: f64) -> FractionalOrder {
        FractionalOrder::new(v).unwrap()
    }

    #[test]
    fn abs_arg_of_zero_is_zero() {
        assert_eq!(abs_arg(c(0.0, 0.0)), 0.0);
        assert_eq!(abs_arg(c(-1.0, 0.0)), PI);
        assert_eq!(abs_arg(c(-1.0, -0.0)), PI);
    }

    #[test]
    fn critical_order_examples() {
        assert_eq!(critical_order(&[c(-1.0, 0.0), c(-3.0, 0.0)]), 2.0);
        assert_eq!(critical_order(&[c(0.0, 0.0), c(-3.0, 0.0)]), 0.0);
        assert!((critical_order(&[c(1.0, 1.0), c(1.0, -1.0)]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn classify_examples() {
        let stable = [c(-0.02, 0.0), c(-0.3, 0.0), c(-0.4, 0.0)];
        let r = matignon_classify(&stable, q(0.8), BOUNDARY_TOL, None).unwrap();
        assert_eq!(r.verdict, Verdict::AsymptoticallyStable);
        assert_eq!(r.critical_order, 2.0);

        for qq in [0.1, 0.5, 0.99] {
            let r = matignon_classify(
                &[c(0.0, 0.0), c(-1.5, 0.0), c(-0.4, 0.0)],
                q(qq),
                BOUNDARY_TOL,
                None,
            )
            .unwrap();
            assert_eq!(r.verdict, Verdict::Unstable);
        }

        let r =
            matignon_classify(&[c(0.0, 1.0), c(0.0, -1.0)], q(0.5), BOUNDARY_TOL, None).unwrap();
        assert_eq!(r.verdict, Verdict::AsymptoticallyStable);
    }

    #[test]
    fn boundary_uses_geometric_multiplicity() {
        let rot = dmatrix![0.0, -1.0; 1.0, 0.0];
        let eigs = eigenvalues(&rot).unwrap();
        let r = matignon_classify(&eigs, q(1.0), BOUNDARY_TOL, Some(&rot)).unwrap();
        assert_eq!(r.verdict, Verdict::MarginallyStable);
        assert!(r.multiplicity_checked);

        // two Jordan blocks on +-i: the boundary eigenvalues are defective
        let m = dmatrix![
            0.0, -1.0, 1.0, 0.0;
            1.0, 0.0, 0.0, 1.0;
            0.0, 0.0, 0.0, -1.0;
            0.0, 0.0, 1.0, 0.0
        ];
        let eigs = vec![c(0.0, 1.0), c(0.0, 1.0), c(0.0, -1.0), c(0.0, -1.0)];
        let r = matignon_classify(&eigs, q(1.0), BOUNDARY_TOL, Some(&m)).unwrap();
        assert_eq!(r.verdict, Verdict::MarginallyStable);

        // two independent +-i pairs: geometric multiplicity two
        let m2 = dmatrix![
            0.0, -1.0, 0.0, 0.0;
            1.0, 0.0, 0.0, 0.0;
            0.0, 0.0, 0.0, -1.0;
            0.0, 0.0, 1.0, 0.0
        ];
        let r = matignon_classify(&eigs, q(1.0), BOUNDARY_TOL, Some(&m2)).unwrap();
        assert_eq!(r.verdict, Verdict::Unstable);
    }

    #[test]
    fn sign_shortcut_examples() {
        let v = |xs: &[f64]| xs.iter().map(|x| c(*x, 0.0)).collect::<Vec<_>>();
        assert_eq!(
            sign_shortcut(&v(&[-0.02, -0.3, -0.4])).unwrap(),
            Verdict::AsymptoticallyStable
        );
        assert_eq!(
            sign_shortcut(&v(&[0.02, -0.3, -1.0])).unwrap(),
            Verdict::Unstable
        );
        assert_eq!(
            sign_shortcut(&v(&[-1.0, -2.0])).unwrap(),
            Verdict::AsymptoticallyStable
        );
        assert_eq!(sign_shortcut(&v(&[0.0, -2.0])).unwrap(), Verdict::Unstable);
        assert_eq!(
            sign_shortcut(&[c(-1.0, 0.5), c(-1.0, -0.5)]),
            Err(Error::ComplexSpectrum)
        );
    }

    #[test]
    fn jacobian_of_toda_family() {
        let sys = toda2_controlled(1.0).unwrap();
        let j = jacobian(&sys, &[0.0, 2.0, 0.0]).unwrap();
        assert_eq!(
            j,
            DMatrix::from_diagonal(&nalgebra::dvector![-2.0, 0.0, -1.0])
        );
        let mut spec: Vec<f64> = eigenvalues(&j).unwrap().iter().map(|z| z.re).collect();
        spec.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((spec[0] + 2.0).abs() < 1e-14 && (spec[1] + 1.0).abs() < 1e-14);
        assert_eq!(spec[2], 0.0);
    }

    #[test]
    fn finite_difference_agrees_with_analytic() {
        let sys = toda2_controlled(1.0).unwrap();
        let x = [0.3, -0.7, 1.1];
        let a = jacobian(&sys, &x).unwrap();
        let fd = finite_difference_jacobian(&sys, &x).unwrap();
        assert!((&a - &fd).norm() <= 1e-5 * a.norm());
    }

    #[test]
    fn linear_jacobian_is_the_matrix() {
        let m = dmatrix![1.0, 2.0; -3.0, 0.5];
        let mc = m.clone();
        let sys = make_system(
            2,
            move |x| (&mc * DVector::from_column_slice(x)).as_slice().to_vec(),
            None,
            BTreeMap::new(),
        )
        .unwrap();
        let j = jacobian(&sys, &[4.0, -7.0]).unwrap();
        assert!((j - m).norm() < 1e-8);
    }

    #[test]
    fn newton_on_scalar_quadratic() {
        let sys = make_system(1, |x| vec![x[0] * x[0] - 1.0], None, BTreeMap::new()).unwrap();
        let found = find_equilibria(
            &sys,
            &[vec![0.5], vec![-0.5], vec![0.9]],
            NewtonOptions::default(),
        );
        let xs: Vec<f64> = found.equilibria.iter().map(|e| e.x[0]).collect();
        assert_eq!(xs.len(), 2);
        assert!((xs[0] - 1.0).abs() < 1e-12);
        assert!((xs[1] + 1.0).abs() < 1e-12);
        assert!(found.failures.is_empty());
    }

    #[test]
    fn newton_on_linear_map_finds_origin() {
        let sys = linear_system(dmatrix![2.0, 1.0; -1.0, 3.0]).unwrap();
        let found = find_equilibria(&sys, &[vec![5.0, -4.0]], NewtonOptions::default());
        assert_eq!(found.equilibria.len(), 1);
        assert!(norm2(&found.equilibria[0].x) < 1e-12);
    }

    #[test]
    fn newton_lands_on_toda_family() {
        let sys = toda2_controlled(1.0).unwrap();
        let seeds = vec![
            vec![0.1, 1.5, 0.1],
            vec![0.05, 1.45, -0.05],
            vec![0.0, 1.5, 0.2],
        ];
        let found = find_equilibria(&sys, &seeds, NewtonOptions::default());
        assert!(found.failures.is_empty());
        for eq in &found.equilibria {
            assert!(eq.residual < 1e-10);
            assert!(eq.x[0].abs() < 1e-5 && eq.x[2].abs() < 1e-9);
        }
        // with x^1 = 0 the Jacobian is singular along the family and the
        // minimum-norm step keeps the seed's m
        let on_axis = find_equilibria(&sys, &[vec![0.0, 1.5, 0.2]], NewtonOptions::default());
        assert!((on_axis.equilibria[0].x[1] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn newton_reports_failure_without_root() {
        let sys = make_system(1, |x| vec![x[0] * x[0] + 1.0], None, BTreeMap::new()).unwrap();
        let found = find_equilibria(&sys, &[vec![0.3]], NewtonOptions::default());
        assert!(found.equilibria.is_empty());
        assert_eq!(found.failures.len(), 1);
    }

    #[test]
    fn analyze_toda_origin_unstable() {
        let sys = toda2_controlled(0.4).unwrap();
        let eq = EquilibriumState::certify(&sys, vec![0.0; 3]).unwrap();
        let r = analyze(&sys, &eq, q(0.5)).unwrap();
        assert_eq!(r.verdict, Verdict::Unstable);
        assert_eq!(r.critical_order, 0.0);
    }

    #[test]
    fn analyze_negative_identity_is_stable() {
        let sys = linear_system(-DMatrix::identity(3, 3)).unwrap();
        let eq = EquilibriumState::certify(&sys, vec![0.0; 3]).unwrap();
        let r = analyze(&sys, &eq, q(0.7)).unwrap();
        assert_eq!(r.verdict, Verdict::AsymptoticallyStable);
        assert_eq!(r.critical_order, 2.0);
    }

    #[test]
    fn analyze_rejects_uncertified_state() {
        let sys = toda2_controlled(0.4).unwrap();
        let bogus = EquilibriumState {
            x: vec![1.0, 0.0, 0.0],
            residual: 0.0,
        };
        assert!(matches!(
            analyze(&sys, &bogus, q(0.5)),
            Err(Error::UncertifiedEquilibrium(_))
        ));
    }
}
