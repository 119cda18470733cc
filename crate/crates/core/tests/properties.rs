use std::collections::BTreeMap;

use fracstab::control::classify_shifted;
use fracstab::linalg::{char_poly, poly_abs_scale, poly_eval};
use fracstab::models::toda2_feedback;
use fracstab::stability::{finite_difference_jacobian, BOUNDARY_TOL};
use fracstab::*;
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn order(q: f64) -> FractionalOrder {
    FractionalOrder::new(q).unwrap()
}

fn builtins() -> Vec<FractionalSystem> {
    vec![
        toda_lattice(2).unwrap(),
        toda_lattice(3).unwrap(),
        toda_lattice(5).unwrap(),
        toda2_controlled(0.4).unwrap(),
        toda2_controlled(-1.3).unwrap(),
        toda2_feedback(0.4, -0.02, -0.3, 0.7).unwrap(),
    ]
}

fn rel_close(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> bool {
    (a - b).norm() <= tol * a.norm().max(1.0)
}

#[test]
fn analytic_jacobians_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for sys in builtins() {
        for _ in 0..100 {
            let x: Vec<f64> = (0..sys.dim())
                .map(|_| rng.random_range(-2.0..2.0))
                .collect();
            let a = jacobian(&sys, &x).unwrap();
            let fd = finite_difference_jacobian(&sys, &x).unwrap();
            assert!(rel_close(&a, &fd, 1e-5), "{} at {x:?}", sys.name());
        }
    }
}

#[test]
fn lattice_momentum_field_sums_to_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for n in 2..8 {
        let sys = toda_lattice(n).unwrap();
        for _ in 0..50 {
            let x: Vec<f64> = (0..sys.dim())
                .map(|_| rng.random_range(-3.0..3.0))
                .collect();
            let f = sys.eval(&x).unwrap();
            let s: f64 = f[n - 1..].iter().sum();
            let scale: f64 = f.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
            assert!(s.abs() <= 1e-13 * scale);
        }
    }
}

#[test]
fn toda2_lattice_plus_damping_is_toda2_controlled() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let lattice = toda_lattice(2).unwrap();
    let k = 1.0;
    let controlled = toda2_controlled(k).unwrap();
    let by_hand = make_system(
        3,
        move |x: &[f64]| {
            let s = x[0] * x[0];
            vec![x[0] * (-x[1] + x[2]), 2.0 * s, -2.0 * s - k * x[2]]
        },
        None,
        BTreeMap::new(),
    )
    .unwrap();
    for _ in 0..100 {
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-5.0..5.0)).collect();
        let mut f = lattice.eval(&x).unwrap();
        f[2] -= k * x[2];
        assert_eq!(f, controlled.eval(&x).unwrap());
        assert_eq!(by_hand.eval(&x).unwrap(), controlled.eval(&x).unwrap());
    }
}

#[test]
fn equilibrium_family_is_fixed() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..100 {
        let k = rng.random_range(0.1..3.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let m = rng.random_range(-50.0..50.0);
        let f = toda2_controlled(k).unwrap().eval(&[0.0, m, 0.0]).unwrap();
        assert!(f.iter().all(|v| *v == 0.0));
    }
}

#[test]
fn matrix_form_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..200 {
        let k = rng.random_range(-3.0..3.0);
        if k == 0.0 {
            continue;
        }
        let (a, b) = toda2_matrix_form(k);
        let x = nalgebra::Vector3::new(
            rng.random_range(-4.0..4.0),
            rng.random_range(-4.0..4.0),
            rng.random_range(-4.0..4.0),
        );
        let g = a * x * x[0] + b * x;
        let f = toda2_controlled(k).unwrap().eval(x.as_slice()).unwrap();
        for i in 0..3 {
            assert!((g[i] - f[i]).abs() <= 1e-12 * (1.0 + f[i].abs()));
        }
    }
}

#[test]
fn char_poly_route_agrees_with_schur() {
    // independent oracle: nalgebra's real Schur decomposition
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    for n in 1..=8 {
        for _ in 0..25 {
            let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-2.0..2.0));
            let ours = eigenvalues(&m).unwrap();
            let reference = m.complex_eigenvalues();
            assert_eq!(ours.len(), n);
            let mut used = vec![false; n];
            for z in &ours {
                let (idx, d) = reference
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| !used[*i])
                    .map(|(i, r)| (i, (z - r).norm()))
                    .fold(
                        (usize::MAX, f64::INFINITY),
                        |b, c| if c.1 < b.1 { c } else { b },
                    );
                used[idx] = true;
                assert!(d < 1e-7 * m.norm().max(1.0), "n={n} z={z} d={d}");
            }
            let coeffs = char_poly(&m);
            for z in &ours {
                let p = poly_eval(&coeffs, *z).0.norm();
                assert!(p <= 1e-8 * poly_abs_scale(&coeffs, *z));
            }
        }
    }
}

#[test]
fn eigen_residuals_with_eigenvectors() {
    // ||(M - lambda I) v|| <= 1e-6 ||M|| with v the smallest right singular vector
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for n in 2..=6 {
        for _ in 0..20 {
            let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            for z in eigenvalues(&m).unwrap() {
                let shifted = DMatrix::from_fn(n, n, |i, j| {
                    Complex64::new(m[(i, j)], 0.0)
                        - if i == j { z } else { Complex64::new(0.0, 0.0) }
                });
                let svd = shifted.clone().svd(false, true);
                let vt = svd.v_t.unwrap();
                let (idx, _) =
                    svd.singular_values
                        .iter()
                        .enumerate()
                        .fold(
                            (0, f64::INFINITY),
                            |b, (i, s)| if *s < b.1 { (i, *s) } else { b },
                        );
                let v = vt.row(idx).adjoint();
                let r = (&shifted * v).norm();
                assert!(r <= 1e-6 * m.norm());
            }
        }
    }
}

#[test]
fn feedback_jacobian_is_shifted_by_gains() {
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    let f = toda2_controlled(0.7).unwrap();
    let eq = EquilibriumState::certify(&f, vec![0.0, 0.3, 0.0]).unwrap();
    for _ in 0..100 {
        let gains: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
        let g = make_controlled(&f, &eq, &ControlGains::new(gains.clone()).unwrap()).unwrap();
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mut expected = jacobian(&f, &x).unwrap();
        for i in 0..3 {
            expected[(i, i)] += gains[i];
        }
        assert!((g.jacobian(&x).unwrap() - expected).norm() < 1e-8);
        assert!(g.eval(&eq.x).unwrap().iter().all(|v| v.abs() < 1e-12));
    }
}

#[test]
fn feedback_spectrum_on_family() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    for _ in 0..100 {
        let k = rng.random_range(-2.0..2.0);
        let c1 = rng.random_range(-2.0..2.0);
        let c2 = rng.random_range(-2.0..2.0);
        let m = rng.random_range(-2.0..2.0);
        let sys = toda2_feedback(k, c1, c2, m).unwrap();
        let j = jacobian(&sys, &[0.0, m, 0.0]).unwrap();
        let mut got: Vec<f64> = eigenvalues(&j).unwrap().iter().map(|z| z.re).collect();
        let mut want = vec![c1 - m, c2, -k];
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        want.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-8);
        }
    }
}

#[test]
fn sign_shortcut_agrees_with_matignon_on_real_spectra() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for _ in 0..1000 {
        let n = rng.random_range(1..6);
        let eigs: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.random_range(-3.0..3.0), 0.0))
            .collect();
        let shortcut = sign_shortcut(&eigs).unwrap();
        for q in [0.1, 0.5, 0.9] {
            let r = matignon_classify(&eigs, order(q), BOUNDARY_TOL, None).unwrap();
            assert_eq!(r.verdict, shortcut);
        }
    }
}

#[test]
fn sweep_matches_pointwise_classification() {
    let f = toda2_controlled(0.4).unwrap();
    let eq = EquilibriumState::certify(&f, vec![0.0, 0.25, 0.0]).unwrap();
    let axis = GainAxis::Range {
        min: -1.0,
        max: 1.0,
        count: 11,
    };
    let grid = GainGrid::new(vec![axis.clone(), axis, GainAxis::Fixed(0.0)]);
    let q = order(0.7);
    let a = gain_sweep(&f, &eq, q, &grid, Some(3)).unwrap();
    let b = gain_sweep(&f, &eq, q, &grid, Some(1)).unwrap();
    assert_eq!(a, b);
    let j0 = jacobian(&f, &eq.x).unwrap();
    for p in &a {
        let single = classify_shifted(&j0, &p.gains, q).unwrap();
        assert_eq!(&single, p);
        let ctrl = make_controlled(&f, &eq, &ControlGains::new(p.gains.clone()).unwrap()).unwrap();
        assert_eq!(analyze(ctrl.system(), &eq, q).unwrap().verdict, p.verdict);
    }
}

#[test]
fn scalar_linear_problem_follows_mittag_leffler() {
    let lambda = -1.0;
    let sys = make_system(
        1,
        move |x: &[f64]| vec![lambda * x[0]],
        None,
        BTreeMap::new(),
    )
    .unwrap();
    for q in [0.3, 0.5, 0.8] {
        let traj = integrate(
            &sys,
            order(q),
            &[1.0],
            &IntegrationConfig::new(1e-3, 1.0).unwrap(),
        )
        .unwrap();
        for (t, idx) in [(0.5, 500), (1.0, 1000)] {
            let reference = mittag_leffler(q, lambda * f64::powf(t, q), 1e-16).unwrap();
            assert!(
                (traj.states[idx][0] - reference).abs() < 1e-3,
                "q={q} t={t}"
            );
        }
    }
}

#[test]
fn first_order_linear_system_matches_matrix_exponential() {
    let m = nalgebra::dmatrix![-1.0, 2.0; -2.0, -1.0];
    let sys = fracstab::system::linear_system(m.clone()).unwrap();
    let traj = integrate(
        &sys,
        order(1.0),
        &[1.0, 0.5],
        &IntegrationConfig::new(1e-3, 1.0).unwrap(),
    )
    .unwrap();
    let exact = m.exp() * nalgebra::dvector![1.0, 0.5];
    for i in 0..2 {
        assert!((traj.last_state()[i] - exact[i]).abs() < 1e-4);
    }
}

proptest! {
    #[test]
    fn spectra_are_conjugate_closed(entries in proptest::collection::vec(-3.0f64..3.0, 16)) {
        let m = DMatrix::from_row_slice(4, 4, &entries);
        let eigs = eigenvalues(&m).unwrap();
        for z in &eigs {
            let conj = z.conj();
            prop_assert!(eigs.iter().any(|w| (w - conj).norm() <= 1e-8 * m.norm().max(1.0)));
        }
    }

    #[test]
    fn matignon_is_monotone_in_q(
        re in proptest::collection::vec(-2.0f64..2.0, 1..4),
        im in proptest::collection::vec(0.0f64..2.0, 1..4),
        q in 0.01f64..1.0,
        shrink in 0.0f64..1.0,
    ) {
        let mut eigs = Vec::new();
        for (r, i) in re.iter().zip(&im) {
            eigs.push(Complex64::new(*r, *i));
            eigs.push(Complex64::new(*r, -*i));
        }
        let hi = matignon_classify(&eigs, order(q), BOUNDARY_TOL, None).unwrap();
        if hi.verdict == Verdict::AsymptoticallyStable {
            let lower = (q * shrink).max(1e-6);
            let lo = matignon_classify(&eigs, order(lower), BOUNDARY_TOL, None).unwrap();
            prop_assert_eq!(lo.verdict, Verdict::AsymptoticallyStable);
        }
    }

    #[test]
    fn critical_order_predicts_verdict(
        re in proptest::collection::vec(-2.0f64..2.0, 1..4),
        im in proptest::collection::vec(-2.0f64..2.0, 1..4),
        q in 0.01f64..1.0,
    ) {
        let eigs: Vec<Complex64> = re.iter().zip(&im).map(|(r, i)| Complex64::new(*r, *i)).collect();
        let qt = critical_order(&eigs);
        let margin = 2.0 * BOUNDARY_TOL / std::f64::consts::PI;
        prop_assume!((q - qt).abs() > 2.0 * margin);
        let v = matignon_classify(&eigs, order(q), BOUNDARY_TOL, None).unwrap().verdict;
        prop_assert_eq!(v == Verdict::AsymptoticallyStable, q < qt - margin);
        prop_assert!((0.0..=2.0).contains(&qt));
    }

    #[test]
    fn lipschitz_bound_is_monotone(
        x in proptest::collection::vec(-3.0f64..3.0, 3),
        delta in 0.01f64..3.0,
        k in 0.01f64..3.0,
        grow in 1.0f64..2.0,
    ) {
        let base = lipschitz_bound(&x, delta, k).unwrap();
        prop_assert!(lipschitz_bound(&x, delta * grow, k).unwrap() >= base);
        prop_assert!(lipschitz_bound(&x, delta, -k * grow).unwrap() >= base);
        let scaled: Vec<f64> = x.iter().map(|v| v * grow).collect();
        prop_assert!(lipschitz_bound(&scaled, delta, k).unwrap() >= base);
    }
}
