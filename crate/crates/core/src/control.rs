//! Linear feedback stabilization of an equilibrium.
//!
//! Given an equilibrium `x_e` of `D^q x = f(x)` and gains `c`, the controlled
//! system is
//!
//! ```text
//! D^q x^i = f_i(x) + c_i (x^i - x_e^i)
//! ```
//!
//! The feedback vanishes at `x_e`, so `x_e` stays an equilibrium, while the
//! Jacobian there becomes `J(x_e) + diag(c)`. Gains are then chosen so the
//! shifted spectrum passes the Matignon test.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::integrator::{integrate, IntegrationConfig, Termination, Trajectory};
use crate::stability::{self, jacobian, matignon_classify, StabilityReport, Verdict, BOUNDARY_TOL};
use crate::system::{
    norm2, ControlGains, EquilibriumState, FractionalOrder, FractionalSystem, JacobianField,
};

/// Largest number of grid points accepted by [`gain_sweep`].
pub const MAX_GRID_POINTS: usize = 1_000_000;

/// A system with diagonal linear feedback around one of its equilibria.
#[derive(Debug, Clone)]
pub struct ControlledSystem {
    base: FractionalSystem,
    equilibrium: EquilibriumState,
    gains: ControlGains,
    closed_loop: FractionalSystem,
}

impl ControlledSystem {
    pub fn base(&self) -> &FractionalSystem {
        &self.base
    }

    pub fn equilibrium(&self) -> &EquilibriumState {
        &self.equilibrium
    }

    pub fn gains(&self) -> &ControlGains {
        &self.gains
    }

    /// The closed-loop field `g` as a plain system.
    pub fn system(&self) -> &FractionalSystem {
        &self.closed_loop
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.closed_loop.eval(x)
    }

    pub fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        jacobian(&self.closed_loop, x)
    }
}

/// Attaches feedback `c_i (x^i - x_e^i)` to `system`.
///
/// Zero gains are allowed and leave the corresponding coordinate uncontrolled.
pub fn make_controlled(
    system: &FractionalSystem,
    equilibrium: &EquilibriumState,
    gains: &ControlGains,
) -> Result<ControlledSystem> {
    let n = system.dim();
    for len in [equilibrium.dim(), gains.len()] {
        if len != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: len,
            });
        }
    }
    let equilibrium = EquilibriumState::certify(system, equilibrium.x.clone())?;

    let xe = equilibrium.x.clone();
    let c = gains.as_slice().to_vec();
    let base_field = system.field_fn().clone();
    let field = {
        let xe = xe.clone();
        let c = c.clone();
        Arc::new(move |x: &[f64]| {
            let mut out = base_field(x);
            for i in 0..out.len() {
                out[i] += c[i] * (x[i] - xe[i]);
            }
            out
        })
    };

    // J_g = J_f + diag(c), with J_f analytic when available
    let jac: JacobianField = match system.jacobian_fn() {
        Some(base_jac) => {
            let base_jac = base_jac.clone();
            let c = c.clone();
            Arc::new(move |x: &[f64]| {
                let mut m = base_jac(x);
                for i in 0..c.len() {
                    m[(i, i)] += c[i];
                }
                m
            })
        }
        None => {
            let base = system.clone();
            let c = c.clone();
            Arc::new(move |x: &[f64]| {
                let mut m = stability::finite_difference_jacobian(&base, x)
                    .unwrap_or_else(|_| DMatrix::from_element(c.len(), c.len(), f64::NAN));
                for i in 0..c.len() {
                    m[(i, i)] += c[i];
                }
                m
            })
        }
    };

    let mut params = system.params().clone();
    for (i, ci) in c.iter().enumerate() {
        params.insert(format!("c{}", i + 1), *ci);
    }
    let closed_loop = FractionalSystem::new(n, field, Some(jac), params)?
        .with_name(format!("{}+feedback", system.name()));

    Ok(ControlledSystem {
        base: system.clone(),
        equilibrium,
        gains: gains.clone(),
        closed_loop,
    })
}

/// Closed-form verdict for the controlled two-site Toda lattice at
/// `e_m = (0, m, 0)`, from the spectrum `{c1 - m, c2, -k}`.
///
/// Returns the verdict, valid for all `q` in `(0, 1)`, and the three
/// eigenvalues as witness.
pub fn toda2_prop41_classify(k: f64, c1: f64, c2: f64, m: f64) -> Result<(Verdict, [f64; 3])> {
    for (name, v) in [("k", k), ("c1", c1), ("c2", c2)] {
        if v == 0.0 || !v.is_finite() {
            return Err(invalid(name, "must be a finite nonzero real"));
        }
    }
    if !m.is_finite() {
        return Err(invalid("m", "must be finite"));
    }
    let witness = [c1 - m, c2, -k];
    let verdict = if k > 0.0 && c2 < 0.0 && m > c1 {
        Verdict::AsymptoticallyStable
    } else {
        // k > 0, c2 < 0, m <= c1; k > 0, c2 > 0; or k < 0
        Verdict::Unstable
    };
    Ok((verdict, witness))
}

/// Values taken by one gain coordinate in a sweep.
#[derive(Debug, Clone, PartialEq)]
pub enum GainAxis {
    Fixed(f64),
    /// `count` evenly spaced values from `min` to `max` inclusive.
    Range {
        min: f64,
        max: f64,
        count: usize,
    },
}

impl GainAxis {
    pub fn values(&self) -> Vec<f64> {
        match *self {
            GainAxis::Fixed(v) => vec![v],
            GainAxis::Range { min, max, count } => match count {
                0 => Vec::new(),
                1 => vec![min],
                _ => (0..count)
                    .map(|i| min + (max - min) * i as f64 / (count - 1) as f64)
                    .collect(),
            },
        }
    }

    fn len(&self) -> usize {
        match self {
            GainAxis::Fixed(_) => 1,
            GainAxis::Range { count, .. } => *count,
        }
    }
}

/// Cartesian grid over gain space, one axis per state coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct GainGrid {
    pub axes: Vec<GainAxis>,
}

impl GainGrid {
    pub fn new(axes: Vec<GainAxis>) -> Self {
        Self { axes }
    }

    /// Number of points, saturating on overflow.
    pub fn len(&self) -> usize {
        if self.axes.is_empty() {
            return 0;
        }
        self.axes
            .iter()
            .fold(1usize, |acc, a| acc.saturating_mul(a.len()))
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Gain vector at flat index `idx`; the first axis varies slowest.
    pub fn point(&self, values: &[Vec<f64>], mut idx: usize) -> Vec<f64> {
        let mut out = vec![0.0; values.len()];
        for (slot, vals) in out.iter_mut().zip(values).rev() {
            *slot = vals[idx % vals.len()];
            idx /= vals.len();
        }
        out
    }
}

/// Verdict for one gain vector in a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub gains: Vec<f64>,
    pub verdict: Verdict,
    pub min_arg: f64,
    pub critical_order: f64,
}

/// Classifies `J(x_e) + diag(c)` for every gain vector on the grid.
///
/// Points come back in grid order. `threads` caps the worker count; `None`
/// uses the global pool.
pub fn gain_sweep(
    system: &FractionalSystem,
    equilibrium: &EquilibriumState,
    q: FractionalOrder,
    grid: &GainGrid,
    threads: Option<usize>,
) -> Result<Vec<SweepPoint>> {
    let n = system.dim();
    if !grid.axes.is_empty() && grid.axes.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: grid.axes.len(),
        });
    }
    let total = grid.len();
    if total > MAX_GRID_POINTS {
        return Err(Error::GridTooLarge(total));
    }
    if total == 0 {
        return Ok(Vec::new());
    }
    let values: Vec<Vec<f64>> = grid.axes.iter().map(GainAxis::values).collect();
    if values.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("gain grid"));
    }
    let equilibrium = EquilibriumState::certify(system, equilibrium.x.clone())?;
    let j0 = jacobian(system, &equilibrium.x)?;

    let eval = |idx: usize| -> Result<SweepPoint> {
        let gains = grid.point(&values, idx);
        classify_shifted(&j0, &gains, q)
    };
    let run = || {
        (0..total)
            .into_par_iter()
            .map(eval)
            .collect::<Result<Vec<_>>>()
    };
    match threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
            .map_err(|e| invalid("threads", e.to_string()))?
            .install(run),
        None => run(),
    }
}

/// Matignon verdict for `J + diag(gains)`.
pub fn classify_shifted(j: &DMatrix<f64>, gains: &[f64], q: FractionalOrder) -> Result<SweepPoint> {
    let mut m = j.clone();
    for (i, c) in gains.iter().enumerate() {
        m[(i, i)] += c;
    }
    let eigs: Vec<Complex64> = stability::eigenvalues(&m)?;
    let report: StabilityReport = matignon_classify(&eigs, q, BOUNDARY_TOL, Some(&m))?;
    Ok(SweepPoint {
        gains: gains.to_vec(),
        verdict: report.verdict,
        min_arg: report.min_arg,
        critical_order: report.critical_order,
    })
}

/// Default distance below which a controlled run counts as converged.
pub const CONVERGENCE_TOL: f64 = 0.05;
/// Trailing fraction of the run checked for a decreasing distance.
pub const TAIL_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceCheck {
    pub converged: bool,
    pub final_distance: f64,
    /// Distance to `x_e` strictly decreased across the trailing window.
    pub tail_decreasing: bool,
    pub diverged: bool,
    pub tolerance: f64,
}

/// Integrates the controlled system and measures the Euclidean distance of
/// the final state to the equilibrium.
pub fn verify_convergence(
    controlled: &ControlledSystem,
    q: FractionalOrder,
    x0: &[f64],
    config: &IntegrationConfig,
    tolerance: f64,
) -> Result<(ConvergenceCheck, Trajectory)> {
    let traj = integrate(controlled.system(), q, x0, config)?;
    let xe = &controlled.equilibrium.x;
    let dist: Vec<f64> = traj
        .states
        .iter()
        .map(|s| norm2(&s.iter().zip(xe).map(|(a, b)| a - b).collect::<Vec<_>>()))
        .collect();
    let diverged = traj.terminated_early == Some(Termination::Divergence);
    let final_distance = *dist.last().expect("trajectory holds x0");
    let start = ((1.0 - TAIL_FRACTION) * (dist.len() - 1) as f64).floor() as usize;
    let tail = &dist[start..];
    let tail_decreasing = tail.windows(2).all(|w| w[1] < w[0]);
    let converged = !diverged && final_distance < tolerance;
    Ok((
        ConvergenceCheck {
            converged,
            final_distance,
            tail_decreasing,
            diverged,
            tolerance,
        },
        traj,
    ))
}
