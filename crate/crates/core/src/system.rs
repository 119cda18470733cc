//! Fractional-order systems `D^q x = f(x)` as data.
//!
//! A [`FractionalSystem`] bundles the state dimension, a pure vector field,
//! an optional hand-written Jacobian and a table of named parameters.
//! Systems are immutable once built and can be shared across threads.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{invalid, Error, Result};

/// Vector field `R^n -> R^n`.
pub type VectorField = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Jacobian field `R^n -> R^{n x n}`.
pub type JacobianField = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;

/// Caputo derivative order, restricted to `0 < q <= 1`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct FractionalOrder(f64);

impl FractionalOrder {
    pub fn new(q: f64) -> Result<Self> {
        if q.is_finite() && q > 0.0 && q <= 1.0 {
            Ok(Self(q))
        } else {
            Err(Error::InvalidOrder(q))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for FractionalOrder {
    type Error = Error;

    fn try_from(q: f64) -> Result<Self> {
        Self::new(q)
    }
}

impl fmt::Display for FractionalOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A fractional-order dynamical system `D^q x = f(x)` on `R^n`.
#[derive(Clone)]
pub struct FractionalSystem {
    name: String,
    dim: usize,
    field: VectorField,
    jacobian: Option<JacobianField>,
    params: BTreeMap<String, f64>,
}

impl fmt::Debug for FractionalSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FractionalSystem")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("analytic_jacobian", &self.jacobian.is_some())
            .field("params", &self.params)
            .finish()
    }
}

impl FractionalSystem {
    /// Builds a validated system.
    ///
    /// The field (and Jacobian, when given) is probed at the origin so that
    /// an output of the wrong length is rejected up front.
    pub fn new(
        dim: usize,
        field: VectorField,
        jacobian: Option<JacobianField>,
        params: BTreeMap<String, f64>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("n", "state dimension must be at least 1"));
        }
        for (name, value) in &params {
            if !value.is_finite() {
                return Err(invalid(name, "parameter must be finite"));
            }
        }
        let origin = vec![0.0; dim];
        let probe = field(&origin);
        if probe.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: probe.len(),
            });
        }
        if let Some(jac) = &jacobian {
            let m = jac(&origin);
            if m.nrows() != dim || m.ncols() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: m.nrows().max(m.ncols()),
                });
            }
        }
        Ok(Self {
            name: "custom".to_string(),
            dim,
            field,
            jacobian,
            params,
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.get(name).copied()
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        self.jacobian.is_some()
    }

    pub(crate) fn field_fn(&self) -> &VectorField {
        &self.field
    }

    pub(crate) fn jacobian_fn(&self) -> Option<&JacobianField> {
        self.jacobian.as_ref()
    }

    /// Evaluates `f(x)`, checking both input and output lengths.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x.len())?;
        let out = (self.field)(x);
        self.check_len(out.len())?;
        Ok(out)
    }

    /// Analytic Jacobian at `x`, if one was supplied.
    pub fn analytic_jacobian(&self, x: &[f64]) -> Option<Result<DMatrix<f64>>> {
        let jac = self.jacobian.as_ref()?;
        if let Err(e) = self.check_len(x.len()) {
            return Some(Err(e));
        }
        Some(Ok(jac(x)))
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len == self.dim {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: len,
            })
        }
    }
}

/// Convenience constructor taking plain closures.
pub fn make_system<F>(
    dim: usize,
    field: F,
    jacobian: Option<JacobianField>,
    params: BTreeMap<String, f64>,
) -> Result<FractionalSystem>
where
    F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
{
    FractionalSystem::new(dim, Arc::new(field), jacobian, params)
}

/// Linear system `f(x) = M x` with its exact Jacobian.
pub fn linear_system(m: DMatrix<f64>) -> Result<FractionalSystem> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            actual: m.ncols(),
        });
    }
    let dim = m.nrows();
    let mf = m.clone();
    let field = move |x: &[f64]| {
        (&mf * nalgebra::DVector::from_column_slice(x))
            .as_slice()
            .to_vec()
    };
    let jac: JacobianField = Arc::new(move |_x: &[f64]| m.clone());
    Ok(make_system(dim, field, Some(jac), BTreeMap::new())?.with_name("linear"))
}

/// A state `x_e` together with its residual `||f(x_e)||`.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumState {
    pub x: Vec<f64>,
    pub residual: f64,
}

impl EquilibriumState {
    /// Residual above which a state is not accepted as an equilibrium.
    pub const CERTIFIED_RESIDUAL: f64 = 1e-10;

    /// Evaluates the residual of `x` under `system`.
    pub fn certify(system: &FractionalSystem, x: Vec<f64>) -> Result<Self> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("equilibrium state"));
        }
        let residual = norm2(&system.eval(&x)?);
        if !(residual < Self::CERTIFIED_RESIDUAL) {
            return Err(Error::UncertifiedEquilibrium(residual));
        }
        Ok(Self { x, residual })
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }
}

/// Diagonal feedback gains `c_i` of `u_i = c_i (x^i - x_e^i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlGains(Vec<f64>);

impl ControlGains {
    pub fn new(c: Vec<f64>) -> Result<Self> {
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("control gains"));
        }
        Ok(Self(c))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
