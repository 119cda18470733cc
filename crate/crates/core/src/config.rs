//! Scenario files for the command-line front end.
//!
//! A scenario is a single JSON document:
//!
//! ```json
//! {
//!   "model": { "type": "toda2_controlled", "k": 0.4, "c1": -0.02, "c2": -0.3, "m": 0.0 },
//!   "q": 0.9,
//!   "x0": [0.1, 0.1, 0.1],
//!   "h": 0.01,
//!   "t_end": 40.0,
//!   "sweep": { "c1": { "min": -1, "max": 1, "count": 21 }, "c2": { "min": -1, "max": 1, "count": 21 } }
//! }
//! ```
//!
//! Model types are `toda_lattice` (`n`), `toda2` (`k`), `toda2_controlled`
//! (`k`, `c1`, `c2`, `m`) and `custom_polynomial` (`dim`, `equations`).
//! Optional keys: `blowup_guard`, `corrector_iterations`, `seeds`, `m`
//! (equilibrium family member for `toda2`), `gains`, `sweep`, `outputs`.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Deserialize;

use crate::control::{GainAxis, GainGrid, MAX_GRID_POINTS};
use crate::integrator::IntegrationConfig;
use crate::models::{toda2_controlled, toda2_feedback, toda_lattice};
use crate::system::{make_system, ControlGains, FractionalOrder, FractionalSystem, JacobianField};

/// A configuration problem, tied to the offending field.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("config field `{field}`: {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    fn new(field: impl Into<String>, message: impl ToString) -> Self {
        Self {
            field: field.into(),
            message: message.to_string(),
        }
    }
}

type ConfigResult<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    TodaLattice {
        n: usize,
    },
    Toda2 {
        k: f64,
    },
    Toda2Controlled {
        k: f64,
        c1: f64,
        c2: f64,
        m: f64,
    },
    CustomPolynomial {
        dim: usize,
        equations: Vec<Vec<Monomial>>,
    },
}

/// `coef * prod_j x_j^{powers[j]}`
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Monomial {
    pub coef: f64,
    pub powers: Vec<u32>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum AxisSpec {
    Fixed(f64),
    Range { min: f64, max: f64, count: usize },
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub trajectory: Option<String>,
    pub report: Option<String>,
    pub sweep: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub model: ModelSpec,
    pub q: f64,
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    #[serde(default)]
    pub h: Option<f64>,
    #[serde(default)]
    pub t_end: Option<f64>,
    #[serde(default)]
    pub blowup_guard: Option<f64>,
    #[serde(default)]
    pub corrector_iterations: Option<usize>,
    #[serde(default)]
    pub seeds: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub m: Option<f64>,
    #[serde(default)]
    pub gains: Option<Vec<f64>>,
    #[serde(default)]
    pub sweep: Option<BTreeMap<String, AxisSpec>>,
    #[serde(default)]
    pub outputs: OutputSpec,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> ConfigResult<Self> {
        serde_json::from_str(text).map_err(|e| {
            // serde_json reports unknown/missing fields by name in the message
            let field = extract_field(&e.to_string()).unwrap_or_else(|| "document".to_string());
            ConfigError::new(field, e)
        })
    }

    pub fn load(path: &Path) -> ConfigResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("path", format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn order(&self) -> ConfigResult<FractionalOrder> {
        FractionalOrder::new(self.q).map_err(|e| ConfigError::new("q", e))
    }

    /// The model's own system (for `toda2_controlled`, the closed loop).
    pub fn system(&self) -> ConfigResult<FractionalSystem> {
        match &self.model {
            ModelSpec::TodaLattice { n } => {
                toda_lattice(*n).map_err(|e| ConfigError::new("model.n", e))
            }
            ModelSpec::Toda2 { k } => {
                toda2_controlled(*k).map_err(|e| ConfigError::new("model.k", e))
            }
            ModelSpec::Toda2Controlled { k, c1, c2, m } => {
                toda2_feedback(*k, *c1, *c2, *m).map_err(|e| ConfigError::new(model_field(&e), e))
            }
            ModelSpec::CustomPolynomial { dim, equations } => polynomial_system(*dim, equations),
        }
    }

    /// The uncontrolled system used as the base of a gain sweep.
    pub fn base_system(&self) -> ConfigResult<FractionalSystem> {
        match &self.model {
            ModelSpec::Toda2Controlled { k, .. } => {
                toda2_controlled(*k).map_err(|e| ConfigError::new("model.k", e))
            }
            _ => self.system(),
        }
    }

    /// Equilibrium implied by the model parameters, if any.
    pub fn family_equilibrium(&self) -> Option<Vec<f64>> {
        match &self.model {
            ModelSpec::Toda2Controlled { m, .. } => Some(vec![0.0, *m, 0.0]),
            ModelSpec::Toda2 { .. } => self.m.map(|m| vec![0.0, m, 0.0]),
            _ => None,
        }
    }

    pub fn initial_state(&self, dim: usize) -> ConfigResult<Vec<f64>> {
        let x0 = self
            .x0
            .clone()
            .ok_or_else(|| ConfigError::new("x0", "missing"))?;
        if x0.len() != dim {
            return Err(ConfigError::new(
                "x0",
                format!("expected {dim} entries, got {}", x0.len()),
            ));
        }
        if x0.iter().any(|v| !v.is_finite()) {
            return Err(ConfigError::new("x0", "entries must be finite"));
        }
        Ok(x0)
    }

    pub fn integration(&self) -> ConfigResult<IntegrationConfig> {
        let h = self.h.ok_or_else(|| ConfigError::new("h", "missing"))?;
        let t_end = self
            .t_end
            .ok_or_else(|| ConfigError::new("t_end", "missing"))?;
        if !(h > 0.0) || !h.is_finite() {
            return Err(ConfigError::new("h", "must be positive and finite"));
        }
        let mut cfg = IntegrationConfig::new(h, t_end).map_err(|e| ConfigError::new("t_end", e))?;
        if let Some(g) = self.blowup_guard {
            cfg = cfg
                .with_blowup_guard(g)
                .map_err(|e| ConfigError::new("blowup_guard", e))?;
        }
        if let Some(it) = self.corrector_iterations {
            cfg = cfg
                .with_corrector_iterations(it)
                .map_err(|e| ConfigError::new("corrector_iterations", e))?;
        }
        Ok(cfg)
    }

    pub fn gains(&self, dim: usize) -> ConfigResult<Option<ControlGains>> {
        match &self.gains {
            None => Ok(None),
            Some(g) if g.len() != dim => Err(ConfigError::new(
                "gains",
                format!("expected {dim} entries, got {}", g.len()),
            )),
            Some(g) => ControlGains::new(g.clone())
                .map(Some)
                .map_err(|e| ConfigError::new("gains", e)),
        }
    }

    /// Sweep grid over gains `c1..cn`; axes not listed are fixed at zero.
    /// Also returns the indices of the listed axes, in coordinate order.
    pub fn sweep_grid(&self, dim: usize) -> ConfigResult<(GainGrid, Vec<usize>)> {
        let spec = self
            .sweep
            .as_ref()
            .ok_or_else(|| ConfigError::new("sweep", "missing"))?;
        if spec.is_empty() {
            return Err(ConfigError::new("sweep", "no axes given"));
        }
        let mut axes = vec![GainAxis::Fixed(0.0); dim];
        let mut listed = Vec::new();
        for (name, axis) in spec {
            let idx = name
                .strip_prefix('c')
                .and_then(|s| s.parse::<usize>().ok())
                .filter(|i| (1..=dim).contains(i))
                .ok_or_else(|| {
                    ConfigError::new(format!("sweep.{name}"), format!("expected c1..c{dim}"))
                })?
                - 1;
            axes[idx] = match *axis {
                AxisSpec::Fixed(v) if v.is_finite() => GainAxis::Fixed(v),
                AxisSpec::Range { min, max, count }
                    if min.is_finite() && max.is_finite() && count > 0 =>
                {
                    GainAxis::Range { min, max, count }
                }
                _ => {
                    return Err(ConfigError::new(
                        format!("sweep.{name}"),
                        "need a finite value or finite min/max with count >= 1",
                    ))
                }
            };
            listed.push(idx);
        }
        listed.sort_unstable();
        let grid = GainGrid::new(axes);
        if grid.len() > MAX_GRID_POINTS {
            return Err(ConfigError::new(
                "sweep",
                format!("grid has {} points, limit is {MAX_GRID_POINTS}", grid.len()),
            ));
        }
        Ok((grid, listed))
    }
}

fn model_field(e: &crate::error::Error) -> String {
    match e {
        crate::error::Error::InvalidParameter { name, .. } => format!("model.{name}"),
        _ => "model".to_string(),
    }
}

fn extract_field(msg: &str) -> Option<String> {
    for marker in ["unknown field `", "missing field `"] {
        if let Some(pos) = msg.find(marker) {
            let rest = &msg[pos + marker.len()..];
            return rest.find('`').map(|end| rest[..end].to_string());
        }
    }
    None
}

/// Polynomial vector field with its exact Jacobian.
pub fn polynomial_system(
    dim: usize,
    equations: &[Vec<Monomial>],
) -> ConfigResult<FractionalSystem> {
    if dim == 0 {
        return Err(ConfigError::new("model.dim", "must be at least 1"));
    }
    if equations.len() != dim {
        return Err(ConfigError::new(
            "model.equations",
            format!("expected {dim} equations, got {}", equations.len()),
        ));
    }
    for (i, eq) in equations.iter().enumerate() {
        for t in eq {
            if t.powers.len() != dim || !t.coef.is_finite() {
                return Err(ConfigError::new(
                    format!("model.equations[{i}]"),
                    format!("each term needs a finite coef and {dim} powers"),
                ));
            }
        }
    }
    let eqs: Arc<Vec<Vec<Monomial>>> = Arc::new(equations.to_vec());
    let field_eqs = eqs.clone();
    let field = move |x: &[f64]| {
        field_eqs
            .iter()
            .map(|eq| eq.iter().map(|t| monomial(t, x, None)).sum())
            .collect()
    };
    let jac: JacobianField = Arc::new(move |x: &[f64]| {
        let mut m = DMatrix::zeros(dim, dim);
        for (i, eq) in eqs.iter().enumerate() {
            for j in 0..dim {
                m[(i, j)] = eq.iter().map(|t| monomial(t, x, Some(j))).sum();
            }
        }
        m
    });
    make_system(dim, field, Some(jac), BTreeMap::new())
        .map(|s| s.with_name("custom_polynomial"))
        .map_err(|e| ConfigError::new("model", e))
}

/// Value of a monomial, or its partial derivative in `wrt`.
fn monomial(t: &Monomial, x: &[f64], wrt: Option<usize>) -> f64 {
    let mut v = t.coef;
    for (j, (&p, &xj)) in t.powers.iter().zip(x).enumerate() {
        if Some(j) == wrt {
            if p == 0 {
                return 0.0;
            }
            v *= p as f64 * xj.powi(p as i32 - 1);
        } else {
            v *= xj.powi(p as i32);
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stability::finite_difference_jacobian;

    const EXAMPLE: &str = r#"{
        "model": { "type": "toda2_controlled", "k": 0.4, "c1": -0.02, "c2": -0.3, "m": 0.0 },
        "q": 0.9, "x0": [0.1, 0.1, 0.1], "h": 0.01, "t_end": 40.0
    }"#;

    #[test]
    fn parses_example() {
        let cfg = ScenarioConfig::from_json(EXAMPLE).unwrap();
        assert_eq!(cfg.order().unwrap().value(), 0.9);
        assert_eq!(cfg.system().unwrap().dim(), 3);
        assert_eq!(cfg.integration().unwrap().steps(), 4000);
        assert_eq!(cfg.family_equilibrium(), Some(vec![0.0, 0.0, 0.0]));
    }

    #[test]
    fn bad_order_names_q() {
        let cfg = ScenarioConfig::from_json(&EXAMPLE.replace("\"q\": 0.9", "\"q\": 1.5")).unwrap();
        let err = cfg.order().unwrap_err();
        assert_eq!(err.field, "q");
        assert!(err.to_string().contains("`q`"));
    }

    #[test]
    fn unknown_and_missing_fields_are_named() {
        let err = ScenarioConfig::from_json(
            r#"{"model": {"type": "toda2", "k": 1}, "q": 0.5, "bogus": 1}"#,
        )
        .unwrap_err();
        assert_eq!(err.field, "bogus");
        let err = ScenarioConfig::from_json(r#"{"model": {"type": "toda2", "k": 1}}"#).unwrap_err();
        assert_eq!(err.field, "q");
    }

    #[test]
    fn zero_k_names_model_k() {
        let cfg =
            ScenarioConfig::from_json(r#"{"model": {"type": "toda2", "k": 0}, "q": 0.5}"#).unwrap();
        assert_eq!(cfg.system().unwrap_err().field, "model.k");
    }

    #[test]
    fn polynomial_field_and_jacobian() {
        // f = (x0^2 - 1, 3 x0 x1^2)
        let eqs = vec![
            vec![
                Monomial {
                    coef: 1.0,
                    powers: vec![2, 0],
                },
                Monomial {
                    coef: -1.0,
                    powers: vec![0, 0],
                },
            ],
            vec![Monomial {
                coef: 3.0,
                powers: vec![1, 2],
            }],
        ];
        let sys = polynomial_system(2, &eqs).unwrap();
        assert_eq!(sys.eval(&[2.0, -1.0]).unwrap(), vec![3.0, 6.0]);
        let x = [0.7, -1.3];
        let a = sys.analytic_jacobian(&x).unwrap().unwrap();
        let fd = finite_difference_jacobian(&sys, &x).unwrap();
        assert!((a - fd).norm() < 1e-7);
    }

    #[test]
    fn sweep_grid_axes() {
        let cfg = ScenarioConfig::from_json(
            r#"{"model": {"type": "toda2", "k": 0.4}, "q": 0.5,
                "sweep": {"c1": {"min": -1, "max": 1, "count": 21}, "c2": {"min": -1, "max": 1, "count": 21}}}"#,
        )
        .unwrap();
        let (grid, listed) = cfg.sweep_grid(3).unwrap();
        assert_eq!(grid.len(), 441);
        assert_eq!(listed, vec![0, 1]);

        let cfg = ScenarioConfig::from_json(
            r#"{"model": {"type": "toda2", "k": 0.4}, "q": 0.5, "sweep": {}}"#,
        )
        .unwrap();
        assert_eq!(cfg.sweep_grid(3).unwrap_err().field, "sweep");
        let cfg = ScenarioConfig::from_json(
            r#"{"model": {"type": "toda2", "k": 0.4}, "q": 0.5, "sweep": {"c7": 1.0}}"#,
        )
        .unwrap();
        assert_eq!(cfg.sweep_grid(3).unwrap_err().field, "sweep.c7");
    }
}
