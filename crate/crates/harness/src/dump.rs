//! The `dump` command: matrices and value fields of a grid model as JSON.

use ndarray::{Array1, ArrayView2};
use serde::Serialize;
use serde_json::{json, Map, Value};

use sr_aif::efe::{efe_reward_vector, epistemic_vector, EfeWeights};
use sr_aif::gridworld::{GridWorld, NUM_ACTIONS};
use sr_aif::successor::{default_transition, state_value, successor_matrix, DefaultPolicy};

use crate::run::summarize_warnings;
use crate::{HarnessError, RunConfig, TOOL_NAME, TOOL_VERSION};

/// Names accepted by [`cmd_dump`].
///
/// `state_value` and `efe_value` are both `M g` with the configured weights;
/// `utility_value` is `M g` with the epistemic weight set to 0.
pub const FIELDS: [&str; 6] = [
    "default_b",
    "successor",
    "state_value",
    "efe_value",
    "utility_value",
    "entropy",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatrixDump {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Vec<f64>>,
}

impl MatrixDump {
    pub fn new(m: ArrayView2<'_, f64>) -> Self {
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data: m.rows().into_iter().map(|r| r.to_vec()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldDump {
    /// One value per cell, row-major.
    pub values: Vec<f64>,
    /// The same values as an N×N grid.
    pub grid: Vec<Vec<f64>>,
}

impl FieldDump {
    pub fn new(values: &Array1<f64>, n: usize) -> Self {
        let values = values.to_vec();
        Self {
            grid: values.chunks(n).map(<[f64]>::to_vec).collect(),
            values,
        }
    }
}

/// Parses a comma-separated field list; empty means every field.
pub fn parse_fields(list: &str) -> Result<Vec<String>, HarnessError> {
    let names: Vec<String> = list
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect();
    if names.is_empty() {
        return Ok(FIELDS.iter().map(|s| s.to_string()).collect());
    }
    for name in &names {
        if !FIELDS.contains(&name.as_str()) {
            return Err(HarnessError::UnknownField(name.clone()));
        }
    }
    Ok(names)
}

/// Computes the requested fields for the `cfg.grid_size` grid. The successor
/// matrix uses the SR discount (`sr_gamma`, else `gamma`).
pub fn cmd_dump(cfg: &RunConfig, what: &[String]) -> Result<Value, HarnessError> {
    cfg.validate()?;
    if let Some(bad) = what.iter().find(|w| !FIELDS.contains(&w.as_str())) {
        return Err(HarnessError::UnknownField(bad.clone()));
    }
    let world = GridWorld::new(cfg.grid_spec())?;
    let model = world.model();
    let n = cfg.grid_size;
    let b_tilde = default_transition(model, &DefaultPolicy::uniform(NUM_ACTIONS))?;
    let needs_successor = what.iter().any(|w| w != "default_b" && w != "entropy");
    let successor = if needs_successor {
        Some(successor_matrix(b_tilde.view(), cfg.successor_gamma())?)
    } else {
        None
    };
    let value_with = |weights: EfeWeights| -> Result<Value, HarnessError> {
        let m = successor.as_ref().expect("successor computed for value fields");
        let g = efe_reward_vector(model, weights)?;
        Ok(serde_json::to_value(FieldDump::new(&state_value(m, &g)?, n))?)
    };

    let mut fields = Map::new();
    for name in what {
        let value = match name.as_str() {
            "default_b" => serde_json::to_value(MatrixDump::new(b_tilde.view()))?,
            "successor" => serde_json::to_value(MatrixDump::new(
                successor.as_ref().expect("successor computed").matrix(),
            ))?,
            "state_value" | "efe_value" => value_with(cfg.weights())?,
            "utility_value" => value_with(EfeWeights {
                w_epistemic: 0.0,
                ..cfg.weights()
            })?,
            "entropy" => serde_json::to_value(FieldDump::new(&epistemic_vector(model), n))?,
            _ => unreachable!("field names checked above"),
        };
        fields.insert(name.clone(), value);
    }
    let warnings = summarize_warnings(successor.as_ref().and_then(|m| m.warning()));
    Ok(json!({
        "tool": TOOL_NAME,
        "version": TOOL_VERSION,
        "grid_size": n,
        "goal": world.spec().goal,
        "unknowable": world.spec().unknowable,
        "gamma": cfg.successor_gamma(),
        "weights": cfg.weights(),
        "fields": fields,
        "warnings": warnings,
    }))
}
