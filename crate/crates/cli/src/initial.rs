use std::f64::consts::PI;

use minmax_hj::grid::{FieldMeta, Grid, GridField};
use serde::{Deserialize, Serialize};

/// Bounded Lipschitz initial data for the time-dependent problems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialDatum {
    /// `min(|x|, 1)`
    MinAbs,
    /// `cos(2π x_1 / L)` on a box of side `L`.
    Cosine,
    Constant { value: f64 },
    /// `height·clamp((radius + width − |x − center|)/width, 0, 1)`
    PlateauBump {
        #[serde(default)]
        center: f64,
        radius: f64,
        width: f64,
        height: f64,
    },
}

impl InitialDatum {
    pub fn validate(&self) -> Result<(), String> {
        match self {
            InitialDatum::Constant { value } if !value.is_finite() => Err("u0 constant must be finite".into()),
            InitialDatum::PlateauBump { radius, width, height, center }
                if !(*radius >= 0.0 && *width > 0.0 && height.is_finite() && center.is_finite()) =>
            {
                Err("plateau bump needs radius ≥ 0, width > 0 and finite height".into())
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, x: &[f64], box_length: f64) -> f64 {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        match self {
            InitialDatum::MinAbs => r.min(1.0),
            InitialDatum::Cosine => (2.0 * PI * x[0] / box_length).cos(),
            InitialDatum::Constant { value } => *value,
            InitialDatum::PlateauBump { center, radius, width, height } => {
                let s = (x[0] - center).powi(2) + x[1..].iter().map(|v| v * v).sum::<f64>();
                height * ((radius + width - s.sqrt()) / width).clamp(0.0, 1.0)
            }
        }
    }

    pub fn lipschitz(&self, box_length: f64) -> f64 {
        match self {
            InitialDatum::MinAbs => 1.0,
            InitialDatum::Cosine => 2.0 * PI / box_length,
            InitialDatum::Constant { .. } => 0.0,
            InitialDatum::PlateauBump { width, height, .. } => height.abs() / width,
        }
    }

    pub fn field(&self, grid: &Grid) -> GridField {
        GridField::from_fn(*grid, FieldMeta::Plain, |x| self.eval(x, grid.length))
    }
}
