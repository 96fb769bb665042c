//! Field definition files and the built-in example fields.
//!
//! A definition file is JSON:
//!
//! ```json
//! {
//!   "name": "annulus",
//!   "chart": { "bounds": [[0, 6.283185307179586], [0, 6.283185307179586], [1, 2]],
//!              "periodic": [true, true, false] },
//!   "metric": [["x3", "0", "0"], ["0", "1", "sin(x1)"], ["0", "sin(x1)", "sin(x1)^2 + 1/x3"]],
//!   "velocity": ["1", "0", "0"],
//!   "params": {},
//!   "run": { "points": [[0.5, 0.0, 1.5]], "horizon": 20.0 }
//! }
//! ```
//!
//! `metric` may be omitted (Euclidean). Entries may be numbers or expression
//! strings; named `params` are substituted as constants.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::geometry::{
    curl, orthonormal_frame, ChartPoint, Chart, Frame, MetricSpec, Vec3, VelocityFieldSpec,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ExprSource {
    Number(f64),
    Text(String),
}

impl ExprSource {
    fn text(&self) -> String {
        match self {
            ExprSource::Number(v) => format!("{v:?}"),
            ExprSource::Text(s) => s.clone(),
        }
    }
}

impl From<&str> for ExprSource {
    fn from(s: &str) -> Self {
        ExprSource::Text(s.to_string())
    }
}

/// Optional run settings carried next to a field definition. Command-line
/// flags take precedence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub points: Option<Vec<[f64; 3]>>,
    pub grid_level: Option<u32>,
    pub horizon: Option<f64>,
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
    pub out: Option<String>,
    pub first_only: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldFile {
    #[serde(default)]
    pub name: Option<String>,
    pub chart: Chart,
    #[serde(default)]
    pub metric: Option<[[ExprSource; 3]; 3]>,
    pub velocity: [ExprSource; 3],
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub run: Option<RunSection>,
}

impl FieldFile {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Debug, Clone)]
pub struct FieldModel {
    pub name: String,
    pub chart: Chart,
    pub metric: MetricSpec,
    pub velocity: VelocityFieldSpec,
}

impl FieldModel {
    pub fn from_file(file: &FieldFile) -> Result<Self> {
        let metric = match &file.metric {
            Some(m) => {
                let text: Vec<Vec<String>> = m.iter().map(|row| row.iter().map(ExprSource::text).collect()).collect();
                let refs: [[&str; 3]; 3] =
                    std::array::from_fn(|i| std::array::from_fn(|j| text[i][j].as_str()));
                MetricSpec::parse(&refs, &file.params)?
            }
            None => MetricSpec::euclidean(),
        };
        let text: Vec<String> = file.velocity.iter().map(ExprSource::text).collect();
        let velocity = VelocityFieldSpec::parse(&[&text[0], &text[1], &text[2]], &file.params)?;
        for k in 0..3 {
            let [lo, hi] = file.chart.bounds[k];
            if !(lo < hi) {
                return Err(Error::InvalidInput(format!("chart bounds for axis {} are empty", k + 1)));
            }
        }
        Ok(FieldModel {
            name: file.name.clone().unwrap_or_else(|| "field".into()),
            chart: file.chart.clone(),
            metric,
            velocity,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_file(&FieldFile::from_json(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_file(&FieldFile::read(path)?)
    }

    /// Initial vorticity `curl u(0, x)` in chart components.
    pub fn vorticity(&self, x: &ChartPoint) -> Vec3 {
        curl(&self.velocity, &self.metric, x, 0.0)
    }

    pub fn frame(&self, x: &ChartPoint) -> Result<Frame> {
        orthonormal_frame(&self.metric, x)
    }

    /// Frame components of the initial vorticity at `x`.
    pub fn vorticity_in_frame(&self, x: &ChartPoint) -> Result<Vec3> {
        Ok(self.frame(x)?.components(&self.vorticity(x)))
    }

    /// Points on a regular lattice strictly inside the chart box.
    pub fn interior_samples(&self, per_axis: usize) -> Vec<ChartPoint> {
        let b = &self.chart.bounds;
        let coord = |k: usize, i: usize| {
            let (lo, hi) = (b[k][0].max(-10.0), b[k][1].min(10.0));
            lo + (hi - lo) * (i as f64 + 0.5) / per_axis as f64
        };
        let mut out = Vec::with_capacity(per_axis.pow(3));
        for i in 0..per_axis {
            for j in 0..per_axis {
                for k in 0..per_axis {
                    out.push(ChartPoint::new(coord(0, i), coord(1, j), coord(2, k)));
                }
            }
        }
        out
    }
}

/// Built-in fields used by the examples and the reproduction checks.
pub mod builtin {
    use super::*;
    use std::f64::consts::TAU;

    /// `S¹ × S¹ × [z_lo, z_hi]` with metric `z dx² + (dy + f(x) dz)² + dz²/z`
    /// and `u = ∂x`. `f` is an expression in `x1`.
    pub fn annulus_file(f: &str, z_range: [f64; 2]) -> FieldFile {
        let f = format!("({f})");
        FieldFile {
            name: Some("annulus".into()),
            chart: Chart {
                bounds: [[0.0, TAU], [0.0, TAU], z_range],
                periodic: [true, true, false],
            },
            metric: Some([
                ["x3".into(), "0".into(), "0".into()],
                ["0".into(), "1".into(), ExprSource::Text(f.clone())],
                ["0".into(), ExprSource::Text(f.clone()), ExprSource::Text(format!("{f}^2 + 1/x3"))],
            ]),
            velocity: ["1".into(), "0".into(), "0".into()],
            params: BTreeMap::new(),
            run: None,
        }
    }

    pub fn annulus(f: &str) -> FieldModel {
        FieldModel::from_file(&annulus_file(f, [1.0, 2.0])).expect("built-in annulus field")
    }

    /// Rigid rotation `u = ω × x / 2` of Euclidean space, whose vorticity is
    /// the constant `ω`.
    pub fn rigid_rotation_file(omega: [f64; 3]) -> FieldFile {
        let [a, b, c] = omega.map(|v| v / 2.0);
        let u = [
            format!("({b:?}) * x3 - ({c:?}) * x2"),
            format!("({c:?}) * x1 - ({a:?}) * x3"),
            format!("({a:?}) * x2 - ({b:?}) * x1"),
        ];
        FieldFile {
            name: Some("rigid-rotation".into()),
            chart: Chart::unbounded(),
            metric: None,
            velocity: u.map(ExprSource::Text),
            params: BTreeMap::new(),
            run: None,
        }
    }

    pub fn rigid_rotation(omega: [f64; 3]) -> FieldModel {
        FieldModel::from_file(&rigid_rotation_file(omega)).expect("built-in rotation field")
    }

    /// Plane shear `u = (x2, 0, 0)` in Euclidean space.
    pub fn shear_file() -> FieldFile {
        FieldFile {
            name: Some("shear".into()),
            chart: Chart::unbounded(),
            metric: None,
            velocity: ["x2".into(), "0".into(), "0".into()],
            params: BTreeMap::new(),
            run: None,
        }
    }

    pub fn shear() -> FieldModel {
        FieldModel::from_file(&shear_file()).expect("built-in shear field")
    }

    /// A single-variable periodic profile such as `f` in the annulus metric.
    pub fn profile(src: &str) -> Result<Expr> {
        Expr::parse(src, &BTreeMap::new()).map_err(|source| Error::Expression {
            location: "profile".into(),
            source,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn annulus_file_round_trips_through_json() {
        let file = builtin::annulus_file("sin(x1)", [1.0, 2.0]);
        let text = serde_json::to_string_pretty(&file).unwrap();
        let back = FieldFile::from_json(&text).unwrap();
        assert_eq!(file, back);
        let model = FieldModel::from_file(&back).unwrap();
        let w = model.vorticity(&ChartPoint::new(1.0, 2.0, 1.5));
        assert!((w - Vec3::y()).norm() < 1e-13);
    }

    #[test]
    fn numbers_and_params_are_accepted() {
        let text = r#"{
            "chart": {"bounds": [[-5, 5], [-5, 5], [-5, 5]]},
            "velocity": [0, "-w * x3", "w * x2"],
            "params": {"w": 0.5}
        }"#;
        let model = FieldModel::from_json(text).unwrap();
        let w = model.vorticity(&ChartPoint::new(0.0, 1.0, 1.0));
        assert!((w - Vec3::new(1.0, 0.0, 0.0)).norm() < 1e-15);
        assert!(model.velocity.is_steady());
    }

    #[test]
    fn malformed_expression_reports_location() {
        let text = r#"{
            "chart": {"bounds": [[-5, 5], [-5, 5], [-5, 5]]},
            "velocity": ["x1 +", "0", "0"]
        }"#;
        match FieldModel::from_json(text) {
            Err(Error::Expression { location, source }) => {
                assert_eq!(location, "velocity[0]");
                assert_eq!(source.column, 5);
            }
            other => panic!("expected expression error, got {other:?}"),
        }
    }

    #[test]
    fn rotation_has_requested_vorticity() {
        let model = builtin::rigid_rotation([0.3, -0.4, 1.2]);
        let w = model.vorticity(&ChartPoint::new(0.2, 0.1, -0.3));
        assert!((w - Vec3::new(0.3, -0.4, 1.2)).norm() < 1e-14);
    }
}
