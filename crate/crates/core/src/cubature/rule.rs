//! Cubature rules and their file formats.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::residual::Residual;
use super::solver::SolverMode;
use crate::error::{Error, Result};
use crate::geometry::{Manifold, ManifoldId, ManifoldPoint};
use crate::space::{FunctionSpace, SpaceKind};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CubatureRule {
    pub schema_version: u32,
    pub manifold: ManifoldId,
    pub space: SpaceKind,
    #[serde(rename = "L")]
    pub l: f64,
    /// Chart coordinates: `[t]` on curves, `[t₁, t₂]` on the torus, `[θ, φ]` on the sphere.
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub residual: Vec<f64>,
    pub residual_linf: f64,
    pub residual_l2: f64,
    pub converged: bool,
    pub tolerance: f64,
    pub seed: u64,
    pub mode: SolverMode,
    #[serde(default)]
    pub restarts_used: usize,
    #[serde(default)]
    pub best_restart: usize,
    #[serde(default)]
    pub horizon: f64,
    #[serde(default)]
    pub c4: f64,
    /// `ℓ∞` residual after each flow round and accepted polish step.
    #[serde(default)]
    pub history: Vec<f64>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl CubatureRule {
    pub fn new(space: &dyn FunctionSpace, points: &[ManifoldPoint], weights: &[f64], residual: Residual, tol: f64) -> Self {
        CubatureRule {
            schema_version: SCHEMA_VERSION,
            manifold: space.manifold().id(),
            space: space.kind(),
            l: space.band(),
            points: points.iter().map(|p| p.chart_slice().to_vec()).collect(),
            weights: weights.to_vec(),
            converged: residual.linf <= tol,
            residual_linf: residual.linf,
            residual_l2: residual.l2,
            residual: residual.values,
            tolerance: tol,
            seed: 0,
            mode: SolverMode::Hybrid,
            restarts_used: 1,
            best_restart: 0,
            horizon: 0.0,
            c4: 0.0,
            history: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn manifold_points(&self) -> Result<Vec<ManifoldPoint>> {
        let m = Manifold::new(self.manifold)?;
        self.points.iter().map(|c| m.canonical_point(c)).collect()
    }

    /// Repeats the point of each block for every weight in it.
    pub fn expand_blocks(&self, blocks: &crate::weights::Blocks, original: &[f64]) -> Result<CubatureRule> {
        if blocks.len() != self.len() || blocks.index_map.len() != original.len() {
            return Err(Error::Length("block map does not match the rule".into()));
        }
        let mut out = self.clone();
        out.points = blocks.index_map.iter().map(|&b| self.points[b].clone()).collect();
        out.weights = original.to_vec();
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(s)?;
        let found = v.get("schema_version").and_then(|x| x.as_u64()).unwrap_or(0) as u32;
        if found != SCHEMA_VERSION {
            return Err(Error::Schema {
                expected: SCHEMA_VERSION,
                found,
            });
        }
        let rule: CubatureRule = serde_json::from_value(v)?;
        if rule.points.len() != rule.weights.len() {
            return Err(Error::Length(format!("{} points but {} weights", rule.points.len(), rule.weights.len())));
        }
        Ok(rule)
    }

    pub fn write_json<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(self.to_json()?.as_bytes())?;
        w.write_all(b"\n")?;
        Ok(())
    }

    pub fn read_json<R: Read>(mut r: R) -> Result<Self> {
        let mut s = String::new();
        r.read_to_string(&mut s)?;
        Self::from_json(&s)
    }

    /// One row per point: chart coordinates, ambient coordinates, weight.
    /// The torus is written in its flat embedding `(cos t₁, sin t₁, cos t₂, sin t₂)`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let pts = self.manifold_points()?;
        let torus = self.manifold == ManifoldId::Torus2;
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["index".to_string()];
        let dim = self.points.first().map_or(0, |p| p.len());
        header.extend((0..dim).map(|i| format!("chart{i}")));
        let axes: &[&str] = if torus { &["x", "y", "z", "w"] } else { &["x", "y", "z"] };
        header.extend(axes.iter().map(|s| s.to_string()));
        header.push("weight".into());
        out.write_record(&header)?;
        for (j, (p, w)) in pts.iter().zip(&self.weights).enumerate() {
            let mut row = vec![j.to_string()];
            row.extend(self.points[j].iter().map(|c| format!("{c:e}")));
            let amb: Vec<f64> = if torus {
                let [t1, t2] = p.chart;
                vec![t1.cos(), t1.sin(), t2.cos(), t2.sin()]
            } else {
                p.ambient.to_vec()
            };
            row.extend(amb.iter().map(|c| format!("{c:e}")));
            row.push(format!("{w:e}"));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cubature::residual::residual_vector;
    use crate::spectra::SpectralSpace;

    fn sample_rule() -> CubatureRule {
        let m = Manifold::sphere();
        let s = SpectralSpace::new(&m, 2.0).unwrap();
        let pts: Vec<_> = (0..6).map(|i| m.canonical_point(&[0.3 + 0.4 * i as f64, 1.1 * i as f64]).unwrap()).collect();
        let w = vec![1.0 / 6.0; 6];
        let r = residual_vector(&s, &pts, &w).unwrap();
        CubatureRule::new(&s, &pts, &w, r, 1e-10)
    }

    #[test]
    fn json_roundtrip_is_exact() {
        let rule = sample_rule();
        let back = CubatureRule::from_json(&rule.to_json().unwrap()).unwrap();
        assert_eq!(rule, back);
        let v: serde_json::Value = serde_json::from_str(&rule.to_json().unwrap()).unwrap();
        assert_eq!(v["manifold"]["kind"], "sphere2");
        assert_eq!(v["space"], "diffusion");
        assert_eq!(v["L"], 2.0);
    }

    #[test]
    fn wrong_schema_is_rejected() {
        let mut v: serde_json::Value = serde_json::from_str(&sample_rule().to_json().unwrap()).unwrap();
        v["schema_version"] = 2.into();
        assert!(matches!(
            CubatureRule::from_json(&v.to_string()),
            Err(Error::Schema { expected: 1, found: 2 })
        ));
    }

    #[test]
    fn csv_has_ambient_and_weight_columns() {
        let mut buf = Vec::new();
        sample_rule().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "index,chart0,chart1,x,y,z,weight");
        assert_eq!(lines.count(), 6);

        let m = Manifold::torus();
        let s = SpectralSpace::new(&m, 1.0).unwrap();
        let pts = vec![m.canonical_point(&[0.0, 1.5]).unwrap()];
        let r = residual_vector(&s, &pts, &[1.0]).unwrap();
        let mut buf = Vec::new();
        CubatureRule::new(&s, &pts, &[1.0], r, 1e-10).write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("index,chart0,chart1,x,y,z,w,weight\n"));
        let row: Vec<f64> = text.lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
        assert!((row[6] - 1.5f64.sin()).abs() < 1e-15);
    }
}
