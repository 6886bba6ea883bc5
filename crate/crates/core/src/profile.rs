//! Discretized radial profiles and their CSV/JSON serialization.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sign of `v` on the open interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Positive,
    #[serde(rename = "-")]
    Negative,
}

impl Sign {
    pub fn of(x: f64) -> Self {
        if x < 0.0 {
            Sign::Negative
        } else {
            Sign::Positive
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Sign::Positive => 1.0,
            Sign::Negative => -1.0,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Sign::Positive => Sign::Negative,
            Sign::Negative => Sign::Positive,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Sign::Positive => "+",
            Sign::Negative => "-",
        }
    }
}

/// A radial function sampled on the uniform grid `r_i = i / grid`.
///
/// Profiles produced by shooting may stop short of `r = 1` when `v` changes
/// sign early; `is_complete` tells the two apart.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    pub nodes: Vec<f64>,
    pub values: Vec<f64>,
    pub derivs: Vec<f64>,
    pub sign: Sign,
    pub lambda: f64,
    pub dim: u32,
    pub grid: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    #[serde(rename = "N")]
    dim: u32,
    lambda: f64,
    nu: Sign,
    amplitude: f64,
    terminal: f64,
    grid: usize,
}

pub fn uniform_nodes(grid: usize) -> Vec<f64> {
    let h = 1.0 / grid as f64;
    (0..=grid).map(|i| if i == grid { 1.0 } else { i as f64 * h }).collect()
}

impl RadialProfile {
    pub fn amplitude(&self) -> f64 {
        self.values[0]
    }

    /// Last stored value; equals `v(1)` for complete profiles.
    pub fn terminal(&self) -> f64 {
        *self.values.last().unwrap()
    }

    pub fn is_complete(&self) -> bool {
        self.values.len() == self.grid + 1
    }

    pub fn step(&self) -> f64 {
        1.0 / self.grid as f64
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `v ↦ -v`, flipping the sign tag.
    pub fn negated(&self) -> Self {
        Self {
            values: self.values.iter().map(|v| -v).collect(),
            derivs: self.derivs.iter().map(|d| -d).collect(),
            sign: self.sign.flip(),
            ..self.clone()
        }
    }

    /// Checks the one-sign shape invariants: `|v|` strictly decreasing on
    /// the interior and `σ v` concave in the discrete sense.
    pub fn shape_violations(&self) -> Vec<String> {
        let s = self.sign.value();
        let n = self.values.len();
        let mut out = Vec::new();
        if self.derivs[0] != 0.0 {
            out.push(format!("v'(0) = {}", self.derivs[0]));
        }
        for i in 1..n.saturating_sub(1) {
            if s * self.values[i] <= 0.0 {
                out.push(format!("sign violated at r = {}", self.nodes[i]));
            }
        }
        for i in 0..n - 1 {
            if s * (self.values[i + 1] - self.values[i]) >= 0.0 {
                out.push(format!("not strictly monotone at r = {}", self.nodes[i]));
            }
            if s * (self.derivs[i + 1] - self.derivs[i]) > 1e-12 * self.derivs[i].abs().max(1e-300) {
                out.push(format!("not concave at r = {}", self.nodes[i]));
            }
        }
        out
    }

    /// Writes `r,v,dv` rows.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["r", "v", "dv"])?;
        for i in 0..self.values.len() {
            wr.write_record([
                self.nodes[i].to_string(),
                self.values[i].to_string(),
                self.derivs[i].to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Writes the profile CSV and, next to it, a `.json` metadata sidecar.
    pub fn save(&self, csv_path: &Path) -> Result<()> {
        self.write_csv(BufWriter::new(File::create(csv_path)?))?;
        let mut side = BufWriter::new(File::create(csv_path.with_extension("json"))?);
        serde_json::to_writer_pretty(&mut side, &self.sidecar())?;
        writeln!(side)?;
        Ok(())
    }

    fn sidecar(&self) -> Sidecar {
        Sidecar {
            dim: self.dim,
            lambda: self.lambda,
            nu: self.sign,
            amplitude: self.amplitude(),
            terminal: self.terminal(),
            grid: self.grid,
        }
    }

    pub fn sidecar_json(&self) -> serde_json::Value {
        serde_json::to_value(self.sidecar()).expect("sidecar is plain data")
    }

    /// Reads back a profile written by [`RadialProfile::save`].
    pub fn load(csv_path: &Path) -> Result<Self> {
        let side: Sidecar = serde_json::from_reader(File::open(csv_path.with_extension("json"))?)?;
        let mut rd = csv::Reader::from_path(csv_path)?;
        let (mut nodes, mut values, mut derivs) = (Vec::new(), Vec::new(), Vec::new());
        for rec in rd.records() {
            let rec = rec?;
            let num = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::InvalidArgument(format!("bad profile row {rec:?}")))
            };
            nodes.push(num(0)?);
            values.push(num(1)?);
            derivs.push(num(2)?);
        }
        if values.is_empty() {
            return Err(Error::InvalidArgument("empty profile".into()));
        }
        Ok(Self {
            nodes,
            values,
            derivs,
            sign: side.nu,
            lambda: side.lambda,
            dim: side.dim,
            grid: side.grid,
        })
    }
}
