use std::path::Path;
use std::sync::Arc;

use serde::Serialize;

use super::graph::GraphSample;
use super::grid::{sphere_volume, RadialGrid};
use crate::error::{LabError, Result};

/// Real samples aligned with a backend's sample set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalarField {
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(LabError::Domain(format!("non-finite field value at sample {i}")));
        }
        Ok(Self { values })
    }

    pub fn constant(value: f64, len: usize) -> Self {
        Self {
            values: vec![value; len],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn positive_part(&self) -> Self {
        self.map(|v| v.max(0.0))
    }
}

/// Sample set carrying the geometry.
#[derive(Debug, Clone)]
pub enum Backend {
    Radial(Arc<RadialGrid>),
    Graph(Arc<GraphSample>),
}

impl Backend {
    pub fn len(&self) -> usize {
        match self {
            Backend::Radial(grid) => grid.m(),
            Backend::Graph(sample) => sample.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// The metric `g = φ^{4/(n−2)} g₀` on `S^n`, where `g₀` is the unit round metric.
#[derive(Debug, Clone)]
pub struct ConformalMetric {
    n: usize,
    backend: Backend,
    phi: ScalarField,
}

impl ConformalMetric {
    pub fn new(backend: Backend, phi: ScalarField) -> Result<Self> {
        let n = match &backend {
            Backend::Radial(grid) => grid.n(),
            Backend::Graph(sample) => sample.n(),
        };
        if phi.len() != backend.len() {
            return Err(LabError::Alignment {
                expected: backend.len(),
                got: phi.len(),
            });
        }
        let min = phi.min();
        if min.is_nan() || min <= 0.0 {
            return Err(LabError::InvalidMetric(format!(
                "conformal factor must be positive, min = {min}"
            )));
        }
        Ok(Self { n, backend, phi })
    }

    pub fn radial(grid: Arc<RadialGrid>, phi: ScalarField) -> Result<Self> {
        Self::new(Backend::Radial(grid), phi)
    }

    /// Radial metric whose factor is `phi(θ)` sampled on the grid.
    pub fn radial_fn(grid: Arc<RadialGrid>, phi: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.sample(phi);
        Self::radial(grid, ScalarField::new(values)?)
    }

    /// `r² g₀`, the round sphere of radius `r`.
    pub fn round(grid: Arc<RadialGrid>, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(LabError::Domain(format!("radius must be positive, got {radius}")));
        }
        let c = radius.powf((grid.n() as f64 - 2.0) / 2.0);
        Self::radial_fn(grid, |_| c)
    }

    /// Graph metric whose factor is a function of the ambient point.
    pub fn graph_fn(sample: Arc<GraphSample>, phi: impl Fn(&[f64; 4]) -> f64) -> Result<Self> {
        let values = sample.points().iter().map(phi).collect();
        Self::new(Backend::Graph(sample), ScalarField::new(values)?)
    }

    /// Reads a two-column `θ φ(θ)` table and interpolates it onto `grid`.
    pub fn from_table(grid: Arc<RadialGrid>, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_table_str(grid, &text)
    }

    pub fn from_table_str(grid: Arc<RadialGrid>, text: &str) -> Result<Self> {
        let mut rows: Vec<(f64, f64)> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|s| !s.is_empty())
                .collect();
            if cols.len() != 2 {
                return Err(LabError::Parse(format!(
                    "line {}: expected two columns, got {}",
                    lineno + 1,
                    cols.len()
                )));
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| LabError::Parse(format!("line {}: {e}", lineno + 1)))
            };
            rows.push((parse(cols[0])?, parse(cols[1])?));
        }
        if rows.len() < 2 {
            return Err(LabError::Parse("table needs at least two rows".into()));
        }
        if rows.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(LabError::Parse("θ column must be strictly increasing".into()));
        }
        let (first, last) = (rows[0].0, rows[rows.len() - 1].0);
        if first > 1e-9 || last < std::f64::consts::PI - 1e-9 {
            return Err(LabError::Parse(format!(
                "table covers [{first}, {last}], need [0, π]"
            )));
        }
        Self::radial_fn(grid, |t| {
            let k = rows.partition_point(|r| r.0 <= t).clamp(1, rows.len() - 1);
            let (t0, f0) = rows[k - 1];
            let (t1, f1) = rows[k];
            f0 + (f1 - f0) * (t - t0) / (t1 - t0)
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn backend(&self) -> &Backend {
        &self.backend
    }

    pub fn phi(&self) -> &ScalarField {
        &self.phi
    }

    pub fn radial_grid(&self) -> Option<&RadialGrid> {
        match &self.backend {
            Backend::Radial(grid) => Some(grid),
            Backend::Graph(_) => None,
        }
    }

    pub fn graph_sample(&self) -> Option<&GraphSample> {
        match &self.backend {
            Backend::Graph(sample) => Some(sample),
            Backend::Radial(_) => None,
        }
    }

    pub(crate) fn require_radial(&self, op: &'static str) -> Result<&RadialGrid> {
        self.radial_grid().ok_or(LabError::UnsupportedBackend(op))
    }

    /// Critical Sobolev exponent `2n/(n−2)`; also the volume exponent of `φ`.
    pub fn critical_exponent(&self) -> f64 {
        critical_exponent(self.n)
    }

    /// Length scale factor `φ^{2/(n−2)}` per sample.
    pub fn length_factor(&self) -> Vec<f64> {
        let e = 2.0 / (self.n as f64 - 2.0);
        self.phi.values().iter().map(|p| p.powf(e)).collect()
    }

    /// Volume element `φ^{2n/(n−2)}` per sample, relative to `dv₀`.
    pub fn volume_density(&self) -> Vec<f64> {
        let q = self.critical_exponent();
        self.phi.values().iter().map(|p| p.powf(q)).collect()
    }

    /// The metric `u^{4/(n−2)} g`, i.e. the factor `φ·u` over `g₀`.
    pub fn deform(&self, u: &ScalarField) -> Result<Self> {
        self.check_aligned(u)?;
        let values = self
            .phi
            .values()
            .iter()
            .zip(u.values())
            .map(|(p, v)| p * v)
            .collect();
        Self::new(self.backend.clone(), ScalarField::new(values)?)
    }

    /// The homothetic metric `c² g`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        let k = c.powf((self.n as f64 - 2.0) / 2.0);
        Self::new(self.backend.clone(), self.phi.map(|p| p * k))
    }

    pub fn check_aligned(&self, f: &ScalarField) -> Result<()> {
        if f.len() != self.backend.len() {
            return Err(LabError::Alignment {
                expected: self.backend.len(),
                got: f.len(),
            });
        }
        Ok(())
    }

    /// `dv_g` mass of each sample (including the `w_{n−1}` angular factor on the radial backend).
    pub fn sample_volumes(&self) -> Vec<f64> {
        let density = self.volume_density();
        match &self.backend {
            Backend::Radial(grid) => {
                let shell = sphere_volume(self.n as i64 - 1).expect("n >= 3");
                grid.weights()
                    .iter()
                    .zip(&density)
                    .map(|(w, d)| shell * w * d)
                    .collect()
            }
            Backend::Graph(sample) => {
                let each = sphere_volume(self.n as i64).expect("n >= 3") / sample.len() as f64;
                density.iter().map(|d| each * d).collect()
            }
        }
    }

    pub fn total_volume(&self) -> f64 {
        self.sample_volumes().iter().sum()
    }
}

pub fn critical_exponent(n: usize) -> f64 {
    2.0 * n as f64 / (n as f64 - 2.0)
}

/// Coefficient `4(n−1)/(n−2)` of the conformal Laplacian.
pub fn conformal_coefficient(n: usize) -> f64 {
    4.0 * (n as f64 - 1.0) / (n as f64 - 2.0)
}
