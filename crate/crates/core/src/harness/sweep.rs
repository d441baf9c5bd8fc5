use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::diameter;
use crate::covering::main_constant;
use crate::error::{LabError, Result};
use crate::sphere::{integrate, scalar_curvature, ConformalMetric, RadialGrid};
use crate::yamabe::sphere_sobolev_constant;

/// Allowed spread of `diameter / ∫R^{(n−1)/2}` across the sweep.
pub const SWEEP_TOL: f64 = 5e-2;

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub r: f64,
    pub diameter: f64,
    /// `∫R^{(n−1)/2} dv`.
    pub integral: f64,
    /// `diameter / integral`.
    pub ratio: f64,
    /// `ln(C(n) ∫R^{(n−1)/2} dv)`.
    pub bound_log: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepTable {
    pub n: usize,
    pub grid_m: usize,
    pub rows: Vec<SweepRow>,
    /// `(max − min)/min` of the ratio column.
    pub ratio_spread: f64,
    /// Whether the constancy assertion applied (at least two rows).
    pub asserted: bool,
    pub pass: bool,
}

impl SweepTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,diameter,integral,ratio,bound_log\n");
        for row in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                row.r, row.diameter, row.integral, row.ratio, row.bound_log
            );
        }
        out
    }
}

/// Default grid for sweeps.
const SWEEP_GRID: usize = 256;

/// Diameter and curvature integral of `r² g₀` for each radius.
pub fn sweep_sphere_family(radii: &[f64], n: usize) -> Result<SweepTable> {
    sweep_with(radii, n, SWEEP_GRID)
}

pub fn sweep_with(radii: &[f64], n: usize, grid_m: usize) -> Result<SweepTable> {
    if let Some(r) = radii.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
        return Err(LabError::Domain(format!("sweep radii must be positive, got {r}")));
    }
    let grid = Arc::new(RadialGrid::new(n, grid_m)?);
    let c = main_constant(n, sphere_sobolev_constant(n)?)?;
    let e = 0.5 * (n as f64 - 1.0);
    let rows: Vec<SweepRow> = radii
        .par_iter()
        .map(|&r| {
            let g = ConformalMetric::round(grid.clone(), r)?;
            let power = scalar_curvature(&g)?.map(|x| x.max(0.0).powf(e));
            let integral = integrate(&g, &power)?;
            let d = diameter(&g)?.value;
            Ok(SweepRow {
                r,
                diameter: d,
                integral,
                ratio: d / integral,
                bound_log: c.log + integral.ln(),
            })
        })
        .collect::<Result<_>>()?;
    let (lo, hi) = rows
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r.ratio), hi.max(r.ratio)));
    let ratio_spread = if rows.is_empty() { 0.0 } else { (hi - lo) / lo };
    let asserted = rows.len() >= 2;
    Ok(SweepTable {
        n,
        grid_m,
        rows,
        ratio_spread,
        asserted,
        pass: !asserted || ratio_spread <= SWEEP_TOL,
    })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;

    #[test]
    fn three_sphere_ratio() {
        let t = sweep_with(&[1.0, 2.0, 4.0, 8.0], 3, 128).unwrap();
        assert!(t.asserted && t.pass);
        for row in &t.rows {
            assert!((row.ratio * 12.0 * PI - 1.0).abs() < 0.02, "{}", row.ratio);
        }
        let single = sweep_with(&[2.0], 3, 64).unwrap();
        assert!(!single.asserted && single.pass && single.rows.len() == 1);
        assert!(sweep_with(&[0.0], 3, 64).is_err());
    }
}
