use std::f64::consts::PI;
use std::sync::Arc;

use petgraph::algo::{astar, dijkstra};
use petgraph::graph::{NodeIndex, UnGraph};
use rayon::prelude::*;
use serde::Serialize;

use super::slice::{march, SliceField, SliceGeometry};
use crate::error::{LabError, Result};
use crate::sphere::{Backend, ConformalMetric};

/// A point of `M`.
///
/// `Slice` is `(cos θ, sin θ cos α, sin θ sin α, 0, …)` with `θ, α ∈ [0, π]`; every point of
/// a rotationally symmetric metric is isometric to one of these. `Node` indexes a graph
/// sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Point {
    Slice { theta: f64, alpha: f64 },
    Node { index: usize },
}

impl Point {
    pub fn slice(theta: f64, alpha: f64) -> Self {
        Point::Slice {
            theta: theta.clamp(0.0, PI),
            alpha: alpha.clamp(0.0, PI),
        }
    }

    pub fn north() -> Self {
        Point::slice(0.0, 0.0)
    }

    pub fn south() -> Self {
        Point::slice(PI, 0.0)
    }

    pub fn node(index: usize) -> Self {
        Point::Node { index }
    }

    pub fn is_pole(&self) -> bool {
        matches!(self, Point::Slice { theta, .. } if *theta <= 1e-12 || *theta >= PI - 1e-12)
    }

    /// Short label used in exported tables.
    pub fn label(&self) -> String {
        match self {
            Point::Slice { theta, alpha } => format!("slice({theta:.6},{alpha:.6})"),
            Point::Node { index } => format!("node({index})"),
        }
    }
}

/// Geodesic distance from one source to every sample of the backend.
#[derive(Debug, Clone)]
pub enum DistanceField {
    /// Fast-marching field on the slice, computed from `(θ_source, 0)`; queries are
    /// rotated by the source azimuth.
    Slice {
        geometry: Arc<SliceGeometry>,
        field: SliceField,
        source: Point,
    },
    Graph { values: Vec<f64>, source: usize },
}

impl DistanceField {
    pub fn source(&self) -> Point {
        match self {
            DistanceField::Slice { source, .. } => *source,
            DistanceField::Graph { source, .. } => Point::node(*source),
        }
    }

    /// Distance from the source to `q`.
    pub fn at(&self, q: &Point) -> Result<f64> {
        match (self, q) {
            (
                DistanceField::Slice {
                    geometry,
                    field,
                    source,
                },
                Point::Slice { theta, alpha },
            ) => {
                let (t, a) = relative(source, *theta, *alpha);
                Ok(field.at(geometry, t, a))
            }
            (DistanceField::Graph { values, .. }, Point::Node { index }) => values
                .get(*index)
                .copied()
                .ok_or_else(|| LabError::Domain(format!("node {index} out of range"))),
            _ => Err(LabError::Domain(
                "point kind does not match the distance backend".into(),
            )),
        }
    }

    /// Largest sampled distance and where it is attained.
    pub fn farthest(&self) -> (f64, Point) {
        match self {
            DistanceField::Slice {
                geometry,
                field,
                source,
            } => {
                let (v, t, a) = field.max(geometry);
                let base = match source {
                    Point::Slice { alpha, .. } => *alpha,
                    Point::Node { .. } => 0.0,
                };
                // rotate back into the caller's frame, reflecting through α ∈ [0, π]
                let mut alpha = base + a;
                if alpha > PI {
                    alpha = (2.0 * PI - alpha).max(0.0);
                }
                (v, Point::slice(t, alpha))
            }
            DistanceField::Graph { values, .. } => {
                let (i, v) = values
                    .iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |b, (i, &v)| if v > b.1 { (i, v) } else { b });
                (v, Point::node(i))
            }
        }
    }
}

/// Coordinates of `(θ, α)` in the frame where `source` has azimuth zero.
fn relative(source: &Point, theta: f64, alpha: f64) -> (f64, f64) {
    match source {
        Point::Slice { alpha: a0, .. } => (theta, (alpha - a0).abs()),
        Point::Node { .. } => (theta, alpha),
    }
}

/// Graph with edge weights `base_length·(ℓ_i + ℓ_j)/2`, `ℓ = φ^{2/(n−2)}`.
pub(crate) fn weighted_graph(g: &ConformalMetric) -> Result<UnGraph<(), f64>> {
    let sample = g
        .graph_sample()
        .ok_or(LabError::UnsupportedBackend("weighted graph"))?;
    let ell = g.length_factor();
    Ok(sample.base_graph(|i, j, l| l * 0.5 * (ell[i] + ell[j])))
}

pub(crate) fn graph_field(graph: &UnGraph<(), f64>, source: usize) -> Result<DistanceField> {
    if source >= graph.node_count() {
        return Err(LabError::Domain(format!("node {source} out of range")));
    }
    let map = dijkstra(graph, NodeIndex::new(source), None, |e| *e.weight());
    let mut values = vec![f64::INFINITY; graph.node_count()];
    for (k, v) in map {
        values[k.index()] = v;
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(LabError::Disconnected(i));
    }
    Ok(DistanceField::Graph { values, source })
}

fn slice_field(geometry: &Arc<SliceGeometry>, p: &Point) -> Result<DistanceField> {
    let Point::Slice { theta, .. } = p else {
        return Err(LabError::Domain("radial backend needs slice points".into()));
    };
    Ok(DistanceField::Slice {
        geometry: geometry.clone(),
        field: march(geometry, *theta, 0.0),
        source: *p,
    })
}

/// Distance field from `p`.
pub fn distance_field(g: &ConformalMetric, p: &Point) -> Result<DistanceField> {
    match g.backend() {
        Backend::Radial(_) => slice_field(&Arc::new(SliceGeometry::new(g)?), p),
        Backend::Graph(_) => {
            let Point::Node { index } = p else {
                return Err(LabError::Domain("graph backend needs node points".into()));
            };
            graph_field(&weighted_graph(g)?, *index)
        }
    }
}

/// Geodesic distance between `p` and `q`.
pub fn distance(g: &ConformalMetric, p: &Point, q: &Point) -> Result<f64> {
    distance_field(g, p)?.at(q)
}

/// Measured diameter with the pair attaining it.
#[derive(Debug, Clone, Serialize)]
pub struct DiameterMeasurement {
    pub value: f64,
    pub endpoints: (Point, Point),
    /// Number of source points examined.
    pub sources: usize,
    /// Radial grid size or graph sample count.
    pub resolution: usize,
}

/// Number of non-polar candidate sources on the slice.
const SLICE_SOURCES: usize = 7;
/// Evenly spaced graph sources added to the double sweep.
const GRAPH_SOURCES: usize = 8;

/// Maximum of the distance fields from a deterministic set of candidate sources.
///
/// Radial backend: both poles and `θ_k = kπ/8`, `k = 1..7`, on the `α = 0` meridian.
/// Graph backend: a three-step double sweep from node 0 plus evenly spaced nodes.
pub fn diameter(g: &ConformalMetric) -> Result<DiameterMeasurement> {
    match g.backend() {
        Backend::Radial(grid) => {
            let geometry = Arc::new(SliceGeometry::new(g)?);
            let mut sources = vec![Point::north(), Point::south()];
            sources.extend(
                (1..=SLICE_SOURCES).map(|k| Point::slice(k as f64 * PI / (SLICE_SOURCES + 1) as f64, 0.0)),
            );
            let fields: Vec<(f64, Point, Point)> = sources
                .par_iter()
                .map(|p| {
                    let f = slice_field(&geometry, p)?;
                    let (v, q) = f.farthest();
                    Ok((v, *p, q))
                })
                .collect::<Result<_>>()?;
            Ok(best_pair(&fields, grid.m()))
        }
        Backend::Graph(sample) => {
            let graph = weighted_graph(g)?;
            let mut fields = Vec::new();
            let mut src = 0;
            for _ in 0..3 {
                let f = graph_field(&graph, src)?;
                let (v, q) = f.farthest();
                fields.push((v, Point::node(src), q));
                let Point::Node { index } = q else { unreachable!() };
                src = index;
            }
            let n = sample.len();
            let extra: Vec<(f64, Point, Point)> = (0..GRAPH_SOURCES)
                .into_par_iter()
                .map(|k| {
                    let s = k * n / GRAPH_SOURCES;
                    let (v, q) = graph_field(&graph, s)?.farthest();
                    Ok((v, Point::node(s), q))
                })
                .collect::<Result<_>>()?;
            fields.extend(extra);
            Ok(best_pair(&fields, n))
        }
    }
}

fn best_pair(fields: &[(f64, Point, Point)], resolution: usize) -> DiameterMeasurement {
    let best = fields
        .iter()
        .fold(fields[0], |b, f| if f.0 > b.0 { *f } else { b });
    DiameterMeasurement {
        value: best.0,
        endpoints: (best.1, best.2),
        sources: fields.len(),
        resolution,
    }
}

/// Discrete shortest path from `x` to `y`.
///
/// `t[k]` is the distance from `x` to `points[k]`, non-decreasing, with `t[0] = 0` and the
/// last entry equal to `length = dist(x, y)`. Slice points are expressed in the frame
/// where `x` has azimuth zero.
#[derive(Debug, Clone, Serialize)]
pub struct Geodesic {
    pub points: Vec<Point>,
    pub t: Vec<f64>,
    pub length: f64,
}

/// Shortest path from `x` to `y`: gradient backtracking on the fast-marching field,
/// resampled to uniform arclength (radial), or the Dijkstra path (graph).
pub fn geodesic(g: &ConformalMetric, x: &Point, y: &Point) -> Result<Geodesic> {
    match g.backend() {
        Backend::Radial(_) => {
            let geometry = Arc::new(SliceGeometry::new(g)?);
            let (Point::Slice { theta: tx, alpha: ax }, Point::Slice { theta: ty, alpha: ay }) =
                (x, y)
            else {
                return Err(LabError::Domain("radial backend needs slice points".into()));
            };
            let field = march(&geometry, *tx, 0.0);
            Ok(backtrack(&geometry, &field, *tx, *ty, (ay - ax).abs()))
        }
        Backend::Graph(_) => {
            let (Point::Node { index: xi }, Point::Node { index: yi }) = (x, y) else {
                return Err(LabError::Domain("graph backend needs node points".into()));
            };
            let graph = weighted_graph(g)?;
            let (length, path) = astar(
                &graph,
                NodeIndex::new(*xi),
                |n| n.index() == *yi,
                |e| *e.weight(),
                |_| 0.0,
            )
            .ok_or(LabError::Disconnected(*yi))?;
            let mut t = vec![0.0];
            for w in path.windows(2) {
                let e = graph.find_edge(w[0], w[1]).expect("path edge");
                t.push(t.last().unwrap() + graph[e]);
            }
            Ok(Geodesic {
                points: path.iter().map(|n| Point::node(n.index())).collect(),
                t,
                length,
            })
        }
    }
}

fn backtrack(geo: &SliceGeometry, field: &SliceField, tx: f64, ty: f64, ay: f64) -> Geodesic {
    let h = geo.theta_step();
    let ha = geo.alpha_step();
    let value = |t: f64, a: f64| field.at(geo, t, a);
    let total = value(ty, ay);
    let mut path = vec![(ty, ay)];
    let (mut t, mut a) = (ty, ay);
    let mut sigma = 0.5 * h * geo.length_factor(t);
    let limit = 40 * (geo.rows() + geo.columns());
    for _ in 0..limit {
        let d = value(t, a);
        if d <= sigma || sigma < 1e-9 * h {
            break;
        }
        let (nt, na) = if t <= 1e-12 || t >= PI - 1e-12 {
            // leave a pole along the best meridian
            let row = if t <= 1e-12 { h } else { PI - h };
            let j = (0..geo.columns())
                .min_by(|&i, &k| value(row, geo.alpha(i)).total_cmp(&value(row, geo.alpha(k))))
                .unwrap_or(0);
            (row, geo.alpha(j))
        } else {
            let et = 0.25 * h;
            let ea = 0.25 * ha;
            let gt = (value((t + et).min(PI), a) - value((t - et).max(0.0), a))
                / ((t + et).min(PI) - (t - et).max(0.0));
            let ga = (value(t, (a + ea).min(PI)) - value(t, (a - ea).max(0.0)))
                / ((a + ea).min(PI) - (a - ea).max(0.0));
            let s = t.sin().max(h);
            let ell = geo.length_factor(t);
            let (vt, va) = (-gt, -ga / (s * s));
            let norm = ell * (vt * vt + s * s * va * va).sqrt();
            if !(norm > 0.0) {
                break;
            }
            let scale = sigma / norm;
            let mut na = a + va * scale;
            if na < 0.0 {
                na = -na;
            }
            if na > PI {
                na = 2.0 * PI - na;
            }
            ((t + vt * scale).clamp(0.0, PI), na.clamp(0.0, PI))
        };
        if value(nt, na) < d {
            t = nt;
            a = na;
            path.push((t, a));
            sigma = (sigma * 2.0).min(0.5 * h * geo.length_factor(t));
        } else {
            sigma *= 0.5;
        }
    }
    path.push((tx, 0.0));
    path.reverse();
    resample(geo, field, &path, total)
}

fn resample(geo: &SliceGeometry, field: &SliceField, path: &[(f64, f64)], total: f64) -> Geodesic {
    let mut arc = vec![0.0];
    for w in path.windows(2) {
        let (dt, da) = (w[1].0 - w[0].0, w[1].1 - w[0].1);
        let seg = geo.segment(0.5 * (w[0].0 + w[1].0), dt, da);
        arc.push(arc.last().unwrap() + seg);
    }
    let len = *arc.last().unwrap();
    let step = geo.theta_step() * geo.length_factor(path[0].0).max(1e-12);
    let count = ((len / step).ceil() as usize).max(1) + 1;
    let mut points = Vec::with_capacity(count);
    let mut k = 0;
    for s in 0..count {
        let target = len * s as f64 / (count - 1) as f64;
        while k + 2 < arc.len() && arc[k + 1] < target {
            k += 1;
        }
        let span = arc[k + 1] - arc[k];
        let f = if span > 0.0 {
            ((target - arc[k]) / span).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let (t0, a0) = path[k];
        let (t1, a1) = path[(k + 1).min(path.len() - 1)];
        points.push((t0 + f * (t1 - t0), a0 + f * (a1 - a0)));
    }
    let mut t: Vec<f64> = points.iter().map(|&(a, b)| field.at(geo, a, b)).collect();
    t[0] = 0.0;
    *t.last_mut().unwrap() = total;
    for k in 1..t.len() {
        t[k] = t[k].max(t[k - 1]).min(total);
    }
    Geodesic {
        points: points.into_iter().map(|(a, b)| Point::slice(a, b)).collect(),
        t,
        length: total,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::RadialGrid;

    fn round(m: usize, r: f64) -> ConformalMetric {
        ConformalMetric::round(Arc::new(RadialGrid::new(3, m).unwrap()), r).unwrap()
    }

    #[test]
    fn antipodal_distance_is_pi() {
        let g = round(256, 1.0);
        let d = distance(&g, &Point::north(), &Point::south()).unwrap();
        assert!((d - PI).abs() < 0.01 * PI);
        let d = distance(&g, &Point::slice(PI / 2.0, 0.0), &Point::slice(PI / 2.0, PI)).unwrap();
        assert!((d - PI).abs() < 0.01 * PI, "{d}");
    }

    #[test]
    fn homothety_scales_distances() {
        let (p, q) = (Point::slice(0.4, 0.3), Point::slice(2.2, 2.9));
        let d1 = distance(&round(128, 1.0), &p, &q).unwrap();
        let d3 = distance(&round(128, 3.0), &p, &q).unwrap();
        assert!((d3 / d1 - 3.0).abs() < 1e-3 * 3.0);
    }

    #[test]
    fn azimuth_frame_is_rotation_invariant() {
        let g = round(128, 1.0);
        let a = distance(&g, &Point::slice(1.0, 0.5), &Point::slice(2.0, 1.5)).unwrap();
        let b = distance(&g, &Point::slice(1.0, 0.0), &Point::slice(2.0, 1.0)).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn round_diameter() {
        let m = diameter(&round(128, 2.0)).unwrap();
        assert!((m.value - 2.0 * PI).abs() < 0.01 * 2.0 * PI);
        assert_eq!(m.sources, 9);
    }

    #[test]
    fn geodesic_is_monotone_and_spans_the_distance() {
        let g = round(128, 1.0);
        let path = geodesic(&g, &Point::slice(0.5, 0.0), &Point::slice(2.5, 2.0)).unwrap();
        assert_eq!(path.t[0], 0.0);
        assert!(path.t.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(*path.t.last().unwrap(), path.length);
        let exact = (0.5f64.cos() * 2.5f64.cos() + 0.5f64.sin() * 2.5f64.sin() * 2.0f64.cos()).acos();
        assert!((path.length - exact).abs() < 0.02 * exact);
        let Point::Slice { theta, alpha } = *path.points.last().unwrap() else { panic!() };
        assert!((theta - 2.5).abs() < 1e-9 && (alpha - 2.0).abs() < 1e-9);
    }
}
