use petgraph::algo::connected_components;
use petgraph::graph::{NodeIndex, UnGraph};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{LabError, Result};

/// Random point cloud on the unit 3-sphere in `R^4` with a symmetric k-nearest-neighbour
/// adjacency. Edge lengths are round-sphere angular distances.
#[derive(Debug, Clone)]
pub struct GraphSample {
    points: Vec<[f64; 4]>,
    edges: Vec<(usize, usize, f64)>,
}

impl GraphSample {
    /// Only `n = 3` is supported.
    pub fn new(n: usize, count: usize, k: usize, seed: u64) -> Result<Self> {
        if n != 3 {
            return Err(LabError::Domain(format!(
                "graph backend supports n = 3 only, got n = {n}"
            )));
        }
        if count < 2 || k == 0 {
            return Err(LabError::Domain("graph needs at least 2 points and k >= 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points: Vec<[f64; 4]> = (0..count)
            .map(|_| loop {
                let v: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(&mut rng));
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 1e-9 {
                    break v.map(|x| x / norm);
                }
            })
            .collect();
        Self::from_points(points, k)
    }

    /// Builds the adjacency for caller-supplied unit vectors.
    pub fn from_points(points: Vec<[f64; 4]>, k: usize) -> Result<Self> {
        let count = points.len();
        let k = k.min(count - 1);
        let neighbours: Vec<Vec<usize>> = (0..count)
            .into_par_iter()
            .map(|i| {
                let mut scored: Vec<(f64, usize)> = (0..count)
                    .filter(|&j| j != i)
                    .map(|j| (-dot(&points[i], &points[j]), j))
                    .collect();
                scored.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0));
                scored[..k].iter().map(|&(_, j)| j).collect()
            })
            .collect();
        let mut pairs: Vec<(usize, usize)> = neighbours
            .iter()
            .enumerate()
            .flat_map(|(i, js)| js.iter().map(move |&j| (i.min(j), i.max(j))))
            .collect();
        pairs.sort_unstable();
        pairs.dedup();
        let edges: Vec<(usize, usize, f64)> = pairs
            .into_iter()
            .map(|(i, j)| (i, j, angular_distance(&points[i], &points[j])))
            .collect();
        let sample = Self { points, edges };
        if connected_components(&sample.base_graph(|_, _, l| l)) != 1 {
            return Err(LabError::Disconnected(0));
        }
        Ok(sample)
    }

    pub fn n(&self) -> usize {
        3
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[[f64; 4]] {
        &self.points
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    /// Polar angle of node `i` measured from `e_0`.
    pub fn polar_angle(&self, i: usize) -> f64 {
        self.points[i][0].clamp(-1.0, 1.0).acos()
    }

    /// Angle between the azimuthal directions of nodes `i` and `j`, in `[0, π]`.
    pub fn azimuth_between(&self, i: usize, j: usize) -> f64 {
        let a = &self.points[i][1..];
        let b = &self.points[j][1..];
        let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        if na < 1e-12 || nb < 1e-12 {
            return 0.0;
        }
        let c: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb);
        c.clamp(-1.0, 1.0).acos()
    }

    /// Undirected petgraph view with edge weights produced by `weight(i, j, base_length)`.
    pub fn base_graph(&self, weight: impl Fn(usize, usize, f64) -> f64) -> UnGraph<(), f64> {
        let mut graph = UnGraph::with_capacity(self.points.len(), self.edges.len());
        for _ in 0..self.points.len() {
            graph.add_node(());
        }
        for &(i, j, l) in &self.edges {
            graph.add_edge(NodeIndex::new(i), NodeIndex::new(j), weight(i, j, l));
        }
        graph
    }
}

fn dot(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Great-circle distance between unit vectors, stable for nearly parallel inputs.
pub fn angular_distance(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let sum: f64 = a.iter().zip(b).map(|(x, y)| (x + y).powi(2)).sum::<f64>().sqrt();
    2.0 * diff.atan2(sum)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edges_carry_angular_lengths() {
        let s = GraphSample::new(3, 400, 10, 1).unwrap();
        for &(i, j, l) in s.edges() {
            let c = dot(&s.points()[i], &s.points()[j]).clamp(-1.0, 1.0);
            let reference = c.acos();
            assert!(((l - reference) / reference).abs() < 1e-12 || (l - reference).abs() < 1e-9);
        }
    }

    #[test]
    fn only_three_dimensional() {
        assert!(GraphSample::new(4, 100, 8, 1).is_err());
    }

    #[test]
    fn deterministic_for_seed() {
        let a = GraphSample::new(3, 200, 8, 42).unwrap();
        let b = GraphSample::new(3, 200, 8, 42).unwrap();
        assert_eq!(a.points(), b.points());
        assert_eq!(a.edges().len(), b.edges().len());
    }
}
