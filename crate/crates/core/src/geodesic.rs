//! Edge-graph geodesics and correspondence metrics.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom;
use crate::mesh::{Label, Mesh};

/// Meshes with at most this many vertices get an exact diameter.
pub const EXACT_DIAMETER_LIMIT: usize = 5000;
pub const SAMPLED_SOURCES: usize = 100;
pub const DEFAULT_RADII_STEPS: usize = 64;
pub const DEFAULT_RADII_SPAN: f64 = 0.3;
/// The normalized curve rescales radii as if the diameter were this long.
pub const NORMALIZED_DIAMETER: f64 = 200.0;

/// Undirected graph with non-negative edge weights.
#[derive(Clone, Debug)]
pub struct EdgeGraph {
    adj: Vec<Vec<(usize, f64)>>,
}

impl EdgeGraph {
    pub fn from_edges(vertex_count: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut adj = vec![Vec::new(); vertex_count];
        for &(a, b, w) in edges {
            if a >= vertex_count || b >= vertex_count {
                return Err(Error::Validation(format!("edge ({a}, {b}) out of range")));
            }
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::Validation(format!("edge ({a}, {b}) has weight {w}")));
            }
            adj[a].push((b, w));
            adj[b].push((a, w));
        }
        Ok(Self { adj })
    }

    /// Mesh edges weighted by Euclidean length.
    pub fn from_mesh(mesh: &Mesh) -> Self {
        let v = mesh.vertices();
        let mut adj = vec![Vec::new(); mesh.vertex_count()];
        for e in mesh.edge_index().edges() {
            let [a, b] = e.verts;
            let w = geom::dist(v[a], v[b]);
            adj[a].push((b, w));
            adj[b].push((a, w));
        }
        Self { adj }
    }

    pub fn vertex_count(&self) -> usize {
        self.adj.len()
    }

    /// Dijkstra from `source`; unreachable vertices stay at infinity.
    pub fn distances(&self, source: usize) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; self.adj.len()];
        let mut heap = BinaryHeap::new();
        dist[source] = 0.0;
        heap.push(Reverse((Key(0.0), source)));
        while let Some(Reverse((Key(d), u))) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            for &(v, w) in &self.adj[u] {
                let nd = d + w;
                if nd < dist[v] {
                    dist[v] = nd;
                    heap.push(Reverse((Key(nd), v)));
                }
            }
        }
        dist
    }

    pub fn field(&self, source: usize) -> Result<GeodesicField> {
        if source >= self.adj.len() {
            return Err(Error::Validation(format!(
                "source {source} out of range for {} vertices",
                self.adj.len()
            )));
        }
        let distances = self.distances(source);
        let unreachable: Vec<usize> = (0..distances.len()).filter(|&v| distances[v].is_infinite()).collect();
        if !unreachable.is_empty() {
            return Err(Error::Disconnected(unreachable));
        }
        Ok(GeodesicField { source, distances })
    }
}

#[derive(Clone, Copy, Debug)]
struct Key(f64);
impl PartialEq for Key {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other).is_eq()
    }
}
impl Eq for Key {}
impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Key {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Shortest-path distances from one source vertex.
#[derive(Clone, Debug, PartialEq)]
pub struct GeodesicField {
    pub source: usize,
    pub distances: Vec<f64>,
}

impl GeodesicField {
    pub fn max(&self) -> f64 {
        self.distances.iter().copied().fold(0.0, f64::max)
    }

    /// Vertex farthest from the source; lowest index on ties.
    pub fn farthest(&self) -> usize {
        let mut best = 0;
        for (v, &d) in self.distances.iter().enumerate() {
            if d > self.distances[best] {
                best = v;
            }
        }
        best
    }
}

pub fn geodesic_from(mesh: &Mesh, source: usize) -> Result<GeodesicField> {
    EdgeGraph::from_mesh(mesh).field(source)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiameterMode {
    /// Exact below the vertex limit, sampled above it.
    Auto,
    Exact,
    /// Farthest-point sampling with this many sources.
    Sampled(usize),
}

pub fn geodesic_diameter(mesh: &Mesh) -> Result<f64> {
    graph_diameter(&EdgeGraph::from_mesh(mesh), DiameterMode::Auto)
}

pub fn graph_diameter(graph: &EdgeGraph, mode: DiameterMode) -> Result<f64> {
    let n = graph.vertex_count();
    if n == 0 {
        return Ok(0.0);
    }
    let first = graph.field(0)?;
    let mode = match mode {
        DiameterMode::Auto if n <= EXACT_DIAMETER_LIMIT => DiameterMode::Exact,
        DiameterMode::Auto => DiameterMode::Sampled(SAMPLED_SOURCES),
        m => m,
    };
    match mode {
        DiameterMode::Exact => Ok((0..n)
            .into_par_iter()
            .map(|s| graph.distances(s).into_iter().fold(0.0, f64::max))
            .reduce(|| 0.0, f64::max)),
        DiameterMode::Sampled(k) => {
            // farthest-point sampling, seeded at the vertex farthest from 0
            let mut source = first.farthest();
            let mut nearest = vec![f64::INFINITY; n];
            let mut diameter = first.max();
            for _ in 0..k.max(1) {
                let d = graph.distances(source);
                diameter = diameter.max(d.iter().copied().fold(0.0, f64::max));
                for (m, x) in nearest.iter_mut().zip(&d) {
                    *m = m.min(*x);
                }
                source = (0..n).fold(0, |b, v| if nearest[v] > nearest[b] { v } else { b });
                if nearest[source] == 0.0 {
                    break;
                }
            }
            Ok(diameter)
        }
        DiameterMode::Auto => unreachable!(),
    }
}

/// `steps` radii evenly spaced over [0, span * diameter], both ends included.
pub fn default_radii(diameter: f64) -> Vec<f64> {
    radii_grid(diameter * DEFAULT_RADII_SPAN, DEFAULT_RADII_STEPS)
}

pub fn radii_grid(max: f64, steps: usize) -> Vec<f64> {
    match steps {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..steps).map(|i| max * i as f64 / (steps - 1) as f64).collect(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    pub radius: f64,
    /// `radius` rescaled as if the diameter were 200.
    pub radius_normalized: f64,
    pub fraction: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub accuracy: f64,
    /// Mean error over labeled vertices, divided by the diameter, times 100.
    pub mean_geo_error: f64,
    pub curve: Vec<CurvePoint>,
    pub diameter: f64,
    /// Per-vertex error; `None` where ground truth is missing.
    pub errors: Vec<Option<f64>>,
}

impl MetricsReport {
    /// Fraction of labeled vertices with error at most `radius`.
    pub fn fraction_within(&self, radius: f64) -> f64 {
        let (hit, n) = self
            .errors
            .iter()
            .flatten()
            .fold((0usize, 0usize), |(h, n), &e| (h + usize::from(e <= radius), n + 1));
        if n == 0 {
            0.0
        } else {
            hit as f64 / n as f64
        }
    }

    pub fn to_json(&self) -> String {
        let v = serde_json::json!({
            "accuracy": self.accuracy,
            "mean_geo_error": self.mean_geo_error,
            "diameter": self.diameter,
        });
        serde_json::to_string_pretty(&v).expect("plain numbers serialize")
    }

    pub fn curve_csv(&self) -> String {
        let mut s = String::from("radius_cm,radius_norm200,fraction\n");
        for p in &self.curve {
            let _ = writeln!(s, "{},{},{}", p.radius, p.radius_normalized, p.fraction);
        }
        s
    }

    /// White at zero error to red at `saturation`; blue where ground truth is missing.
    pub fn error_colors(&self, saturation: f64) -> Vec<[u8; 3]> {
        self.errors
            .iter()
            .map(|e| match e {
                None => [0, 0, 255],
                Some(e) => {
                    let t = if saturation > 0.0 { (e / saturation).clamp(0.0, 1.0) } else { 1.0 };
                    let g = (255.0 * (1.0 - t)).round() as u8;
                    [255, g, g]
                }
            })
            .collect()
    }
}

/// Scores predicted reference-vertex labels against the ground truth.
pub fn evaluate(predicted: &[usize], truth: &[Label], reference: &Mesh, radii: &[f64]) -> Result<MetricsReport> {
    let graph = EdgeGraph::from_mesh(reference);
    let diameter = graph_diameter(&graph, DiameterMode::Auto)?;
    evaluate_on(&graph, diameter, predicted, truth, radii, 1)
}

/// Like [`evaluate`] with a prebuilt graph and known diameter; per-source
/// Dijkstra runs use up to `jobs` threads.
pub fn evaluate_on(
    graph: &EdgeGraph,
    diameter: f64,
    predicted: &[usize],
    truth: &[Label],
    radii: &[f64],
    jobs: usize,
) -> Result<MetricsReport> {
    if predicted.len() != truth.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} predictions for {} ground-truth labels",
            predicted.len(),
            truth.len()
        )));
    }
    let n = graph.vertex_count();
    for &l in predicted.iter().chain(truth.iter().flatten()) {
        if l >= n {
            return Err(Error::LabelOutOfRange {
                label: l as i64,
                count: n,
            });
        }
    }
    let sources: Vec<usize> = {
        let mut s: Vec<usize> = truth.iter().flatten().copied().collect();
        s.sort_unstable();
        s.dedup();
        s
    };
    let run = || -> BTreeMap<usize, Vec<f64>> {
        sources.par_iter().map(|&s| (s, graph.distances(s))).collect()
    };
    let fields = if jobs > 1 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(run)
    } else {
        sources.iter().map(|&s| (s, graph.distances(s))).collect()
    };
    let mut errors = Vec::with_capacity(truth.len());
    for (&p, t) in predicted.iter().zip(truth) {
        errors.push(match t {
            Some(t) => {
                let d = fields[t][p];
                if d.is_infinite() {
                    return Err(Error::Disconnected(vec![p]));
                }
                Some(d)
            }
            None => None,
        });
    }
    let labeled: Vec<f64> = errors.iter().flatten().copied().collect();
    let count = labeled.len().max(1) as f64;
    let exact = predicted
        .iter()
        .zip(truth)
        .filter(|(p, t)| t.is_some_and(|t| t == **p))
        .count();
    let accuracy = if labeled.is_empty() { 0.0 } else { exact as f64 / count };
    let mean = labeled.iter().sum::<f64>() / count;
    let mean_geo_error = if diameter > 0.0 { mean / diameter * 100.0 } else { 0.0 };
    let mut report = MetricsReport {
        accuracy,
        mean_geo_error,
        curve: Vec::new(),
        diameter,
        errors,
    };
    report.curve = radii
        .iter()
        .map(|&r| CurvePoint {
            radius: r,
            radius_normalized: if diameter > 0.0 { r * NORMALIZED_DIAMETER / diameter } else { 0.0 },
            fraction: report.fraction_within(r),
        })
        .collect();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::primitives;

    fn path3() -> EdgeGraph {
        EdgeGraph::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap()
    }

    #[test]
    fn two_edge_path() {
        let g = path3();
        assert_eq!(g.field(0).unwrap().distances, vec![0.0, 1.0, 2.0]);
        assert_eq!(graph_diameter(&g, DiameterMode::Exact).unwrap(), 2.0);
        assert_eq!(graph_diameter(&g, DiameterMode::Sampled(2)).unwrap(), 2.0);
    }

    #[test]
    fn disconnected_lists_unreachable() {
        let g = EdgeGraph::from_edges(4, &[(0, 1, 1.0)]).unwrap();
        assert!(matches!(g.field(0), Err(Error::Disconnected(v)) if v == vec![2, 3]));
        assert!(graph_diameter(&g, DiameterMode::Exact).is_err());
    }

    #[test]
    fn icosahedron_antipode_is_three_edges() {
        let m = primitives::icosahedron();
        let [a, b] = m.edge_index().edges()[0].verts;
        let edge = geom::dist(m.vertices()[a], m.vertices()[b]);
        let f = geodesic_from(&m, 0).unwrap();
        assert!((f.max() - 3.0 * edge).abs() < 1e-12);
        assert!((geodesic_diameter(&m).unwrap() - 3.0 * edge).abs() < 1e-12);
        // circumradius 1: edge = 4 / sqrt(10 + 2 sqrt 5)
        let closed = 4.0 / (10.0 + 2.0 * 5f64.sqrt()).sqrt();
        assert!((edge - closed).abs() < 1e-12);
        assert!((3.0 * edge - 3.15439).abs() < 1e-5);
    }

    #[test]
    fn identity_prediction_is_perfect() {
        let m = primitives::icosphere(1);
        let truth: Vec<Label> = (0..m.vertex_count()).map(Some).collect();
        let pred: Vec<usize> = (0..m.vertex_count()).collect();
        let r = evaluate(&pred, &truth, &m, &[0.0, 0.1, 1.0]).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.mean_geo_error, 0.0);
        assert!(r.curve.iter().all(|p| p.fraction == 1.0));
    }

    #[test]
    fn out_of_range_labels() {
        let m = primitives::tetrahedron();
        let r = evaluate(&[0, 9, 0, 0], &[Some(0); 4], &m, &[]);
        assert!(matches!(r, Err(Error::LabelOutOfRange { label: 9, count: 4 })));
    }

    #[test]
    fn unlabeled_vertices_are_excluded() {
        let m = primitives::icosphere(1);
        let g = EdgeGraph::from_mesh(&m);
        let d = graph_diameter(&g, DiameterMode::Exact).unwrap();
        let pred = vec![0, 5, 7, 3];
        let truth = vec![Some(0), None, Some(1), Some(3)];
        let a = evaluate_on(&g, d, &pred, &truth, &[0.0, 0.5], 1).unwrap();
        let b = evaluate_on(&g, d, &[0, 7, 3], &[Some(0), Some(1), Some(3)], &[0.0, 0.5], 1).unwrap();
        assert_eq!(a.accuracy, b.accuracy);
        assert_eq!(a.mean_geo_error, b.mean_geo_error);
        assert_eq!(a.curve, b.curve);
    }

    #[test]
    fn parallel_matches_serial() {
        let m = primitives::icosphere(2);
        let g = EdgeGraph::from_mesh(&m);
        let truth: Vec<Label> = (0..m.vertex_count()).map(Some).collect();
        let pred: Vec<usize> = (0..m.vertex_count()).map(|v| (v * 7) % m.vertex_count()).collect();
        let a = evaluate_on(&g, 3.0, &pred, &truth, &[0.5], 1).unwrap();
        let b = evaluate_on(&g, 3.0, &pred, &truth, &[0.5], 4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn radii_grid_spans_range() {
        let r = default_radii(10.0);
        assert_eq!(r.len(), 64);
        assert_eq!(r[0], 0.0);
        assert!((r[63] - 3.0).abs() < 1e-15);
    }

    #[test]
    fn colors() {
        let r = MetricsReport {
            accuracy: 0.0,
            mean_geo_error: 0.0,
            curve: vec![],
            diameter: 1.0,
            errors: vec![Some(0.0), Some(0.5), Some(2.0), None],
        };
        assert_eq!(r.error_colors(1.0), vec![[255, 255, 255], [255, 128, 128], [255, 0, 0], [0, 0, 255]]);
    }
}
