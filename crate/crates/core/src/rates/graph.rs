use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kappa::{log_kappa, log_partition_function, KappaOptions, Normalization};
use super::weights::{equilibrium_weights, WeightMethod};
use crate::dynamics::{deduplicate, descend};
use crate::error::{require_positive, Error, Result};
use crate::linalg;
use crate::potentials::Landscape;
use crate::string_zero::{converge_string, init_string, StringPath};

/// Settings for [`build_graph`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphOptions {
    pub capture_radius: f64,
    pub friction: f64,
    pub images: usize,
    pub string_dt: f64,
    pub string_tol: f64,
    pub max_iter: usize,
    pub descent_tol: f64,
    pub dedup_distance: f64,
}

impl Default for GraphOptions {
    fn default() -> Self {
        Self {
            capture_radius: 0.2,
            friction: 1.0,
            images: 50,
            string_dt: 1e-4,
            string_tol: 1e-4,
            max_iter: 100_000,
            descent_tol: 1e-10,
            dedup_distance: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphNode {
    pub minimum: Vec<f64>,
    pub energy: f64,
    /// Laplace basin weight, normalized over all nodes.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub from: usize,
    pub to: usize,
    pub mep: StringPath,
    pub saddle: Vec<f64>,
    pub barrier_forward: f64,
    pub barrier_backward: f64,
    pub log_kappa: f64,
    /// `ε / (κ N_from)`
    pub rate_forward: f64,
    /// `ε / (κ N_to)`
    pub rate_backward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PairOutcome {
    Linked,
    /// The converged path passes within the capture radius of `via`.
    Rejected {
        via: usize,
    },
    /// String relaxation or κ quadrature failed.
    Unresolved {
        reason: String,
    },
}

/// Metastable sets and the minimum energy paths linking them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovGraph {
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
    /// Outcome for every unordered pair `(i, j)`, `i < j`.
    pub pairs: Vec<(usize, usize, PairOutcome)>,
    pub kt: f64,
    pub epsilon: f64,
}

impl MarkovGraph {
    pub fn unresolved(&self) -> impl Iterator<Item = &(usize, usize, PairOutcome)> {
        self.pairs
            .iter()
            .filter(|p| matches!(p.2, PairOutcome::Unresolved { .. }))
    }
}

/// Builds the graph of metastable sets: seeds descend to minima, which are
/// deduplicated and sorted by energy; every pair is joined by a relaxed
/// string and linked unless the path passes through the capture ball of a
/// third minimum. Linked edges carry κ and the two-state rates at noise
/// strength `ε = 2γ k_BT`.
pub fn build_graph<L: Landscape + ?Sized>(
    landscape: &L,
    seeds: &[Vec<f64>],
    kt: f64,
    options: &GraphOptions,
) -> Result<MarkovGraph> {
    require_positive("k_BT", kt)?;
    require_positive("capture_radius", options.capture_radius)?;
    if seeds.is_empty() {
        return Err(Error::Configuration(
            "graph construction needs seeds".into(),
        ));
    }
    let mut found = Vec::new();
    for s in seeds {
        match descend(landscape, s, options.descent_tol) {
            Ok(m) => found.push(m),
            Err(Error::NotAMinimum(msg)) => log::warn!("seed {s:?} skipped: {msg}"),
            Err(e) => return Err(e),
        }
    }
    let mut minima = deduplicate(found, options.dedup_distance);
    minima.sort_by(|a, b| landscape.value(a).total_cmp(&landscape.value(b)));
    let weights = equilibrium_weights(landscape, &minima, kt, &WeightMethod::Laplace)?;
    let nodes: Vec<GraphNode> = minima
        .iter()
        .zip(&weights)
        .map(|(m, w)| GraphNode {
            minimum: m.clone(),
            energy: landscape.value(m),
            weight: *w,
        })
        .collect();
    let epsilon = 2.0 * options.friction * kt;
    let log_z = log_partition_function(landscape, &minima, kt)?;
    let kappa_options = KappaOptions {
        normalization: Normalization::LogZ(log_z),
        ..Default::default()
    };
    let pairs: Vec<(usize, usize)> = (0..minima.len())
        .flat_map(|i| (i + 1..minima.len()).map(move |j| (i, j)))
        .collect();
    let results: Vec<(usize, usize, PairOutcome, Option<GraphEdge>)> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let outcome = link(landscape, &minima, i, j, kt, options, &kappa_options);
            match outcome {
                Ok(Link::Edge(mep, report_saddle, bf, bb, lk)) => {
                    let edge = GraphEdge {
                        from: i,
                        to: j,
                        mep,
                        saddle: report_saddle,
                        barrier_forward: bf,
                        barrier_backward: bb,
                        log_kappa: lk,
                        rate_forward: epsilon / (lk.exp() * weights[i]),
                        rate_backward: epsilon / (lk.exp() * weights[j]),
                    };
                    (i, j, PairOutcome::Linked, Some(edge))
                }
                Ok(Link::Through(via)) => (i, j, PairOutcome::Rejected { via }, None),
                Err(e) => (
                    i,
                    j,
                    PairOutcome::Unresolved {
                        reason: e.to_string(),
                    },
                    None,
                ),
            }
        })
        .collect();
    let mut edges = Vec::new();
    let mut outcomes = Vec::new();
    for (i, j, outcome, edge) in results {
        outcomes.push((i, j, outcome));
        edges.extend(edge);
    }
    Ok(MarkovGraph {
        nodes,
        edges,
        pairs: outcomes,
        kt,
        epsilon,
    })
}

enum Link {
    Edge(StringPath, Vec<f64>, f64, f64, f64),
    Through(usize),
}

fn link<L: Landscape + ?Sized>(
    landscape: &L,
    minima: &[Vec<f64>],
    i: usize,
    j: usize,
    kt: f64,
    options: &GraphOptions,
    kappa_options: &KappaOptions,
) -> Result<Link> {
    let init = init_string(&minima[i], &minima[j], options.images)?;
    let report = converge_string(
        &init,
        landscape,
        options.string_dt,
        options.string_tol,
        options.max_iter,
    )?;
    for (k, m) in minima.iter().enumerate() {
        if k != i
            && k != j
            && linalg::point_polyline_distance(m, &report.path.images) <= options.capture_radius
        {
            return Ok(Link::Through(k));
        }
    }
    let lk = log_kappa(&report.path, landscape, kt, kappa_options)?;
    Ok(Link::Edge(
        report.path,
        report.saddle,
        report.barrier_forward,
        report.barrier_backward,
        lk,
    ))
}
