//! Transition rates between metastable sets.
//!
//! Harmonic and flux forms of transition state theory, the κ line integral
//! along a minimum energy path with the two-state relaxation it implies,
//! basin weights, and the graph of metastable sets.
//!
//! The two-state rates are written in terms of the noise strength:
//! `k₁₂ = ε/(κN₁)`, `k₂₁ = ε/(κN₂)`, with `ε = 2γ k_BT`.

mod graph;
mod kappa;
mod tst;
mod weights;

pub use graph::{build_graph, GraphEdge, GraphNode, GraphOptions, MarkovGraph, PairOutcome};
pub use kappa::{
    kappa, log_hyperplane_integral, log_kappa, log_partition_function, KappaOptions, Normalization,
};
pub use tst::{
    tst_rate_arrhenius, tst_rate_flux, FluxRate, ReactantSide, TstSpec, MIN_FLUX_SAMPLES,
};
pub use weights::{capture_mass, equilibrium_weights, WeightMethod};

use serde::{Deserialize, Serialize};

use crate::error::{require_positive, Error, Result};

/// Occupancies of two sets under `ṅ₁ = (ε/κ)(n₂/N₂ − n₁/N₁) = −ṅ₂`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoStateSolution {
    pub times: Vec<f64>,
    pub n1: Vec<f64>,
    pub n2: Vec<f64>,
    /// `ε/(κN₁)`
    pub rate_12: f64,
    /// `ε/(κN₂)`
    pub rate_21: f64,
    /// `(ε/κ)(1/N₁ + 1/N₂)`
    pub relaxation_rate: f64,
}

/// Closed-form solution of the two-state relaxation:
/// `n₁(t) = n̄₁ + (n₁(0) − n̄₁) e^{−λt}`, `n₂ = total − n₁`, with
/// `n̄₁ = total · N₁/(N₁+N₂)`.
pub fn two_state_relax(
    weight_1: f64,
    weight_2: f64,
    epsilon: f64,
    kappa: f64,
    n0: (f64, f64),
    times: &[f64],
) -> Result<TwoStateSolution> {
    require_positive("N1", weight_1)?;
    require_positive("N2", weight_2)?;
    require_positive("kappa", kappa)?;
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "epsilon",
            reason: format!("must be non-negative, got {epsilon}"),
        });
    }
    if !(n0.0 >= 0.0 && n0.1 >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "n0",
            reason: format!("occupancies must be non-negative, got {n0:?}"),
        });
    }
    let scale = epsilon / kappa;
    let rate_12 = scale / weight_1;
    let rate_21 = scale / weight_2;
    let relaxation_rate = rate_12 + rate_21;
    let total = n0.0 + n0.1;
    let equilibrium = total * weight_1 / (weight_1 + weight_2);
    let n1: Vec<f64> = times
        .iter()
        .map(|t| equilibrium + (n0.0 - equilibrium) * (-relaxation_rate * t).exp())
        .collect();
    let n2 = n1.iter().map(|a| total - a).collect();
    Ok(TwoStateSolution {
        times: times.to_vec(),
        n1,
        n2,
        rate_12,
        rate_21,
        relaxation_rate,
    })
}
