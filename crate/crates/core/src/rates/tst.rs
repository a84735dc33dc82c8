use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dynamics::descend;
use crate::error::{require_positive, Error, Result};
use crate::linalg;
use crate::potentials::Landscape;
use crate::quadrature;
use crate::seeding;

/// Which side of the dividing point is the reactant region A.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReactantSide {
    Below,
    Above,
}

/// Dividing surface `q = dividing_value` of a one-dimensional reaction
/// coordinate `q = x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TstSpec {
    pub dividing_value: f64,
    pub reactant: ReactantSide,
}

impl TstSpec {
    pub fn new(dividing_value: f64, reactant: ReactantSide) -> Self {
        Self {
            dividing_value,
            reactant,
        }
    }
}

fn verified_minimum<L: Landscape + ?Sized>(landscape: &L, x: &[f64]) -> Result<Vec<f64>> {
    let (eig, _) = linalg::sorted_eigen(&landscape.hessian_matrix(x));
    let g = linalg::norm(&landscape.gradient(x));
    let scale = eig.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if eig[0] <= 1e-10 * scale || g > 1e-6 * scale.max(1.0) {
        return Err(Error::NotAMinimum(format!(
            "{x:?} (gradient norm {g:e}, Hessian eigenvalues {eig:?})"
        )));
    }
    Ok(eig)
}

/// Harmonic transition state theory: `(ω₀/2π) e^{−δE/k_BT}` with
/// `ω₀ = (V″(x_A)/m)^{1/2}` and `δE = V(saddle) − V(x_A)`.
///
/// In more than one dimension `V″(x_A)` is the curvature of the well along
/// the saddle's unstable direction.
pub fn tst_rate_arrhenius<L: Landscape + ?Sized>(
    landscape: &L,
    x_a: &[f64],
    saddle: &[f64],
    mass: f64,
    kt: f64,
) -> Result<f64> {
    require_positive("mass", mass)?;
    require_positive("k_BT", kt)?;
    crate::error::check_dimension(landscape.dimension(), x_a.len())?;
    crate::error::check_dimension(landscape.dimension(), saddle.len())?;
    verified_minimum(landscape, x_a)?;
    let (eig, vecs) = linalg::sorted_eigen(&landscape.hessian_matrix(saddle));
    if !(eig[0] < 0.0) || eig.iter().skip(1).any(|&v| v <= 0.0) {
        return Err(Error::SaddleVerification(format!(
            "{saddle:?} has Hessian eigenvalues {eig:?}"
        )));
    }
    let barrier = landscape.value(saddle) - landscape.value(x_a);
    if barrier < 0.0 {
        return Err(Error::InvalidParameter {
            name: "saddle",
            reason: format!("barrier is negative ({barrier})"),
        });
    }
    let u: Vec<f64> = vecs.column(0).iter().copied().collect();
    let h = landscape.hessian_matrix(x_a);
    let hu = &h * nalgebra::DVector::from_column_slice(&u);
    let curvature = linalg::dot(&u, hu.as_slice());
    let omega = (curvature / mass).sqrt();
    Ok(omega / (2.0 * std::f64::consts::PI) * (-barrier / kt).exp())
}

/// Monte Carlo flux estimate of the transition-state rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxRate {
    pub rate: f64,
    pub stderr: f64,
    /// `ln rate`, finite even where `rate` underflows.
    pub log_rate: f64,
}

/// Minimum number of velocity samples for [`tst_rate_flux`].
pub const MIN_FLUX_SAMPLES: usize = 100;

/// Positive flux through the dividing point normalized by the reactant
/// partition function:
/// `k = ⟨q̇ θ(q̇)⟩ · e^{−V(q*)/k_BT} / ∫_A e^{−V/k_BT} dq`.
///
/// The velocity average is sampled from the Maxwell distribution
/// `p ~ N(0, m k_BT)`; the configurational ratio is integrated by quadrature
/// over the reactant side, which is truncated where the Boltzmann factor
/// relative to the well bottom falls below `e^{−60}`.
pub fn tst_rate_flux<L: Landscape + ?Sized>(
    landscape: &L,
    tst: &TstSpec,
    mass: f64,
    kt: f64,
    n_samples: usize,
    seed: u64,
) -> Result<FluxRate> {
    require_positive("mass", mass)?;
    require_positive("k_BT", kt)?;
    if landscape.dimension() != 1 {
        return Err(Error::Configuration(
            "the flux rate is implemented for a 1-D reaction coordinate".into(),
        ));
    }
    if n_samples < MIN_FLUX_SAMPLES {
        return Err(Error::InsufficientStatistics {
            what: "tst_rate_flux",
            count: n_samples,
            required: MIN_FLUX_SAMPLES,
        });
    }
    let mut rng = seeding::rng(seed, 0);
    let sd = (mass * kt).sqrt();
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..n_samples {
        let xi: f64 = rng.sample(StandardNormal);
        let v = (sd * xi / mass).max(0.0);
        sum += v;
        sum_sq += v * v;
    }
    let n = n_samples as f64;
    let flux = sum / n;
    let flux_var = (sum_sq / n - flux * flux).max(0.0) / (n - 1.0);
    let log_weight = log_reactant_ratio(landscape, tst, kt)?;
    let log_rate = flux.ln() + log_weight;
    let rate = log_rate.exp();
    Ok(FluxRate {
        rate,
        stderr: rate * flux_var.sqrt() / flux,
        log_rate,
    })
}

/// `ln( e^{−V(q*)/k_BT} / ∫_A e^{−V/k_BT} )`
fn log_reactant_ratio<L: Landscape + ?Sized>(landscape: &L, tst: &TstSpec, kt: f64) -> Result<f64> {
    let qs = tst.dividing_value;
    let outward = match tst.reactant {
        ReactantSide::Below => -1.0,
        ReactantSide::Above => 1.0,
    };
    // find the reactant well bottom: scan outwards, then polish
    let v_at = |q: f64| landscape.value(&[q]);
    let mut step = 1e-3;
    let mut best = (qs, v_at(qs));
    let mut q = qs;
    let mut far = qs;
    for _ in 0..200 {
        q += outward * step;
        let v = v_at(q);
        if v < best.1 {
            best = (q, v);
        }
        far = q;
        if v - best.1 > 60.0 * kt && v > v_at(q - outward * step) {
            break;
        }
        step *= 1.15;
    }
    let bottom = if (best.0 - qs).abs() > 0.0 {
        descend(landscape, &[best.0], 1e-12)
            .map(|x| x[0])
            .unwrap_or(best.0)
    } else {
        qs
    };
    let v_min = v_at(bottom);
    let curvature = landscape.hessian_matrix(&[bottom])[(0, 0)].abs().max(1e-12);
    let width = (kt / curvature).sqrt();
    // extend the far limit until the tail is negligible
    let mut guard = 0;
    while v_at(far) - v_min < 60.0 * kt {
        far += outward * (far - qs).abs().max(width);
        guard += 1;
        if guard > 200 {
            return Err(Error::Quadrature("reactant well is not confining".into()));
        }
    }
    let (lo, hi) = if outward < 0.0 { (far, qs) } else { (qs, far) };
    let log_z = quadrature::log_peaked_integral(|x| -v_at(x) / kt, lo, hi, bottom, width, 1e-10)?;
    Ok(-v_at(qs) / kt - log_z)
}
