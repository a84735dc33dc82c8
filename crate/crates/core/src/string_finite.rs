//! Finite-temperature string method.
//!
//! `N` realizations of the string evolve under projected Euler–Maruyama
//! dynamics: image `i` of every realization moves by `−P_i ∇V dt` plus
//! `P_i √(2 k_BT dt) ξ`, where `P_i` projects onto the hyperplane through the
//! mean image `i` normal to the mean tangent. Noise is independent across
//! images and realizations. After every step the mean string is moved to the
//! realization average (or towards it, with a mixing parameter below 1),
//! reparameterized, and all
//! realizations are projected back onto the new hyperplanes. Mean endpoints
//! stay at the given minima.
//!
//! A run has three phases: burn-in, an averaging phase whose time-averaged
//! mean is the reported string, and a sampling phase in which that mean is
//! frozen and the realizations sample its hyperplane measures. Stored samples
//! therefore lie exactly on the reported hyperplanes and carry equal weights.
//!
//! An image step that leaves the slab between the neighbouring hyperplanes
//! would make its α-assignment ambiguous; such steps are reverted and counted.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{require_positive, Error, Result};
use crate::linalg;
use crate::potentials::Landscape;
use crate::quadrature;
use crate::seeding;
use crate::string_zero::{reparameterize, StringPath};

/// Number of blocks the averaging phase is split into for error estimates.
pub const MEAN_BLOCKS: usize = 8;

/// Settings for [`evolve_ensemble`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleOptions {
    pub realizations: usize,
    pub kt: f64,
    pub dt: f64,
    /// Steps of the averaging phase.
    pub n_steps: usize,
    pub burn_in: usize,
    /// Steps of the sampling phase.
    pub sampling_steps: usize,
    pub seed: u64,
    /// Mixing parameter of the mean update: 1 replaces the mean by the
    /// realization average. Values well below 1 let the mean lag the
    /// realizations, and on sharply bent strings the lag feeds back through
    /// the hyperplane rotation into a state off the self-consistent string.
    pub relaxation: f64,
    /// Steps between stored samples.
    pub stride: usize,
    /// Keep the mean string fixed at its initial value throughout.
    pub pin_mean: bool,
}

impl EnsembleOptions {
    /// Defaults: sampling phase as long as the averaging phase, mixing 1,
    /// stride 10, evolving mean.
    pub fn new(
        realizations: usize,
        kt: f64,
        dt: f64,
        n_steps: usize,
        burn_in: usize,
        seed: u64,
    ) -> Self {
        Self {
            realizations,
            kt,
            dt,
            n_steps,
            burn_in,
            sampling_steps: n_steps,
            seed,
            relaxation: 1.0,
            stride: 10,
            pin_mean: false,
        }
    }
}

/// Samples on the hyperplane of one mean image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperplaneMeasure {
    pub alpha: f64,
    pub samples: Vec<Vec<f64>>,
    /// Equal weights; kept so that estimators read like weighted averages.
    pub weights: Vec<f64>,
    /// Realization each sample came from.
    pub realization: Vec<usize>,
}

impl HyperplaneMeasure {
    /// Kish effective sample size.
    pub fn effective_size(&self) -> f64 {
        let s: f64 = self.weights.iter().sum();
        let s2: f64 = self.weights.iter().map(|w| w * w).sum();
        if s2 > 0.0 {
            s * s / s2
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StringEnsemble {
    /// Time-averaged, reparameterized mean string.
    pub mean: StringPath,
    /// Averages of the mean string over consecutive blocks of the averaging
    /// phase, `[block][image][component]`.
    pub mean_blocks: Vec<Vec<Vec<f64>>>,
    /// Realizations at the end of the run, `[realization][image][component]`.
    pub realizations: Vec<Vec<Vec<f64>>>,
    pub kt: f64,
    pub measures: Vec<HyperplaneMeasure>,
    /// Image steps reverted because they left their slab.
    pub reverted_steps: usize,
}

fn project(x: &mut [f64], origin: &[f64], normal: &[f64]) {
    let c: f64 = x
        .iter()
        .zip(origin)
        .zip(normal)
        .map(|((a, o), t)| (a - o) * t)
        .sum();
    x.iter_mut().zip(normal).for_each(|(a, t)| *a -= c * t);
}

/// A point on hyperplane `i` must lie ahead of hyperplane `i−1` and behind
/// hyperplane `i+1`.
fn in_slab(x: &[f64], i: usize, mean: &[Vec<f64>], tangents: &[Vec<f64>]) -> bool {
    let ahead = i == 0 || linalg::dot(&linalg::sub(x, &mean[i - 1]), &tangents[i - 1]) > 0.0;
    let behind =
        i + 1 == mean.len() || linalg::dot(&linalg::sub(x, &mean[i + 1]), &tangents[i + 1]) < 0.0;
    ahead && behind
}

/// One projected Euler–Maruyama step of every image of every realization.
/// Returns the number of reverted image steps.
#[allow(clippy::too_many_arguments)]
fn sweep<L: Landscape + ?Sized>(
    landscape: &L,
    realizations: &mut [Vec<Vec<f64>>],
    rngs: &mut [ChaCha8Rng],
    mean: &[Vec<f64>],
    tangents: &[Vec<f64>],
    dt: f64,
    kick: f64,
    step: usize,
) -> Result<usize> {
    let d = mean[0].len();
    let counts: Vec<Result<usize>> = realizations
        .par_iter_mut()
        .zip(rngs.par_iter_mut())
        .map(|(real, rng)| {
            let mut g = vec![0.0; d];
            let mut trial = vec![0.0; d];
            let mut reverted = 0;
            for (i, x) in real.iter_mut().enumerate() {
                landscape.gradient_into(x, &mut g);
                for k in 0..d {
                    let xi: f64 = rng.sample(StandardNormal);
                    trial[k] = -dt * g[k] + kick * xi;
                }
                linalg::reject(&mut trial, &tangents[i]);
                trial.iter_mut().zip(x.iter()).for_each(|(t, a)| *t += a);
                if !linalg::all_finite(&trial) {
                    return Err(Error::Divergence {
                        module: "string_finite",
                        step,
                    });
                }
                if in_slab(&trial, i, mean, tangents) {
                    x.copy_from_slice(&trial);
                } else {
                    reverted += 1;
                }
            }
            Ok(reverted)
        })
        .collect();
    counts.into_iter().sum()
}

/// Evolves the ensemble. See the module documentation for the scheme.
pub fn evolve_ensemble<L: Landscape + ?Sized>(
    landscape: &L,
    init: &StringPath,
    options: &EnsembleOptions,
) -> Result<StringEnsemble> {
    require_positive("k_BT", options.kt)?;
    require_positive("dt", options.dt)?;
    crate::error::check_dimension(landscape.dimension(), init.dimension())?;
    if options.realizations < 2 {
        return Err(Error::InvalidParameter {
            name: "realizations",
            reason: format!("need at least 2, got {}", options.realizations),
        });
    }
    if options.n_steps < MEAN_BLOCKS || options.sampling_steps == 0 {
        return Err(Error::InvalidParameter {
            name: "n_steps",
            reason: format!(
                "averaging needs at least {MEAN_BLOCKS} steps and sampling at least one, got {} and {}",
                options.n_steps, options.sampling_steps
            ),
        });
    }
    if !(options.relaxation > 0.0 && options.relaxation <= 1.0) || options.stride == 0 {
        return Err(Error::InvalidParameter {
            name: "relaxation",
            reason: "mixing must lie in (0, 1] and stride be positive".into(),
        });
    }
    let n = init.len();
    let d = init.dimension();
    let mut mean = reparameterize(&StringPath {
        images: init.images.clone(),
        endpoints_fixed: [true, true],
    });
    let mut tangents = mean.tangents();
    let mut realizations: Vec<Vec<Vec<f64>>> = vec![mean.images.clone(); options.realizations];
    let mut rngs: Vec<ChaCha8Rng> = (0..options.realizations)
        .map(|r| seeding::rng(options.seed, r as u64))
        .collect();
    let kick = (2.0 * options.kt * options.dt).sqrt();
    let block_len = options.n_steps / MEAN_BLOCKS;
    let mut blocks = vec![vec![vec![0.0; d]; n]; MEAN_BLOCKS];
    let mut reverted = 0usize;
    let inv = 1.0 / options.realizations as f64;

    for step in 0..options.burn_in + options.n_steps {
        reverted += sweep(
            landscape,
            &mut realizations,
            &mut rngs,
            &mean.images,
            &tangents,
            options.dt,
            kick,
            step,
        )?;
        if !options.pin_mean {
            let mut images = mean.images.clone();
            for (i, img) in images.iter_mut().enumerate().take(n - 1).skip(1) {
                for k in 0..d {
                    let avg: f64 = realizations.iter().map(|r| r[i][k]).sum::<f64>() * inv;
                    img[k] += options.relaxation * (avg - img[k]);
                }
            }
            mean = reparameterize(&StringPath {
                images,
                endpoints_fixed: [true, true],
            });
            tangents = mean.tangents();
            for real in realizations.iter_mut() {
                for (i, x) in real.iter_mut().enumerate() {
                    project(x, &mean.images[i], &tangents[i]);
                }
            }
        }
        if step >= options.burn_in {
            let b = ((step - options.burn_in) / block_len).min(MEAN_BLOCKS - 1);
            for (acc, img) in blocks[b].iter_mut().zip(&mean.images) {
                acc.iter_mut().zip(img).for_each(|(a, v)| *a += v);
            }
        }
    }
    for (b, block) in blocks.iter_mut().enumerate() {
        let count = if b + 1 == MEAN_BLOCKS {
            options.n_steps - block_len * (MEAN_BLOCKS - 1)
        } else {
            block_len
        } as f64;
        block.iter_mut().flatten().for_each(|v| *v /= count);
    }
    let averaged: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..d)
                .map(|k| blocks.iter().map(|b| b[i][k]).sum::<f64>() / MEAN_BLOCKS as f64)
                .collect()
        })
        .collect();
    let mean = reparameterize(&StringPath {
        images: averaged,
        endpoints_fixed: [true, true],
    });
    let tangents = mean.tangents();
    for real in realizations.iter_mut() {
        for (i, x) in real.iter_mut().enumerate() {
            project(x, &mean.images[i], &tangents[i]);
            if !in_slab(x, i, &mean.images, &tangents) {
                x.copy_from_slice(&mean.images[i]);
            }
        }
    }

    let alphas = mean.alphas();
    let mut measures: Vec<HyperplaneMeasure> = alphas
        .iter()
        .map(|&alpha| HyperplaneMeasure {
            alpha,
            samples: Vec::new(),
            weights: Vec::new(),
            realization: Vec::new(),
        })
        .collect();
    let offset = options.burn_in + options.n_steps;
    for s in 0..options.sampling_steps {
        reverted += sweep(
            landscape,
            &mut realizations,
            &mut rngs,
            &mean.images,
            &tangents,
            options.dt,
            kick,
            offset + s,
        )?;
        if (s + 1) % options.stride == 0 {
            for (r, real) in realizations.iter().enumerate() {
                for (m, x) in measures.iter_mut().zip(real) {
                    m.samples.push(x.clone());
                    m.weights.push(1.0);
                    m.realization.push(r);
                }
            }
        }
    }
    if reverted > 0 {
        log::warn!("{reverted} image steps left their slab and were reverted");
    }
    Ok(StringEnsemble {
        mean,
        mean_blocks: blocks,
        realizations,
        kt: options.kt,
        measures,
        reverted_steps: reverted,
    })
}

/// Distance between a mean image and the Boltzmann average over its
/// hyperplane, with the Monte Carlo standard error of that average.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyResidual {
    pub alpha: f64,
    pub residual: f64,
    pub stderr: f64,
    pub effective_samples: f64,
}

impl ConsistencyResidual {
    /// Residual in units of its standard error.
    pub fn z_score(&self) -> f64 {
        self.residual / self.stderr
    }
}

fn weighted_mean(samples: &[&Vec<f64>], weights: &[f64]) -> Vec<f64> {
    let d = samples[0].len();
    let total: f64 = weights.iter().sum();
    let mut m = vec![0.0; d];
    for (x, w) in samples.iter().zip(weights) {
        m.iter_mut().zip(x.iter()).for_each(|(a, b)| *a += w * b);
    }
    m.iter_mut().for_each(|a| *a /= total);
    m
}

fn squared_stderr(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    if n < 2.0 {
        return 0.0;
    }
    let avg = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - avg) * (v - avg)).sum::<f64>() / ((n - 1.0) * n)
}

/// Self-consistency residual `‖φ(α) − E_{μ_α} x‖` at every image, in order.
///
/// The hyperplane average comes from the sampling phase and the string point
/// from the averaging phase, so the two estimates are independent. Their
/// standard errors, both projected on the residual direction, add in
/// quadrature: the sample part from per-realization batch means, the string
/// part from the block averages of the mean. Every image needs
/// `min_effective` effective samples.
pub fn self_consistency_residual(
    ensemble: &StringEnsemble,
    min_effective: f64,
) -> Result<Vec<ConsistencyResidual>> {
    let realizations = ensemble.realizations.len();
    ensemble
        .measures
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let ess = m.effective_size();
            if !(ess >= min_effective) || m.samples.is_empty() {
                return Err(Error::InsufficientStatistics {
                    what: "self_consistency_residual",
                    count: ess as usize,
                    required: min_effective.ceil() as usize,
                });
            }
            let all: Vec<&Vec<f64>> = m.samples.iter().collect();
            let estimate = weighted_mean(&all, &m.weights);
            let delta = linalg::sub(&ensemble.mean.images[i], &estimate);
            let residual = linalg::norm(&delta);
            let mut direction = delta.clone();
            if linalg::normalize(&mut direction) == 0.0 {
                direction = vec![0.0; delta.len()];
                direction[0] = 1.0;
            }
            let mut batches = Vec::with_capacity(realizations);
            for r in 0..realizations {
                let idx: Vec<usize> = (0..m.samples.len())
                    .filter(|&k| m.realization[k] == r)
                    .collect();
                if idx.is_empty() {
                    continue;
                }
                let xs: Vec<&Vec<f64>> = idx.iter().map(|&k| &m.samples[k]).collect();
                let ws: Vec<f64> = idx.iter().map(|&k| m.weights[k]).collect();
                batches.push(linalg::dot(&weighted_mean(&xs, &ws), &direction));
            }
            if batches.len() < 2 {
                return Err(Error::InsufficientStatistics {
                    what: "self_consistency_residual",
                    count: batches.len(),
                    required: 2,
                });
            }
            let blocks: Vec<f64> = ensemble
                .mean_blocks
                .iter()
                .map(|b| linalg::dot(&b[i], &direction))
                .collect();
            Ok(ConsistencyResidual {
                alpha: m.alpha,
                residual,
                stderr: (squared_stderr(&batches) + squared_stderr(&blocks)).sqrt(),
                effective_samples: ess,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperplaneStats {
    pub mean: Vec<f64>,
    /// Row-major `d × d` weighted covariance.
    pub covariance: Vec<Vec<f64>>,
    /// Square root of the largest covariance eigenvalue.
    pub width: f64,
}

/// Weighted mean, covariance and half-width of the samples at one image.
pub fn hyperplane_stats(ensemble: &StringEnsemble, alpha_index: usize) -> Result<HyperplaneStats> {
    let m = ensemble
        .measures
        .get(alpha_index)
        .ok_or_else(|| Error::InvalidParameter {
            name: "alpha_index",
            reason: format!("{alpha_index} is out of range"),
        })?;
    if m.samples.len() < 2 {
        return Err(Error::InsufficientStatistics {
            what: "hyperplane_stats",
            count: m.samples.len(),
            required: 2,
        });
    }
    let all: Vec<&Vec<f64>> = m.samples.iter().collect();
    let mean = weighted_mean(&all, &m.weights);
    let d = mean.len();
    let total: f64 = m.weights.iter().sum();
    let mut cov = nalgebra::DMatrix::<f64>::zeros(d, d);
    for (x, w) in m.samples.iter().zip(&m.weights) {
        for a in 0..d {
            for b in 0..d {
                cov[(a, b)] += w * (x[a] - mean[a]) * (x[b] - mean[b]);
            }
        }
    }
    cov /= total;
    let (eig, _) = linalg::sorted_eigen(&cov);
    let width = eig[d - 1].max(0.0).sqrt();
    Ok(HyperplaneStats {
        mean,
        covariance: (0..d)
            .map(|a| (0..d).map(|b| cov[(a, b)]).collect())
            .collect(),
        width,
    })
}

/// Derivative at node `i` of the polynomial through the (up to) five nearest
/// nodes. Chord differences shrink across sharp bends; the higher order keeps
/// the mean force accurate there.
fn node_derivative(alphas: &[f64], values: &[Vec<f64>], i: usize) -> Vec<f64> {
    let n = alphas.len();
    let width = n.min(5);
    let start = i.saturating_sub(width / 2).min(n - width);
    let idx = start..start + width;
    let t = alphas[i];
    let mut out = vec![0.0; values[0].len()];
    for j in idx.clone() {
        let mut w = 0.0;
        for m in idx.clone().filter(|&m| m != j) {
            let mut term = 1.0 / (alphas[j] - alphas[m]);
            for l in idx.clone().filter(|&l| l != j && l != m) {
                term *= (t - alphas[l]) / (alphas[j] - alphas[l]);
            }
            w += term;
        }
        out.iter_mut()
            .zip(&values[j])
            .for_each(|(o, v)| *o += w * v);
    }
    out
}

/// Free energy `F(α) = −k_BT ln Z(α)` of the hyperplanes along the mean
/// string, relative to `F(0) = 0`, as `(α, F)` pairs.
///
/// Thermodynamic integration of the mean force
/// `dF/dα = ⟨∇V · (φ′ − ((x − φ)·τ′) τ)⟩`, the second term accounting for the
/// rotation of the hyperplane. Derivatives along the mean come from
/// five-node polynomials and the integral from piecewise cubics.
pub fn free_energy_profile<L: Landscape + ?Sized>(
    ensemble: &StringEnsemble,
    landscape: &L,
) -> Result<Vec<(f64, f64)>> {
    let mean = &ensemble.mean;
    let alphas = mean.alphas();
    let tangents = mean.tangents();
    let mut force = Vec::with_capacity(mean.len());
    for (i, m) in ensemble.measures.iter().enumerate() {
        if m.samples.is_empty() {
            return Err(Error::InsufficientStatistics {
                what: "free_energy_profile",
                count: 0,
                required: 1,
            });
        }
        let dphi = node_derivative(&alphas, &mean.images, i);
        let dtau = node_derivative(&alphas, &tangents, i);
        let mut acc = 0.0;
        let mut total = 0.0;
        for (x, w) in m.samples.iter().zip(&m.weights) {
            let u = linalg::sub(x, &mean.images[i]);
            let turn = linalg::dot(&u, &dtau);
            let velocity: Vec<f64> = dphi
                .iter()
                .zip(&tangents[i])
                .map(|(p, t)| p - turn * t)
                .collect();
            acc += w * linalg::dot(&landscape.gradient(x), &velocity);
            total += w;
        }
        force.push(acc / total);
    }
    let f = quadrature::cumulative_cubic(&alphas, &force);
    Ok(alphas.into_iter().zip(f).collect())
}
