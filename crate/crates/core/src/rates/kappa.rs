use nalgebra::{DMatrix, DVector};

use crate::error::{require_positive, Error, Result};
use crate::linalg;
use crate::potentials::Landscape;
use crate::quadrature;
use crate::string_zero::{mep_residual, StringPath};

/// How the full-space partition function `Z` in `p_s = e^{−V/k_BT}/Z` is
/// obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum Normalization {
    /// From the local minima at the two ends of the path: exact quadrature over
    /// the real line in one dimension, the harmonic (Laplace) sum over the
    /// minima otherwise.
    Endpoints,
    /// Explicit `ln Z`.
    LogZ(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct KappaOptions {
    /// Gauss–Hermite nodes per transverse direction. The outermost node sits
    /// at about `√(2 n) σ` from the path, so the rule stays local to the
    /// valley of the path.
    pub hermite_nodes: usize,
    /// Relative tolerance of the adaptive line integral.
    pub rel_tol: f64,
    /// Reject paths whose MEP residual exceeds this value.
    pub max_residual: Option<f64>,
    pub normalization: Normalization,
}

impl Default for KappaOptions {
    fn default() -> Self {
        Self {
            hermite_nodes: 10,
            rel_tol: 1e-11,
            max_residual: None,
            normalization: Normalization::Endpoints,
        }
    }
}

/// Orthonormal basis of the complement of the unit vector `t`.
fn normal_basis(t: &[f64]) -> Vec<Vec<f64>> {
    let d = t.len();
    let mut basis: Vec<Vec<f64>> = vec![t.to_vec()];
    for k in 0..d {
        let mut e = vec![0.0; d];
        e[k] = 1.0;
        for b in &basis {
            linalg::reject(&mut e, b);
        }
        if linalg::normalize(&mut e) > 1e-6 {
            basis.push(e);
        }
        if basis.len() == d {
            break;
        }
    }
    basis.remove(0);
    basis
}

/// `ln ∫_S e^{−V/k_BT} dσ` over the hyperplane through `point` with unit
/// normal `tangent`, by Gauss–Hermite quadrature in the eigenbasis of the
/// transverse Hessian. In one dimension the hyperplane is the point itself.
pub fn log_hyperplane_integral<L: Landscape + ?Sized>(
    landscape: &L,
    point: &[f64],
    tangent: &[f64],
    kt: f64,
    nodes: usize,
) -> Result<f64> {
    let d = point.len();
    let v0 = landscape.value(point);
    if d == 1 {
        return Ok(-v0 / kt);
    }
    if d > 3 {
        return Err(Error::Configuration(format!(
            "hyperplane quadrature supports at most 2 transverse dimensions, got {}",
            d - 1
        )));
    }
    let basis = normal_basis(tangent);
    let m = basis.len();
    let h = landscape.hessian_matrix(point);
    let mut projected = DMatrix::<f64>::zeros(m, m);
    for (i, bi) in basis.iter().enumerate() {
        let hb = &h * DVector::from_column_slice(bi);
        for (j, bj) in basis.iter().enumerate() {
            projected[(j, i)] = linalg::dot(bj, hb.as_slice());
        }
    }
    let (curv, vecs) = linalg::sorted_eigen(&projected);
    if !(curv[0] > 0.0) {
        return Err(Error::Quadrature(format!(
            "transverse Hessian at {point:?} is not positive definite ({curv:?})"
        )));
    }
    // principal transverse directions in the ambient space
    let dirs: Vec<Vec<f64>> = (0..m)
        .map(|k| {
            let mut v = vec![0.0; d];
            for (j, bj) in basis.iter().enumerate() {
                for (vi, bji) in v.iter_mut().zip(bj) {
                    *vi += vecs[(j, k)] * bji;
                }
            }
            v
        })
        .collect();
    let scales: Vec<f64> = curv.iter().map(|c| (2.0 * kt / c).sqrt()).collect();
    let (u, w) = quadrature::gauss_hermite(nodes);
    let mut terms = Vec::with_capacity(nodes.pow(m as u32));
    let mut idx = vec![0usize; m];
    loop {
        let mut x = point.to_vec();
        let mut log_w = 0.0;
        let mut u2 = 0.0;
        for k in 0..m {
            let t = u[idx[k]] * scales[k];
            for (xi, di) in x.iter_mut().zip(&dirs[k]) {
                *xi += t * di;
            }
            log_w += w[idx[k]].ln();
            u2 += u[idx[k]] * u[idx[k]];
        }
        terms.push(log_w + u2 - (landscape.value(&x) - v0) / kt);
        // odometer over the tensor grid
        let mut k = 0;
        while k < m {
            idx[k] += 1;
            if idx[k] < nodes {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
        if k == m {
            break;
        }
    }
    let log_scale: f64 = scales.iter().map(|s| s.ln()).sum();
    Ok(-v0 / kt + log_scale + quadrature::log_sum_exp(&terms))
}

/// `ln Z` from the given minima: exact quadrature over the real line in one
/// dimension (pieces split halfway between neighbouring minima), the harmonic
/// sum `Σ_j e^{−V_j/k_BT} (2πk_BT)^{d/2} / √det H_j` otherwise.
pub fn log_partition_function<L: Landscape + ?Sized>(
    landscape: &L,
    minima: &[Vec<f64>],
    kt: f64,
) -> Result<f64> {
    require_positive("k_BT", kt)?;
    if minima.is_empty() {
        return Err(Error::Configuration(
            "no minima for the partition function".into(),
        ));
    }
    let d = landscape.dimension();
    if d == 1 {
        let mut xs: Vec<f64> = minima.iter().map(|m| m[0]).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        let mut pieces = Vec::with_capacity(xs.len());
        for (k, &c) in xs.iter().enumerate() {
            let curvature = landscape.hessian_matrix(&[c])[(0, 0)];
            if !(curvature > 0.0) {
                return Err(Error::NotAMinimum(format!("q={c} has V''={curvature}")));
            }
            let width = (kt / curvature).sqrt();
            let lo = if k == 0 {
                tail_limit(landscape, c, -1.0, kt, width)?
            } else {
                0.5 * (xs[k - 1] + c)
            };
            let hi = if k + 1 == xs.len() {
                tail_limit(landscape, c, 1.0, kt, width)?
            } else {
                0.5 * (c + xs[k + 1])
            };
            pieces.push(quadrature::log_peaked_integral(
                |x| -landscape.value(&[x]) / kt,
                lo,
                hi,
                c,
                width,
                1e-12,
            )?);
        }
        return Ok(quadrature::log_sum_exp(&pieces));
    }
    let mut terms = Vec::with_capacity(minima.len());
    for m in minima {
        let (eig, _) = linalg::sorted_eigen(&landscape.hessian_matrix(m));
        if !(eig[0] > 0.0) {
            return Err(Error::NotAMinimum(format!(
                "{m:?} has Hessian eigenvalues {eig:?}"
            )));
        }
        let log_det: f64 = eig.iter().map(|v| v.ln()).sum();
        terms.push(
            -landscape.value(m) / kt + 0.5 * d as f64 * (2.0 * std::f64::consts::PI * kt).ln()
                - 0.5 * log_det,
        );
    }
    Ok(quadrature::log_sum_exp(&terms))
}

fn tail_limit<L: Landscape + ?Sized>(
    landscape: &L,
    center: f64,
    direction: f64,
    kt: f64,
    width: f64,
) -> Result<f64> {
    let v0 = landscape.value(&[center]);
    let mut step = width;
    let mut x = center;
    for _ in 0..200 {
        x += direction * step;
        if landscape.value(&[x]) - v0 > 60.0 * kt {
            return Ok(x);
        }
        step *= 1.5;
    }
    Err(Error::Quadrature(format!(
        "potential is not confining beyond q={center}"
    )))
}

/// `ln κ` with `κ = ∫ |φ′| / (∫_{S(α)} p_s dσ) dα = Z ∫ ds / H(s)`, where
/// `H(s)` is the hyperplane Boltzmann integral normal to the path at arclength
/// `s` and the path is read as the polyline through its images.
///
/// Each segment is integrated by adaptive Simpson (the integrand is
/// dominated by the barrier region); segments carry their own normal, so any
/// re-discretization of the same polyline gives the same value.
pub fn log_kappa<L: Landscape + ?Sized>(
    mep: &StringPath,
    landscape: &L,
    kt: f64,
    options: &KappaOptions,
) -> Result<f64> {
    require_positive("k_BT", kt)?;
    crate::error::check_dimension(landscape.dimension(), mep.dimension())?;
    if let Some(limit) = options.max_residual {
        let residual = mep_residual(mep, landscape);
        if residual > limit {
            return Err(Error::NonConvergence {
                module: "kappa",
                iterations: 0,
                residual,
            });
        }
    }
    let log_z = match options.normalization {
        Normalization::LogZ(z) => z,
        Normalization::Endpoints => {
            log_partition_function(landscape, &[mep.first().to_vec(), mep.last().to_vec()], kt)?
        }
    };
    let segments: Vec<(Vec<f64>, Vec<f64>, f64)> = mep
        .images
        .windows(2)
        .filter_map(|w| {
            let mut t = linalg::sub(&w[1], &w[0]);
            let len = linalg::normalize(&mut t);
            (len > 0.0).then(|| (w[0].clone(), t, len))
        })
        .collect();
    let nodes = options.hermite_nodes;
    let neg_log_h = |a: &[f64], t: &[f64], s: f64| -> Result<f64> {
        let x: Vec<f64> = a.iter().zip(t).map(|(ai, ti)| ai + s * ti).collect();
        Ok(-log_hyperplane_integral(landscape, &x, t, kt, nodes)?)
    };
    // reference level and rough magnitude from a coarse pass
    const PIECES: usize = 8;
    let mut samples = Vec::with_capacity(segments.len() * (PIECES + 1));
    for (a, t, len) in &segments {
        for k in 0..=PIECES {
            samples.push((
                neg_log_h(a, t, len * k as f64 / PIECES as f64)?,
                len / PIECES as f64,
            ));
        }
    }
    let top = samples
        .iter()
        .map(|s| s.0)
        .fold(f64::NEG_INFINITY, f64::max);
    let rough: f64 = samples.iter().map(|(g, h)| (g - top).exp() * h).sum();
    let tol = options.rel_tol * rough / (segments.len() * PIECES) as f64;
    let mut total = 0.0;
    let mut failure = None;
    for (a, t, len) in &segments {
        for k in 0..PIECES {
            let s0 = len * k as f64 / PIECES as f64;
            let s1 = len * (k + 1) as f64 / PIECES as f64;
            let piece = quadrature::adaptive_simpson(
                |s| match neg_log_h(a, t, s) {
                    Ok(g) => (g - top).exp(),
                    Err(e) => {
                        failure.get_or_insert(e);
                        f64::NAN
                    }
                },
                s0,
                s1,
                tol,
                40,
            );
            if let Some(e) = failure.take() {
                return Err(e);
            }
            total += piece?;
        }
    }
    Ok(log_z + top + total.ln())
}

/// `κ = exp(ln κ)` with default options.
pub fn kappa<L: Landscape + ?Sized>(mep: &StringPath, landscape: &L, kt: f64) -> Result<f64> {
    log_kappa(mep, landscape, kt, &KappaOptions::default()).map(f64::exp)
}
