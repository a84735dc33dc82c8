//! Zero-temperature string method.
//!
//! A string is a chain of images carrying the intrinsic parameter
//! `α_i = i/(n−1)`. Each step moves interior images along the normal part of
//! `−∇V` (tangent by central differences) and then redistributes all images so
//! that consecutive chords have equal length. Stationary strings satisfy
//! `(∇V)^⊥ = 0` image by image.

mod inertial;
mod neb;
mod saddle;

pub use inertial::{mep_type2, momentum_sign_changes, Type2Mep, TYPE2_OFFSET};
pub use neb::{neb_iterate, neb_relax};
pub use saddle::{extract_saddle, extract_saddles, refine_saddle, SaddlePoint};

use serde::{Deserialize, Serialize};

use crate::error::{require_positive, Error, Result};
use crate::linalg;
use crate::potentials::Landscape;

/// An ordered chain of images with equal-chord parameterization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StringPath {
    pub images: Vec<Vec<f64>>,
    /// `[first, last]` endpoint is held fixed.
    pub endpoints_fixed: [bool; 2],
}

impl StringPath {
    pub fn new(images: Vec<Vec<f64>>, endpoints_fixed: [bool; 2]) -> Result<Self> {
        if images.len() < 3 {
            return Err(Error::InvalidParameter {
                name: "n",
                reason: format!("a string needs at least 3 images, got {}", images.len()),
            });
        }
        let d = images[0].len();
        for img in &images {
            crate::error::check_dimension(d, img.len())?;
        }
        Ok(Self {
            images,
            endpoints_fixed,
        })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.images[0].len()
    }

    pub fn alphas(&self) -> Vec<f64> {
        let n = self.len();
        (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
    }

    pub fn first(&self) -> &[f64] {
        &self.images[0]
    }

    pub fn last(&self) -> &[f64] {
        &self.images[self.len() - 1]
    }

    pub fn chord_lengths(&self) -> Vec<f64> {
        self.images
            .windows(2)
            .map(|w| linalg::distance(&w[0], &w[1]))
            .collect()
    }

    pub fn arclength(&self) -> f64 {
        self.chord_lengths().iter().sum()
    }

    /// `max |chord − mean chord| / mean chord`
    pub fn max_relative_gap_deviation(&self) -> f64 {
        let chords = self.chord_lengths();
        let mean = chords.iter().sum::<f64>() / chords.len() as f64;
        if mean == 0.0 {
            return 0.0;
        }
        chords
            .iter()
            .map(|c| (c - mean).abs() / mean)
            .fold(0.0, f64::max)
    }

    /// Largest over smallest chord.
    pub fn chord_ratio(&self) -> f64 {
        let chords = self.chord_lengths();
        let max = chords.iter().copied().fold(0.0, f64::max);
        let min = chords.iter().copied().fold(f64::INFINITY, f64::min);
        max / min
    }

    /// Unit tangent at image `i`: central difference in the interior,
    /// one-sided at the ends.
    pub fn tangent(&self, i: usize) -> Vec<f64> {
        let n = self.len();
        let (a, b) = match i {
            0 => (0, 1),
            _ if i == n - 1 => (n - 2, n - 1),
            _ => (i - 1, i + 1),
        };
        let mut t = linalg::sub(&self.images[b], &self.images[a]);
        linalg::normalize(&mut t);
        t
    }

    pub fn tangents(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.tangent(i)).collect()
    }

    pub fn energies<L: Landscape + ?Sized>(&self, landscape: &L) -> Vec<f64> {
        self.images.iter().map(|x| landscape.value(x)).collect()
    }

    /// Point at parameter `alpha ∈ [0,1]` on the piecewise-linear interpolant
    /// of the images (images sit at `α_i`).
    pub fn point_at(&self, alpha: f64) -> Vec<f64> {
        let n = self.len();
        let s = alpha.clamp(0.0, 1.0) * (n - 1) as f64;
        let i = (s.floor() as usize).min(n - 2);
        linalg::lerp(&self.images[i], &self.images[i + 1], s - i as f64)
    }
}

/// Equally spaced images on the segment from `a` to `b`, endpoints fixed.
pub fn init_string(a: &[f64], b: &[f64], n: usize) -> Result<StringPath> {
    if n < 3 {
        return Err(Error::InvalidParameter {
            name: "n",
            reason: format!("a string needs at least 3 images, got {n}"),
        });
    }
    crate::error::check_dimension(a.len(), b.len())?;
    if a == b {
        return Err(Error::InvalidParameter {
            name: "endpoints",
            reason: "string endpoints coincide".into(),
        });
    }
    let images = (0..n)
        .map(|i| linalg::lerp(a, b, i as f64 / (n - 1) as f64))
        .collect();
    StringPath::new(images, [true, true])
}

/// Redistributes images along the piecewise-linear interpolant of the current
/// images so that all chords have the same length. Endpoints are unchanged; a
/// zero-length string is returned as is.
///
/// The common chord `h` is found by bisection: marching from the first image,
/// each new image is the first exit of the polyline from the ball of radius
/// `h` around the previous one, and `h` is tuned until the last step lands on
/// the final image.
pub fn reparameterize(path: &StringPath) -> StringPath {
    let n = path.len();
    let total: f64 = path.arclength();
    if total == 0.0 || !total.is_finite() {
        return path.clone();
    }
    let mut lo = 0.0;
    let mut hi = total / (n - 1) as f64;
    let mut best = None;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let march = march_chords(&path.images, mid, n - 1);
        if march.overshoot {
            hi = mid;
        } else {
            lo = mid;
            best = Some(march.points);
        }
    }
    let mut points = best.unwrap_or_else(|| march_chords(&path.images, lo, n - 1).points);
    points.truncate(n - 1);
    points.push(path.images[n - 1].clone());
    StringPath {
        images: points,
        endpoints_fixed: path.endpoints_fixed,
    }
}

struct March {
    points: Vec<Vec<f64>>,
    overshoot: bool,
}

fn march_chords(line: &[Vec<f64>], h: f64, steps: usize) -> March {
    let mut points = Vec::with_capacity(steps + 1);
    points.push(line[0].clone());
    // position on the polyline: segment index and local parameter
    let mut seg = 0usize;
    let mut t = 0.0f64;
    for _ in 0..steps {
        let center = points.last().unwrap().clone();
        let mut found = None;
        let mut j = seg;
        while j + 1 < line.len() {
            let start = if j == seg {
                linalg::lerp(&line[j], &line[j + 1], t)
            } else {
                line[j].clone()
            };
            let end = &line[j + 1];
            let d = linalg::sub(end, &start);
            let w = linalg::sub(&start, &center);
            let a = linalg::dot(&d, &d);
            if a > 0.0 {
                let b = linalg::dot(&w, &d);
                let c = (linalg::dot(&w, &w) - h * h).min(0.0);
                let u = (-b + (b * b - a * c).max(0.0).sqrt()) / a;
                if u <= 1.0 {
                    let u = u.max(0.0);
                    let t0 = if j == seg { t } else { 0.0 };
                    found = Some((j, t0 + u * (1.0 - t0), linalg::lerp(&start, end, u)));
                    break;
                }
            }
            j += 1;
        }
        match found {
            Some((j, tj, p)) => {
                seg = j;
                t = tj;
                points.push(p);
            }
            None => {
                return March {
                    points,
                    overshoot: true,
                }
            }
        }
    }
    March {
        points,
        overshoot: false,
    }
}

/// Normal part of `g` against the unit tangent `t`.
fn normal_part(g: &[f64], t: &[f64]) -> Vec<f64> {
    let mut v = g.to_vec();
    linalg::reject(&mut v, t);
    v
}

/// One string update: interior images move by `−dt (∇V)^⊥`, free endpoints
/// by `−dt ∇V`, followed by [`reparameterize`].
pub fn step_string<L: Landscape + ?Sized>(
    path: &StringPath,
    landscape: &L,
    dt: f64,
) -> Result<StringPath> {
    require_positive("dt", dt)?;
    crate::error::check_dimension(landscape.dimension(), path.dimension())?;
    let n = path.len();
    let mut images = path.images.clone();
    for (i, img) in images.iter_mut().enumerate() {
        let g = landscape.gradient(&path.images[i]);
        let force = if i == 0 || i == n - 1 {
            if path.endpoints_fixed[usize::from(i != 0)] {
                continue;
            }
            g
        } else {
            normal_part(&g, &path.tangent(i))
        };
        for (x, f) in img.iter_mut().zip(&force) {
            *x -= dt * f;
        }
        if !linalg::all_finite(img) {
            return Err(Error::Divergence {
                module: "string_zero",
                step: i,
            });
        }
    }
    Ok(reparameterize(&StringPath {
        images,
        endpoints_fixed: path.endpoints_fixed,
    }))
}

/// `max_i ‖∇V(φ_i) − (∇V·τ̂_i) τ̂_i‖` over interior images.
pub fn mep_residual<L: Landscape + ?Sized>(path: &StringPath, landscape: &L) -> f64 {
    (1..path.len() - 1)
        .map(|i| {
            let g = landscape.gradient(&path.images[i]);
            linalg::norm(&normal_part(&g, &path.tangent(i)))
        })
        .fold(0.0, f64::max)
}

/// Result of a string or band relaxation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MepReport {
    pub path: StringPath,
    pub residual: f64,
    /// Highest verified saddle, or the highest image if the path has no
    /// interior maximum.
    pub saddle: Vec<f64>,
    pub barrier_forward: f64,
    pub barrier_backward: f64,
    /// All verified saddles in path order.
    pub saddles: Vec<SaddlePoint>,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
}

impl MepReport {
    pub(crate) fn assemble<L: Landscape + ?Sized>(
        path: StringPath,
        landscape: &L,
        residual: f64,
        iterations: usize,
        residual_history: Vec<f64>,
    ) -> Result<Self> {
        let saddles = extract_saddles(&path, landscape)?;
        let (saddle, top) = match saddles.iter().max_by(|a, b| a.value.total_cmp(&b.value)) {
            Some(s) => (s.location.clone(), s.value),
            None => {
                let energies = path.energies(landscape);
                let (k, v) = energies
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.total_cmp(b.1))
                    .map(|(k, v)| (k, *v))
                    .unwrap();
                (path.images[k].clone(), v)
            }
        };
        Ok(Self {
            barrier_forward: top - landscape.value(path.first()),
            barrier_backward: top - landscape.value(path.last()),
            path,
            residual,
            saddle,
            saddles,
            iterations,
            residual_history,
        })
    }
}

const STALL_WINDOW: usize = 1000;

/// Iterates [`step_string`] until [`mep_residual`] `≤ tol`.
///
/// A step that more than doubles the residual (explicit-Euler instability) is
/// rejected and `dt` halved, down to `dt·2⁻²⁰` below which steps are always
/// accepted; after 50 accepted steps in a row `dt` doubles again, capped at
/// a ceiling that starts at the initial `dt`. Central tangents make the
/// explicit iteration oscillate rather than blow up where a steep tangential
/// force meets weak transverse curvature; when the residual sets no new low
/// for `STALL_WINDOW` accepted steps the ceiling halves. The history only
/// contains accepted states.
pub fn converge_string<L: Landscape + ?Sized>(
    path: &StringPath,
    landscape: &L,
    dt: f64,
    tol: f64,
    max_iter: usize,
) -> Result<MepReport> {
    require_positive("dt", dt)?;
    require_positive("tol", tol)?;
    crate::error::check_dimension(landscape.dimension(), path.dimension())?;
    let dt_min = dt * 2f64.powi(-20);
    let mut current = reparameterize(path);
    let mut residual = mep_residual(&current, landscape);
    let mut history = vec![residual];
    let mut h = dt;
    let mut ceiling = dt;
    let mut streak = 0usize;
    let mut best = residual;
    let mut since_best = 0usize;
    let mut iterations = 0usize;
    while residual > tol {
        if iterations == max_iter {
            return Err(Error::NonConvergence {
                module: "string_zero",
                iterations,
                residual,
            });
        }
        iterations += 1;
        let next = match step_string(&current, landscape, h) {
            Ok(next) => next,
            Err(Error::Divergence { .. }) if h > dt_min => {
                h *= 0.5;
                streak = 0;
                continue;
            }
            Err(e) => return Err(e),
        };
        let r = mep_residual(&next, landscape);
        if !r.is_finite() || (r > 2.0 * residual && h > dt_min) {
            h *= 0.5;
            streak = 0;
            continue;
        }
        current = next;
        residual = r;
        history.push(r);
        if r < best {
            best = r;
            since_best = 0;
        } else {
            since_best += 1;
        }
        if since_best >= STALL_WINDOW && ceiling > dt_min {
            ceiling *= 0.5;
            h = h.min(ceiling);
            since_best = 0;
            log::debug!("string residual stalled at {best:e}; step ceiling {ceiling:e}");
        }
        streak += 1;
        if streak >= 50 {
            h = (2.0 * h).min(ceiling);
            streak = 0;
        }
    }
    log::debug!("string converged in {iterations} iterations, residual {residual:e}");
    MepReport::assemble(current, landscape, residual, iterations, history)
}
