//! Analytic energy landscapes.
//!
//! Three families are provided: the quartic double well `¼(1−x²)²` (in one
//! dimension, and in two with a harmonic transverse direction), the
//! four-Gaussian Mueller potential, and randomly perturbed variants
//! `V = V̄ + δV` where `δV` is a seeded sum of isotropic Gaussian bumps.
//!
//! Mueller constants (standard literature form):
//!
//! ```text
//! V(x, y) = Σ_k A_k exp(a_k (x−x0_k)² + b_k (x−x0_k)(y−y0_k) + c_k (y−y0_k)²)
//! A  = (−200, −100, −170, 15)
//! a  = (−1, −1, −6.5, 0.7)
//! b  = (0, 0, 11, 0.6)
//! c  = (−10, −10, −6.5, 0.7)
//! x0 = (1, 0, −0.5, −1)
//! y0 = (0, 0.5, 1.5, 1)
//! ```
//!
//! All algorithms in this crate operate on the [`Landscape`] trait, so test
//! code can plug in landscapes with closed-form answers.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dimension, Error, Result};
use crate::linalg;
use crate::seeding;

/// A smooth scalar field with analytic first and second derivatives.
pub trait Landscape: Send + Sync {
    fn dimension(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    fn gradient_into(&self, x: &[f64], out: &mut [f64]);

    fn hessian_matrix(&self, x: &[f64]) -> DMatrix<f64>;

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dimension()];
        self.gradient_into(x, &mut g);
        g
    }
}

/// Symmetric matrix of second derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct Hessian {
    pub matrix: DMatrix<f64>,
}

impl Hessian {
    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::sorted_eigen(&self.matrix).0
    }

    pub fn asymmetry(&self) -> f64 {
        (&self.matrix - self.matrix.transpose()).amax()
    }

    pub fn determinant(&self) -> f64 {
        self.matrix.determinant()
    }

    /// Number of strictly negative eigenvalues.
    pub fn negative_count(&self) -> usize {
        self.eigenvalues().iter().filter(|&&v| v < 0.0).count()
    }
}

const MUELLER: [[f64; 4]; 6] = [
    [-200.0, -100.0, -170.0, 15.0],
    [-1.0, -1.0, -6.5, 0.7],
    [0.0, 0.0, 11.0, 0.6],
    [-10.0, -10.0, -6.5, 0.7],
    [1.0, 0.0, -0.5, -1.0],
    [0.0, 0.5, 1.5, 1.0],
];

/// Which analytic family a [`PotentialSpec`] belongs to.
#[derive(Debug, Clone, PartialEq)]
pub enum PotentialKind {
    DoubleWell1D,
    DoubleWell2D,
    Mueller,
    Perturbed {
        base: Box<PotentialSpec>,
        seed: u64,
        amplitude: f64,
        bump_count: usize,
        bump_width: f64,
    },
}

/// An immutable analytic energy landscape.
///
/// `parameters` holds the coefficients that fully determine the field: `[ω_y]`
/// for the 2-D double well, the 24 Mueller constants row by row, and for a
/// perturbed landscape the bump list flattened as `(center..., amplitude)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSpec {
    pub kind: PotentialKind,
    pub dimension: usize,
    pub parameters: Vec<f64>,
}

/// Configuration-level description of a potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    pub kind: BaseKind,
    #[serde(default)]
    pub omega_y: Option<f64>,
    #[serde(default)]
    pub perturbation: Option<PerturbationConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseKind {
    #[serde(rename = "double_well_1d")]
    DoubleWell1d,
    #[serde(rename = "double_well_2d")]
    DoubleWell2d,
    Mueller,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationConfig {
    pub seed: u64,
    pub amplitude: f64,
    pub bump_count: usize,
    pub bump_width: f64,
}

impl PotentialConfig {
    pub fn build(&self) -> Result<PotentialSpec> {
        let base = match self.kind {
            BaseKind::DoubleWell1d => PotentialSpec::double_well_1d(),
            BaseKind::DoubleWell2d => {
                PotentialSpec::double_well_2d_with(self.omega_y.unwrap_or(1.0))?
            }
            BaseKind::Mueller => PotentialSpec::mueller(),
        };
        match &self.perturbation {
            None => Ok(base),
            Some(p) => make_perturbed(&base, p.seed, p.amplitude, p.bump_count, p.bump_width),
        }
    }
}

impl PotentialSpec {
    pub fn double_well_1d() -> Self {
        PotentialSpec {
            kind: PotentialKind::DoubleWell1D,
            dimension: 1,
            parameters: vec![],
        }
    }

    /// `¼(1−x²)² + ½y²`
    pub fn double_well_2d() -> Self {
        Self::double_well_2d_with(1.0).expect("unit frequency is valid")
    }

    /// `¼(1−x²)² + ½ω_y²y²`
    pub fn double_well_2d_with(omega_y: f64) -> Result<Self> {
        crate::error::require_positive("omega_y", omega_y)?;
        Ok(PotentialSpec {
            kind: PotentialKind::DoubleWell2D,
            dimension: 2,
            parameters: vec![omega_y],
        })
    }

    pub fn mueller() -> Self {
        PotentialSpec {
            kind: PotentialKind::Mueller,
            dimension: 2,
            parameters: MUELLER.iter().flatten().copied().collect(),
        }
    }

    /// Axis-aligned box containing every critical point with margin; also the
    /// region over which perturbation bumps are scattered.
    pub fn sampling_box(&self) -> Vec<(f64, f64)> {
        match &self.kind {
            PotentialKind::DoubleWell1D => vec![(-2.0, 2.0)],
            PotentialKind::DoubleWell2D => vec![(-2.0, 2.0), (-2.0, 2.0)],
            PotentialKind::Mueller => vec![(-1.5, 1.2), (-0.2, 2.0)],
            PotentialKind::Perturbed { base, .. } => base.sampling_box(),
        }
    }

    pub fn name(&self) -> String {
        match &self.kind {
            PotentialKind::DoubleWell1D => "double_well_1d".into(),
            PotentialKind::DoubleWell2D => "double_well_2d".into(),
            PotentialKind::Mueller => "mueller".into(),
            PotentialKind::Perturbed { base, seed, .. } => {
                format!("perturbed({}, seed={seed})", base.name())
            }
        }
    }

    /// The unperturbed landscape (itself when not perturbed).
    pub fn base(&self) -> &PotentialSpec {
        match &self.kind {
            PotentialKind::Perturbed { base, .. } => base.base(),
            _ => self,
        }
    }

    /// Checked evaluation.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        check_dimension(self.dimension, x.len())?;
        Ok(self.value(x))
    }

    /// Checked analytic gradient.
    pub fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dimension(self.dimension, x.len())?;
        Ok(self.gradient(x))
    }

    /// Checked analytic Hessian.
    pub fn hessian(&self, x: &[f64]) -> Result<Hessian> {
        check_dimension(self.dimension, x.len())?;
        Ok(Hessian {
            matrix: self.hessian_matrix(x),
        })
    }

    /// The perturbation `δV(x)`; zero for unperturbed landscapes.
    pub fn perturbation_value(&self, x: &[f64]) -> f64 {
        match &self.kind {
            PotentialKind::Perturbed { bump_width, .. } => {
                bumps_value(&self.parameters, self.dimension, *bump_width, x)
            }
            _ => 0.0,
        }
    }

    fn mueller_terms(&self) -> impl Iterator<Item = [f64; 6]> + '_ {
        let p = &self.parameters;
        (0..4).map(move |k| [p[k], p[4 + k], p[8 + k], p[12 + k], p[16 + k], p[20 + k]])
    }
}

impl Landscape for PotentialSpec {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn value(&self, x: &[f64]) -> f64 {
        match &self.kind {
            PotentialKind::DoubleWell1D => {
                let u = 1.0 - x[0] * x[0];
                0.25 * u * u
            }
            PotentialKind::DoubleWell2D => {
                let u = 1.0 - x[0] * x[0];
                let w = self.parameters[0];
                0.25 * u * u + 0.5 * w * w * x[1] * x[1]
            }
            PotentialKind::Mueller => self
                .mueller_terms()
                .map(|[amp, a, b, c, x0, y0]| {
                    let (dx, dy) = (x[0] - x0, x[1] - y0);
                    amp * (a * dx * dx + b * dx * dy + c * dy * dy).exp()
                })
                .sum(),
            PotentialKind::Perturbed {
                base, bump_width, ..
            } => base.value(x) + bumps_value(&self.parameters, self.dimension, *bump_width, x),
        }
    }

    fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        match &self.kind {
            PotentialKind::DoubleWell1D => out[0] = x[0] * (x[0] * x[0] - 1.0),
            PotentialKind::DoubleWell2D => {
                let w = self.parameters[0];
                out[0] = x[0] * (x[0] * x[0] - 1.0);
                out[1] = w * w * x[1];
            }
            PotentialKind::Mueller => {
                out[0] = 0.0;
                out[1] = 0.0;
                for [amp, a, b, c, x0, y0] in self.mueller_terms() {
                    let (dx, dy) = (x[0] - x0, x[1] - y0);
                    let e = amp * (a * dx * dx + b * dx * dy + c * dy * dy).exp();
                    out[0] += e * (2.0 * a * dx + b * dy);
                    out[1] += e * (b * dx + 2.0 * c * dy);
                }
            }
            PotentialKind::Perturbed {
                base, bump_width, ..
            } => {
                base.gradient_into(x, out);
                bumps_gradient_add(&self.parameters, self.dimension, *bump_width, x, out);
            }
        }
    }

    fn hessian_matrix(&self, x: &[f64]) -> DMatrix<f64> {
        match &self.kind {
            PotentialKind::DoubleWell1D => DMatrix::from_element(1, 1, 3.0 * x[0] * x[0] - 1.0),
            PotentialKind::DoubleWell2D => {
                let w = self.parameters[0];
                DMatrix::from_row_slice(2, 2, &[3.0 * x[0] * x[0] - 1.0, 0.0, 0.0, w * w])
            }
            PotentialKind::Mueller => {
                let mut h = DMatrix::zeros(2, 2);
                for [amp, a, b, c, x0, y0] in self.mueller_terms() {
                    let (dx, dy) = (x[0] - x0, x[1] - y0);
                    let e = amp * (a * dx * dx + b * dx * dy + c * dy * dy).exp();
                    let gx = 2.0 * a * dx + b * dy;
                    let gy = b * dx + 2.0 * c * dy;
                    h[(0, 0)] += e * (gx * gx + 2.0 * a);
                    h[(0, 1)] += e * (gx * gy + b);
                    h[(1, 1)] += e * (gy * gy + 2.0 * c);
                }
                h[(1, 0)] = h[(0, 1)];
                h
            }
            PotentialKind::Perturbed {
                base, bump_width, ..
            } => {
                let mut h = base.hessian_matrix(x);
                bumps_hessian_add(&self.parameters, self.dimension, *bump_width, x, &mut h);
                h
            }
        }
    }
}

// Bumps beyond this many widths contribute less than e^-40 of their amplitude.
const BUMP_CUTOFF_WIDTHS: f64 = 9.0;

fn bumps_value(params: &[f64], dim: usize, width: f64, x: &[f64]) -> f64 {
    let inv = 1.0 / (2.0 * width * width);
    let cut2 = (BUMP_CUTOFF_WIDTHS * width).powi(2);
    params
        .chunks_exact(dim + 1)
        .filter_map(|b| {
            let r2: f64 = (0..dim).map(|k| (x[k] - b[k]).powi(2)).sum();
            (r2 < cut2).then(|| b[dim] * (-r2 * inv).exp())
        })
        .sum()
}

fn bumps_gradient_add(params: &[f64], dim: usize, width: f64, x: &[f64], out: &mut [f64]) {
    let w2 = width * width;
    let cut2 = (BUMP_CUTOFF_WIDTHS * width).powi(2);
    for b in params.chunks_exact(dim + 1) {
        let r2: f64 = (0..dim).map(|k| (x[k] - b[k]).powi(2)).sum();
        if r2 >= cut2 {
            continue;
        }
        let e = b[dim] * (-r2 / (2.0 * w2)).exp();
        for k in 0..dim {
            out[k] -= e * (x[k] - b[k]) / w2;
        }
    }
}

fn bumps_hessian_add(params: &[f64], dim: usize, width: f64, x: &[f64], h: &mut DMatrix<f64>) {
    let w2 = width * width;
    let cut2 = (BUMP_CUTOFF_WIDTHS * width).powi(2);
    for b in params.chunks_exact(dim + 1) {
        let r2: f64 = (0..dim).map(|k| (x[k] - b[k]).powi(2)).sum();
        if r2 >= cut2 {
            continue;
        }
        let e = b[dim] * (-r2 / (2.0 * w2)).exp();
        for i in 0..dim {
            for j in 0..dim {
                let delta = if i == j { 1.0 } else { 0.0 };
                h[(i, j)] += e * ((x[i] - b[i]) * (x[j] - b[j]) / (w2 * w2) - delta / w2);
            }
        }
    }
}

/// Builds `base + δV` with `δV` a sum of `bump_count` isotropic Gaussian bumps
/// of width `bump_width`, centers uniform over the base's sampling box and
/// signed amplitudes uniform in `[−amplitude, amplitude]`.
///
/// Overlapping bumps can add up beyond `amplitude`; the amplitudes are then
/// rescaled so that the supremum of `|δV|` over the sampling box (located by a
/// grid scan at a quarter bump width followed by Newton refinement of every
/// grid extremum) equals `amplitude`.
pub fn make_perturbed(
    base: &PotentialSpec,
    seed: u64,
    amplitude: f64,
    bump_count: usize,
    bump_width: f64,
) -> Result<PotentialSpec> {
    if !(amplitude.is_finite() && amplitude >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "amplitude",
            reason: format!("must be non-negative and finite, got {amplitude}"),
        });
    }
    crate::error::require_positive("bump_width", bump_width)?;
    let base = base.base().clone();
    let dim = base.dimension;
    let bounds = base.sampling_box();
    let mut rng = seeding::rng(seed, 0);
    let mut params = Vec::with_capacity(bump_count * (dim + 1));
    for _ in 0..bump_count {
        for &(lo, hi) in &bounds {
            params.push(rng.random_range(lo..hi));
        }
        params.push(if amplitude > 0.0 {
            rng.random_range(-amplitude..=amplitude)
        } else {
            0.0
        });
    }
    if amplitude > 0.0 && bump_count > 0 {
        let sup = perturbation_sup(&params, dim, bump_width, &bounds);
        if sup > amplitude {
            let scale = amplitude / sup;
            params
                .chunks_exact_mut(dim + 1)
                .for_each(|b| b[dim] *= scale);
        }
    }
    Ok(PotentialSpec {
        kind: PotentialKind::Perturbed {
            base: Box::new(base),
            seed,
            amplitude,
            bump_count,
            bump_width,
        },
        dimension: dim,
        parameters: params,
    })
}

/// Supremum of `|δV|` over the box.
fn perturbation_sup(params: &[f64], dim: usize, width: f64, bounds: &[(f64, f64)]) -> f64 {
    let h = width / 4.0;
    let counts: Vec<usize> = bounds
        .iter()
        .map(|&(lo, hi)| ((hi - lo) / h).ceil() as usize + 1)
        .collect();
    let total: usize = counts.iter().product();
    let point = |flat: usize| -> Vec<f64> {
        let mut rem = flat;
        let mut p = Vec::with_capacity(dim);
        for (k, &(lo, hi)) in bounds.iter().enumerate() {
            let i = rem % counts[k];
            rem /= counts[k];
            p.push((lo + i as f64 * h).min(hi));
        }
        p
    };
    let values: Vec<f64> = (0..total)
        .map(|i| bumps_value(params, dim, width, &point(i)))
        .collect();
    let mut sup = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    // Refine every grid point that is a local extremum of |δV| among its axis neighbors.
    let mut strides = vec![1usize; dim];
    for k in 1..dim {
        strides[k] = strides[k - 1] * counts[k - 1];
    }
    for flat in 0..total {
        let v = values[flat].abs();
        if v < 0.5 * sup {
            continue;
        }
        let mut is_peak = true;
        for k in 0..dim {
            let i = (flat / strides[k]) % counts[k];
            if i > 0 && values[flat - strides[k]].abs() > v {
                is_peak = false;
            }
            if i + 1 < counts[k] && values[flat + strides[k]].abs() > v {
                is_peak = false;
            }
        }
        if is_peak {
            sup = sup.max(refine_extremum(params, dim, width, bounds, point(flat)));
        }
    }
    sup
}

fn refine_extremum(
    params: &[f64],
    dim: usize,
    width: f64,
    bounds: &[(f64, f64)],
    mut x: Vec<f64>,
) -> f64 {
    let mut best = bumps_value(params, dim, width, &x).abs();
    for _ in 0..20 {
        let mut g = vec![0.0; dim];
        bumps_gradient_add(params, dim, width, &x, &mut g);
        let mut h = DMatrix::zeros(dim, dim);
        bumps_hessian_add(params, dim, width, &x, &mut h);
        let Some(step) = h.lu().solve(&nalgebra::DVector::from_column_slice(&g)) else {
            break;
        };
        let mut next = x.clone();
        for k in 0..dim {
            let limited = step[k].clamp(-width, width);
            next[k] = (x[k] - limited).clamp(bounds[k].0, bounds[k].1);
        }
        let v = bumps_value(params, dim, width, &next).abs();
        if v <= best {
            break;
        }
        best = v;
        x = next;
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn central_fd(spec: &PotentialSpec, x: &[f64], h: f64) -> Vec<f64> {
        (0..x.len())
            .map(|k| {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[k] += h;
                xm[k] -= h;
                (spec.value(&xp) - spec.value(&xm)) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn double_well_values() {
        let dw = PotentialSpec::double_well_1d();
        assert_eq!(dw.eval(&[1.0]).unwrap(), 0.0);
        assert_eq!(dw.eval(&[0.0]).unwrap(), 0.25);
        assert_eq!(dw.grad(&[0.0]).unwrap(), vec![0.0]);
        assert_eq!(dw.grad(&[1.0]).unwrap(), vec![0.0]);
        assert_eq!(dw.grad(&[0.5]).unwrap(), vec![-0.375]);
        let fd = central_fd(&dw, &[0.5], 1e-5);
        assert!((fd[0] + 0.375).abs() < 1e-9);
        assert_eq!(dw.hessian(&[1.0]).unwrap().matrix[(0, 0)], 2.0);
        assert_eq!(dw.hessian(&[-1.0]).unwrap().matrix[(0, 0)], 2.0);
        assert_eq!(dw.hessian(&[0.0]).unwrap().matrix[(0, 0)], -1.0);
    }

    #[test]
    fn double_well_critical_points() {
        let dw = PotentialSpec::double_well_1d();
        for x in [-1.0, 0.0, 1.0] {
            assert_eq!(dw.grad(&[x]).unwrap()[0], 0.0);
        }
        for x in [-0.5, 0.5] {
            assert!(dw.grad(&[x]).unwrap()[0].abs() > 0.1);
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let dw = PotentialSpec::double_well_2d();
        assert_eq!(
            dw.eval(&[0.0]),
            Err(Error::DimensionMismatch {
                expected: 2,
                got: 1
            })
        );
        assert!(dw.grad(&[0.0, 1.0, 2.0]).is_err());
        assert!(dw.hessian(&[]).is_err());
    }

    #[test]
    fn perturbation_rejects_bad_parameters() {
        let m = PotentialSpec::mueller();
        assert!(make_perturbed(&m, 1, -1.0, 10, 0.05).is_err());
        assert!(make_perturbed(&m, 1, 1.0, 10, 0.0).is_err());
        assert!(make_perturbed(&m, 1, f64::NAN, 10, 0.05).is_err());
    }

    #[test]
    fn zero_amplitude_matches_base() {
        let m = PotentialSpec::mueller();
        let p = make_perturbed(&m, 3, 0.0, 50, 0.05).unwrap();
        for x in [[-0.5, 1.4], [0.6, 0.0], [0.1, 0.3]] {
            assert_eq!(p.value(&x), m.value(&x));
            assert_eq!(p.gradient(&x), m.gradient(&x));
        }
    }

    #[test]
    fn perturbation_is_deterministic() {
        let m = PotentialSpec::mueller();
        let a = make_perturbed(&m, 42, 1.0, 100, 0.05).unwrap();
        let b = make_perturbed(&m, 42, 1.0, 100, 0.05).unwrap();
        let c = make_perturbed(&m, 43, 1.0, 100, 0.05).unwrap();
        assert_eq!(a.parameters, b.parameters);
        assert_ne!(a.parameters, c.parameters);
    }

    #[test]
    fn perturbed_hessian_is_symmetric() {
        let p = make_perturbed(&PotentialSpec::mueller(), 5, 2.0, 200, 0.05).unwrap();
        let h = p.hessian(&[-0.3, 0.9]).unwrap();
        assert!(h.asymmetry() <= 1e-12 * h.matrix.amax());
    }
}
