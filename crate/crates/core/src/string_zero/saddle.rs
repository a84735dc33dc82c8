use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::StringPath;
use crate::error::{Error, Result};
use crate::linalg;
use crate::potentials::Landscape;

/// A refined index-1 saddle on a path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaddlePoint {
    pub location: Vec<f64>,
    pub value: f64,
    /// `V(saddle) − V(first image)`
    pub barrier_forward: f64,
    /// `V(saddle) − V(last image)`
    pub barrier_backward: f64,
    /// Hessian eigenvalues, ascending; exactly the first is negative.
    pub eigenvalues: Vec<f64>,
    /// Unit eigenvector of the negative eigenvalue.
    pub unstable_direction: Vec<f64>,
    /// Image index the refinement started from.
    pub image: usize,
}

const NEWTON_ITERATIONS: usize = 100;

/// Newton iteration on `∇V = 0` from `x0`, constrained to the ball of radius
/// `trust_radius` around `x0`, followed by a check that the Hessian has
/// exactly one negative eigenvalue.
pub fn refine_saddle<L: Landscape + ?Sized>(
    landscape: &L,
    x0: &[f64],
    trust_radius: f64,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let mut x = x0.to_vec();
    let mut gnorm = linalg::norm(&landscape.gradient(&x));
    for _ in 0..NEWTON_ITERATIONS {
        let g = landscape.gradient(&x);
        let h = landscape.hessian_matrix(&x);
        let Some(dx) = h.lu().solve(&DVector::from_column_slice(&g)) else {
            return Err(Error::SaddleVerification(format!(
                "singular Hessian at {x:?}"
            )));
        };
        let trial: Vec<f64> = x.iter().zip(dx.iter()).map(|(a, d)| a - d).collect();
        if linalg::distance(&trial, x0) > trust_radius {
            return Err(Error::SaddleVerification(format!(
                "Newton iterate left the trust ball of radius {trust_radius:e} around {x0:?}"
            )));
        }
        let gt = linalg::norm(&landscape.gradient(&trial));
        let step = dx.norm();
        if gt >= gnorm && step <= 1e-12 * (1.0 + linalg::norm(&x)) {
            break;
        }
        x = trial;
        gnorm = gt;
        if step <= 1e-15 * (1.0 + linalg::norm(&x)) {
            break;
        }
    }
    let (eigenvalues, vectors) = linalg::sorted_eigen(&landscape.hessian_matrix(&x));
    let scale = eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tiny = 1e-10 * scale;
    let negatives = eigenvalues.iter().filter(|&&v| v < -tiny).count();
    let degenerate = eigenvalues.iter().any(|v| v.abs() <= tiny);
    if negatives != 1 || degenerate {
        return Err(Error::SaddleVerification(format!(
            "critical point {x:?} has Hessian eigenvalues {eigenvalues:?}"
        )));
    }
    let h = landscape.hessian_matrix(&x);
    let residual = linalg::norm(&landscape.gradient(&x));
    if residual > 1e-8 * scale.max(1.0) * (1.0 + linalg::norm(&x)) || h.nrows() != x.len() {
        return Err(Error::SaddleVerification(format!(
            "Newton stalled at {x:?} with gradient norm {residual:e}"
        )));
    }
    let unstable = vectors.column(0).iter().copied().collect();
    Ok((x, eigenvalues, unstable))
}

fn interior_maxima(energies: &[f64]) -> Vec<usize> {
    (1..energies.len() - 1)
        .filter(|&i| energies[i] > energies[i - 1] && energies[i] >= energies[i + 1])
        .collect()
}

fn refine_at<L: Landscape + ?Sized>(
    path: &StringPath,
    landscape: &L,
    energies: &[f64],
    i: usize,
) -> Result<SaddlePoint> {
    let (a, b, c) = (&path.images[i - 1], &path.images[i], &path.images[i + 1]);
    let (va, vb, vc) = (energies[i - 1], energies[i], energies[i + 1]);
    let curvature = va - 2.0 * vb + vc;
    let t = if curvature < 0.0 {
        (0.5 * (va - vc) / curvature).clamp(-1.0, 1.0)
    } else {
        0.0
    };
    let start: Vec<f64> = (0..b.len())
        .map(|k| b[k] + 0.5 * t * (c[k] - a[k]) + 0.5 * t * t * (c[k] - 2.0 * b[k] + a[k]))
        .collect();
    let trust = 2.0 * linalg::distance(a, b).max(linalg::distance(b, c));
    let (location, eigenvalues, unstable_direction) = refine_saddle(landscape, &start, trust)?;
    let value = landscape.value(&location);
    Ok(SaddlePoint {
        value,
        barrier_forward: value - energies[0],
        barrier_backward: value - energies[energies.len() - 1],
        location,
        eigenvalues,
        unstable_direction,
        image: i,
    })
}

/// Refines every interior energy maximum of the path to a verified saddle, in
/// path order. A path without interior maxima yields an empty list.
pub fn extract_saddles<L: Landscape + ?Sized>(
    path: &StringPath,
    landscape: &L,
) -> Result<Vec<SaddlePoint>> {
    crate::error::check_dimension(landscape.dimension(), path.dimension())?;
    let energies = path.energies(landscape);
    interior_maxima(&energies)
        .into_iter()
        .map(|i| refine_at(path, landscape, &energies, i))
        .collect()
}

/// Refines the highest interior energy maximum of the path: quadratic
/// interpolation through the top image and its neighbours, then Newton on
/// `∇V = 0` with Hessian-signature verification.
pub fn extract_saddle<L: Landscape + ?Sized>(
    path: &StringPath,
    landscape: &L,
) -> Result<SaddlePoint> {
    crate::error::check_dimension(landscape.dimension(), path.dimension())?;
    let energies = path.energies(landscape);
    let top = interior_maxima(&energies)
        .into_iter()
        .max_by(|&a, &b| energies[a].total_cmp(&energies[b]))
        .ok_or_else(|| Error::SaddleVerification("path has no interior energy maximum".into()))?;
    refine_at(path, landscape, &energies, top)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::PotentialSpec;
    use crate::string_zero::init_string;

    #[test]
    fn double_well_saddles() {
        let dw1 = PotentialSpec::double_well_1d();
        let s = init_string(&[-1.0], &[1.0], 8).unwrap();
        let sp = extract_saddle(&s, &dw1).unwrap();
        assert!(sp.location[0].abs() < 1e-14);
        assert!((sp.barrier_forward - 0.25).abs() < 1e-14);
        assert!((sp.barrier_backward - 0.25).abs() < 1e-14);

        let dw2 = PotentialSpec::double_well_2d();
        let s = init_string(&[-1.0, 0.0], &[1.0, 0.0], 10).unwrap();
        let sp = extract_saddle(&s, &dw2).unwrap();
        assert!(linalg::norm(&sp.location) < 1e-14);
        assert_eq!(sp.eigenvalues.len(), 2);
        assert!(sp.unstable_direction[0].abs() > 0.999);
    }

    #[test]
    fn monotone_path_has_no_saddle() {
        let dw = PotentialSpec::double_well_1d();
        let s = init_string(&[0.1], &[1.0], 6).unwrap();
        assert!(matches!(
            extract_saddle(&s, &dw),
            Err(Error::SaddleVerification(_))
        ));
        assert!(extract_saddles(&s, &dw).unwrap().is_empty());
    }

    struct Dome;

    impl Landscape for Dome {
        fn dimension(&self) -> usize {
            2
        }
        fn value(&self, x: &[f64]) -> f64 {
            -x[0] * x[0] - 2.0 * x[1] * x[1]
        }
        fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
            out[0] = -2.0 * x[0];
            out[1] = -4.0 * x[1];
        }
        fn hessian_matrix(&self, _x: &[f64]) -> nalgebra::DMatrix<f64> {
            nalgebra::DMatrix::from_row_slice(2, 2, &[-2.0, 0.0, 0.0, -4.0])
        }
    }

    #[test]
    fn maximum_is_not_a_saddle() {
        let s = init_string(&[-1.0, 0.0], &[1.0, 0.0], 5).unwrap();
        assert!(matches!(
            extract_saddle(&s, &Dome),
            Err(Error::SaddleVerification(_))
        ));
    }

    #[test]
    fn newton_respects_trust_ball() {
        let dw = PotentialSpec::double_well_1d();
        assert!(refine_saddle(&dw, &[0.7], 0.1).is_err());
    }
}
