use super::{normal_part, MepReport, StringPath};
use crate::error::{require_positive, Error, Result};
use crate::linalg;
use crate::potentials::Landscape;

/// Interior forces of the band and the largest force norm.
fn band_forces<L: Landscape + ?Sized>(
    chain: &StringPath,
    landscape: &L,
    k_spring: f64,
) -> (Vec<Vec<f64>>, f64) {
    let n = chain.len();
    let mut forces = Vec::with_capacity(n - 2);
    let mut worst = 0.0f64;
    for i in 1..n - 1 {
        let tau = chain.tangent(i);
        let g = landscape.gradient(&chain.images[i]);
        let mut f = normal_part(&g, &tau);
        f.iter_mut().for_each(|v| *v = -*v);
        let ahead = linalg::distance(&chain.images[i + 1], &chain.images[i]);
        let behind = linalg::distance(&chain.images[i], &chain.images[i - 1]);
        let spring = k_spring * (ahead - behind);
        f.iter_mut().zip(&tau).for_each(|(v, t)| *v += spring * t);
        worst = worst.max(linalg::norm(&f));
        forces.push(f);
    }
    (forces, worst)
}

/// Runs `iterations` explicit steps of the nudged elastic band without a
/// convergence test. Endpoints stay fixed.
pub fn neb_iterate<L: Landscape + ?Sized>(
    chain: &StringPath,
    landscape: &L,
    k_spring: f64,
    dt: f64,
    iterations: usize,
) -> Result<StringPath> {
    require_positive("k_spring", k_spring)?;
    require_positive("dt", dt)?;
    let mut current = chain.clone();
    for step in 0..iterations {
        let (forces, _) = band_forces(&current, landscape, k_spring);
        apply(&mut current, &forces, dt, step)?;
    }
    Ok(current)
}

fn apply(chain: &mut StringPath, forces: &[Vec<f64>], dt: f64, step: usize) -> Result<()> {
    for (img, f) in chain.images[1..].iter_mut().zip(forces) {
        img.iter_mut().zip(f).for_each(|(x, v)| *x += dt * v);
        if !linalg::all_finite(img) {
            return Err(Error::Divergence {
                module: "neb",
                step,
            });
        }
    }
    Ok(())
}

/// Nudged elastic band relaxation. Image force is the normal part of `−∇V`
/// plus the tangential spring force `k (‖d_{i+1}‖ − ‖d_i‖) τ̂`; converged
/// when the largest image force is `≤ tol`, which implies the MEP residual
/// test at the same tolerance.
pub fn neb_relax<L: Landscape + ?Sized>(
    chain: &StringPath,
    landscape: &L,
    k_spring: f64,
    dt: f64,
    tol: f64,
    max_iter: usize,
) -> Result<MepReport> {
    require_positive("k_spring", k_spring)?;
    require_positive("dt", dt)?;
    require_positive("tol", tol)?;
    crate::error::check_dimension(landscape.dimension(), chain.dimension())?;
    let mut current = StringPath {
        images: chain.images.clone(),
        endpoints_fixed: [true, true],
    };
    let mut history = Vec::new();
    for iteration in 0..=max_iter {
        let (forces, worst) = band_forces(&current, landscape, k_spring);
        history.push(worst);
        if worst <= tol {
            let residual = super::mep_residual(&current, landscape);
            return MepReport::assemble(current, landscape, residual, iteration, history);
        }
        if iteration == max_iter {
            break;
        }
        apply(&mut current, &forces, dt, iteration)?;
    }
    Err(Error::NonConvergence {
        module: "neb",
        iterations: max_iter,
        residual: *history.last().unwrap(),
    })
}
