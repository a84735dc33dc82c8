use serde::{Deserialize, Serialize};

use crate::error::{require_positive, Error, Result};
use crate::linalg;
use crate::potentials::Landscape;
use crate::quadrature;

/// How basin weights `N_j = ∫_{B_j} p_s` are computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum WeightMethod {
    /// `N_j ∝ e^{−V_j/k_BT} / √det H_j`, normalized to sum to one.
    Laplace,
    /// Boltzmann mass of each basin of attraction on a regular grid over
    /// `bounds`, divided by the mass of the whole grid. Cells are assigned by
    /// discrete steepest descent; cells draining elsewhere count for no basin.
    Grid {
        resolution: usize,
        bounds: Vec<(f64, f64)>,
    },
}

fn check_minima<L: Landscape + ?Sized>(landscape: &L, minima: &[Vec<f64>]) -> Result<Vec<f64>> {
    if minima.is_empty() {
        return Err(Error::Configuration("no minima given".into()));
    }
    let mut log_dets = Vec::with_capacity(minima.len());
    for (i, m) in minima.iter().enumerate() {
        crate::error::check_dimension(landscape.dimension(), m.len())?;
        let (eig, _) = linalg::sorted_eigen(&landscape.hessian_matrix(m));
        let scale = eig.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let g = linalg::norm(&landscape.gradient(m));
        if eig[0] <= 0.0 || g > 1e-6 * scale.max(1.0) {
            return Err(Error::NotAMinimum(format!(
                "{m:?} (gradient norm {g:e}, Hessian eigenvalues {eig:?})"
            )));
        }
        if eig[0] < 1e-10 * scale {
            return Err(Error::InvalidParameter {
                name: "minima",
                reason: format!("near-singular Hessian at {m:?}"),
            });
        }
        for other in &minima[..i] {
            if linalg::distance(m, other) < 1e-6 {
                return Err(Error::InvalidParameter {
                    name: "minima",
                    reason: format!("duplicate minimum {m:?}"),
                });
            }
        }
        log_dets.push(eig.iter().map(|v| v.ln()).sum());
    }
    Ok(log_dets)
}

/// Equilibrium weights of the basins around `minima` at temperature `kt`.
pub fn equilibrium_weights<L: Landscape + ?Sized>(
    landscape: &L,
    minima: &[Vec<f64>],
    kt: f64,
    method: &WeightMethod,
) -> Result<Vec<f64>> {
    require_positive("k_BT", kt)?;
    let log_dets = check_minima(landscape, minima)?;
    match method {
        WeightMethod::Laplace => {
            let logs: Vec<f64> = minima
                .iter()
                .zip(&log_dets)
                .map(|(m, ld)| -landscape.value(m) / kt - 0.5 * ld)
                .collect();
            let norm = quadrature::log_sum_exp(&logs);
            Ok(logs.iter().map(|l| (l - norm).exp()).collect())
        }
        WeightMethod::Grid { resolution, bounds } => {
            let grid = Grid::new(landscape, bounds, *resolution)?;
            let labels = grid.basins(minima);
            let (mass, total) = grid.masses(kt, minima.len(), |cell, _| labels[cell]);
            Ok(mass.into_iter().map(|m| m / total).collect())
        }
    }
}

/// Grid estimate of the Boltzmann mass inside balls of radius `radius`
/// around each center, relative to the mass of the whole grid.
pub fn capture_mass<L: Landscape + ?Sized>(
    landscape: &L,
    centers: &[Vec<f64>],
    radius: f64,
    kt: f64,
    resolution: usize,
    bounds: &[(f64, f64)],
) -> Result<Vec<f64>> {
    require_positive("k_BT", kt)?;
    require_positive("radius", radius)?;
    let grid = Grid::new(landscape, bounds, resolution)?;
    let (mass, total) = grid.masses(kt, centers.len(), |_, x| {
        centers
            .iter()
            .position(|c| linalg::distance(c, x) <= radius)
    });
    Ok(mass.into_iter().map(|m| m / total).collect())
}

/// Cell-centred grid of potential values in one or two dimensions.
struct Grid {
    shape: Vec<usize>,
    lower: Vec<f64>,
    step: Vec<f64>,
    values: Vec<f64>,
}

impl Grid {
    fn new<L: Landscape + ?Sized>(
        landscape: &L,
        bounds: &[(f64, f64)],
        resolution: usize,
    ) -> Result<Self> {
        let d = landscape.dimension();
        if d > 2 {
            return Err(Error::Configuration(format!(
                "grid quadrature supports 1-D and 2-D landscapes, got {d}-D"
            )));
        }
        crate::error::check_dimension(d, bounds.len())?;
        if resolution < 2 {
            return Err(Error::InvalidParameter {
                name: "resolution",
                reason: "grid needs at least 2 cells per axis".into(),
            });
        }
        let shape = vec![resolution; d];
        let lower: Vec<f64> = bounds.iter().map(|b| b.0).collect();
        let step: Vec<f64> = bounds
            .iter()
            .map(|b| (b.1 - b.0) / resolution as f64)
            .collect();
        let count = resolution.pow(d as u32);
        let mut grid = Self {
            shape,
            lower,
            step,
            values: Vec::with_capacity(count),
        };
        for cell in 0..count {
            let x = grid.center(cell);
            grid.values.push(landscape.value(&x));
        }
        Ok(grid)
    }

    fn center(&self, cell: usize) -> Vec<f64> {
        let mut rem = cell;
        let mut x = Vec::with_capacity(self.shape.len());
        for k in 0..self.shape.len() {
            let i = rem % self.shape[k];
            rem /= self.shape[k];
            x.push(self.lower[k] + (i as f64 + 0.5) * self.step[k]);
        }
        x
    }

    fn neighbours(&self, cell: usize) -> Vec<usize> {
        let d = self.shape.len();
        let mut coords = Vec::with_capacity(d);
        let mut rem = cell;
        for k in 0..d {
            coords.push((rem % self.shape[k]) as isize);
            rem /= self.shape[k];
        }
        let mut out = Vec::new();
        let offsets: &[isize] = &[-1, 0, 1];
        let combos = 3usize.pow(d as u32);
        for c in 0..combos {
            let mut rem = c;
            let mut index = 0usize;
            let mut stride = 1usize;
            let mut valid = true;
            let mut zero = true;
            #[allow(clippy::needless_range_loop)]
            for k in 0..d {
                let o = offsets[rem % 3];
                rem /= 3;
                zero &= o == 0;
                let v = coords[k] + o;
                if v < 0 || v >= self.shape[k] as isize {
                    valid = false;
                    break;
                }
                index += v as usize * stride;
                stride *= self.shape[k];
            }
            if valid && !zero {
                out.push(index);
            }
        }
        out
    }

    /// Basin label per cell by discrete steepest descent to a grid sink; the
    /// sink is attributed to the nearest minimum within three cell diagonals.
    fn basins(&self, minima: &[Vec<f64>]) -> Vec<Option<usize>> {
        let n = self.values.len();
        let down: Vec<usize> = (0..n)
            .map(|c| {
                self.neighbours(c).into_iter().fold(c, |best, nb| {
                    if self.values[nb] < self.values[best] {
                        nb
                    } else {
                        best
                    }
                })
            })
            .collect();
        let diag = linalg::norm(&self.step);
        let mut label: Vec<Option<Option<usize>>> = vec![None; n];
        for start in 0..n {
            let mut trail = Vec::new();
            let mut c = start;
            let result = loop {
                if let Some(l) = label[c] {
                    break l;
                }
                if down[c] == c {
                    let x = self.center(c);
                    let l = minima
                        .iter()
                        .enumerate()
                        .map(|(j, m)| (j, linalg::distance(m, &x)))
                        .filter(|(_, dist)| *dist <= 3.0 * diag)
                        .min_by(|a, b| a.1.total_cmp(&b.1))
                        .map(|(j, _)| j);
                    label[c] = Some(l);
                    break l;
                }
                trail.push(c);
                c = down[c];
            };
            for t in trail {
                label[t] = Some(result);
            }
        }
        label.into_iter().map(|l| l.flatten()).collect()
    }

    /// Boltzmann mass per label and the total grid mass, both relative to the
    /// lowest grid value.
    fn masses<F: Fn(usize, &[f64]) -> Option<usize>>(
        &self,
        kt: f64,
        labels: usize,
        assign: F,
    ) -> (Vec<f64>, f64) {
        let v_min = self.values.iter().copied().fold(f64::INFINITY, f64::min);
        let cell: f64 = self.step.iter().product();
        let mut mass = vec![0.0; labels];
        let mut total = 0.0;
        for (c, v) in self.values.iter().enumerate() {
            let w = (-(v - v_min) / kt).exp() * cell;
            total += w;
            if let Some(j) = assign(c, &self.center(c)) {
                mass[j] += w;
            }
        }
        (mass, total)
    }
}
