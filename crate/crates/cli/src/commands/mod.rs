//! Subcommand implementations. Each takes the resolved configuration and a
//! run directory and leaves its artifacts there.

pub mod fstring;
pub mod paths;
pub mod rates;
pub mod reproduce;
pub mod simulate;

use landscape::dynamics::{deduplicate, descend};
use landscape::potentials::PotentialKind;
use landscape::{linalg, seeding, Landscape, PotentialSpec};

use crate::config::ExperimentConfig;
use crate::error::CliError;

/// Descent tolerance for every minimum the CLI locates.
pub const DESCENT_TOL: f64 = 1e-12;

/// Seeds for minimum search: a cell-centred grid of `per_axis` points per
/// dimension over the sampling box.
pub fn grid_seeds(spec: &PotentialSpec, per_axis: usize) -> Vec<Vec<f64>> {
    let bounds = spec.sampling_box();
    let per_axis = per_axis.max(1);
    let total = per_axis.pow(bounds.len() as u32);
    (0..total)
        .map(|mut flat| {
            bounds
                .iter()
                .map(|(lo, hi)| {
                    let k = flat % per_axis;
                    flat /= per_axis;
                    lo + (k as f64 + 0.5) * (hi - lo) / per_axis as f64
                })
                .collect()
        })
        .collect()
}

/// Local minima reachable by descent from a grid of seeds, deepest first.
pub fn find_minima<L: Landscape + ?Sized>(landscape: &L, seeds: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let found = seeds
        .iter()
        .filter_map(|s| descend(landscape, s, DESCENT_TOL).ok())
        .collect();
    let mut minima = deduplicate(found, 1e-3);
    minima.sort_by(|a, b| landscape.value(a).total_cmp(&landscape.value(b)));
    minima
}

/// The two deepest minima of the unperturbed landscape ordered by first
/// coordinate; on a perturbed landscape each is replaced by the minimum its
/// descent reaches.
pub fn default_endpoints(spec: &PotentialSpec) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let base = spec.base();
    let minima = find_minima(base, &grid_seeds(base, 8));
    if minima.len() < 2 {
        return Err(CliError::Config(format!(
            "{} has fewer than two minima; give string.start and string.end",
            spec.name()
        )));
    }
    let mut pair = [minima[0].clone(), minima[1].clone()];
    pair.sort_by(|a, b| a[0].total_cmp(&b[0]));
    let [a, b] = pair;
    if matches!(spec.kind, PotentialKind::Perturbed { .. }) {
        Ok((
            descend(spec, &a, DESCENT_TOL)?,
            descend(spec, &b, DESCENT_TOL)?,
        ))
    } else {
        Ok((a, b))
    }
}

/// String endpoints: minima reached from the configured starts, or the
/// default pair.
pub fn endpoints(
    config: &ExperimentConfig,
    spec: &PotentialSpec,
) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    match (&config.string.start, &config.string.end) {
        (Some(a), Some(b)) => {
            for (name, x) in [("string.start", a), ("string.end", b)] {
                if x.len() != spec.dimension {
                    return Err(CliError::Config(format!(
                        "`{name}` has {} components, the potential has {}",
                        x.len(),
                        spec.dimension
                    )));
                }
            }
            let a = descend(spec, a, DESCENT_TOL)?;
            let b = descend(spec, b, DESCENT_TOL)?;
            if linalg::distance(&a, &b) < 1e-6 {
                return Err(CliError::Config(
                    "`string.start` and `string.end` descend to the same minimum".into(),
                ));
            }
            Ok((a, b))
        }
        (None, None) => default_endpoints(spec),
        _ => Err(CliError::Config(
            "give both `string.start` and `string.end` or neither".into(),
        )),
    }
}

/// Stiff landscapes (Mueller family) need steps two orders of magnitude
/// shorter than the unit-curvature double wells.
pub fn is_stiff(spec: &PotentialSpec) -> bool {
    matches!(spec.base().kind, PotentialKind::Mueller)
}

pub fn string_dt(config: &ExperimentConfig, spec: &PotentialSpec) -> f64 {
    config
        .string
        .dt
        .unwrap_or(if is_stiff(spec) { 1e-4 } else { 1e-2 })
}

pub fn dynamics_dt(config: &ExperimentConfig, spec: &PotentialSpec) -> f64 {
    config
        .dynamics
        .dt
        .unwrap_or(if is_stiff(spec) { 1e-5 } else { 1e-3 })
}

/// Per-module seed derived from the master seed.
pub fn module_seed(config: &ExperimentConfig, module: &str) -> u64 {
    seeding::derive(config.seed, module)
}

/// Noise strength from temperature and friction.
pub fn epsilon_of(kt: f64, gamma: f64) -> f64 {
    2.0 * gamma * kt
}

/// Position column names: `x`, `x, y`, or `x1..xd`.
pub fn coordinate_names(dimension: usize) -> Vec<String> {
    match dimension {
        1 => vec!["x".into()],
        2 => vec!["x".into(), "y".into()],
        d => (1..=d).map(|k| format!("x{k}")).collect(),
    }
}

/// Momentum column names: `p`, or `p` prefixed to the position names.
pub fn momentum_names(dimension: usize) -> Vec<String> {
    match dimension {
        1 => vec!["p".into()],
        d => coordinate_names(d)
            .iter()
            .map(|c| format!("p{c}"))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_seeds_cover_the_box() {
        let m = PotentialSpec::mueller();
        let seeds = grid_seeds(&m, 4);
        assert_eq!(seeds.len(), 16);
        let b = m.sampling_box();
        for s in &seeds {
            for (x, (lo, hi)) in s.iter().zip(&b) {
                assert!(x > lo && x < hi);
            }
        }
    }

    #[test]
    fn default_endpoints_are_the_deep_minima() {
        let (a, b) = default_endpoints(&PotentialSpec::mueller()).unwrap();
        assert!(linalg::distance(&a, &[-0.558, 1.442]) < 1e-2, "{a:?}");
        assert!(linalg::distance(&b, &[0.623, 0.028]) < 1e-2, "{b:?}");
        let (a, b) = default_endpoints(&PotentialSpec::double_well_1d()).unwrap();
        assert!((a[0] + 1.0).abs() < 1e-9 && (b[0] - 1.0).abs() < 1e-9);
    }
}
