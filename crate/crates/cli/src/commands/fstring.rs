//! `fstring`: finite-temperature string on the configured potential,
//! started from the zero-temperature string of the unperturbed landscape.

use nalgebra::DMatrix;

use landscape::dynamics::descend;
use landscape::string_finite::{
    evolve_ensemble, free_energy_profile, hyperplane_stats, self_consistency_residual,
    EnsembleOptions, StringEnsemble,
};
use landscape::string_zero::{MepReport, StringPath};
use landscape::{linalg, Landscape, PotentialSpec};

use super::paths::{relax_string, write_path};
use super::{coordinate_names, is_stiff, module_seed, DESCENT_TOL};
use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::output::Run;

/// A node passes the self-consistency test when its residual is within this
/// many standard errors.
pub const Z_LIMIT: f64 = 3.0;

pub struct FiniteTRun {
    /// Zero-temperature string of the unperturbed landscape.
    pub reference: MepReport,
    pub ensemble: StringEnsemble,
}

pub fn ensemble_options(config: &ExperimentConfig, spec: &PotentialSpec) -> EnsembleOptions {
    let f = &config.finite_t;
    let dt = f.dt.unwrap_or(if is_stiff(spec) { 1e-4 } else { 1e-3 });
    let mut o = EnsembleOptions::new(
        f.realizations,
        f.kt,
        dt,
        f.steps,
        f.burn_in.unwrap_or(f.steps / 5),
        module_seed(config, "string_finite"),
    );
    o.sampling_steps = f.sampling_steps.unwrap_or(f.steps);
    o.stride = f.stride;
    o.relaxation = f.relaxation;
    o
}

pub fn run_ensemble(
    config: &ExperimentConfig,
    spec: &PotentialSpec,
) -> Result<FiniteTRun, CliError> {
    let mut base_config = config.clone();
    base_config.string.images = config.finite_t.images.unwrap_or(config.string.images);
    let base = spec.base();
    let reference = relax_string(&base_config, base)?;
    let mut images = reference.path.images.clone();
    let last = images.len() - 1;
    // endpoints sit in the minima of the landscape actually sampled
    images[0] = descend(spec, &images[0], DESCENT_TOL)?;
    images[last] = descend(spec, &images[last], DESCENT_TOL)?;
    let init = StringPath::new(images, reference.path.endpoints_fixed)?;
    let ensemble = evolve_ensemble(spec, &init, &ensemble_options(config, spec))?;
    Ok(FiniteTRun {
        reference,
        ensemble,
    })
}

/// Unit principal axis of a covariance, oriented to the left of `tangent`
/// in two dimensions and with a non-negative leading component otherwise.
fn principal_axis(covariance: &[Vec<f64>], tangent: &[f64]) -> Vec<f64> {
    let d = covariance.len();
    let m = DMatrix::from_fn(d, d, |i, j| covariance[i][j]);
    let (_, vectors) = linalg::sorted_eigen(&m);
    let mut axis: Vec<f64> = vectors.column(d - 1).iter().copied().collect();
    let reference = if d == 2 {
        vec![-tangent[1], tangent[0]]
    } else {
        let mut e = vec![0.0; d];
        e[0] = 1.0;
        e
    };
    if linalg::dot(&axis, &reference) < 0.0 {
        axis.iter_mut().for_each(|a| *a = -*a);
    }
    axis
}

pub fn fstring(
    config: &ExperimentConfig,
    spec: &PotentialSpec,
    run: &mut Run,
) -> Result<(), CliError> {
    let FiniteTRun {
        reference,
        ensemble,
    } = run_ensemble(config, spec)?;
    let mean = &ensemble.mean;
    let d = mean.dimension();
    let alphas = mean.alphas();
    let names = coordinate_names(d);

    write_path(run, "reference_mep.csv", &reference.path, spec.base())?;

    let mut columns: Vec<(&str, &str)> = vec![("alpha", "1")];
    columns.extend(names.iter().map(|n| (n.as_str(), "length")));
    columns.push(("V", "energy"));
    let rows = alphas.iter().zip(&mean.images).map(|(a, x)| {
        let mut row = vec![*a];
        row.extend_from_slice(x);
        row.push(spec.value(x));
        row
    });
    run.csv("mean_string.csv", &columns, rows)?;

    let lower: Vec<String> = names.iter().map(|n| format!("lower_{n}")).collect();
    let upper: Vec<String> = names.iter().map(|n| format!("upper_{n}")).collect();
    let mut columns: Vec<(&str, &str)> = vec![("alpha", "1"), ("width", "length")];
    columns.extend(lower.iter().map(|n| (n.as_str(), "length")));
    columns.extend(upper.iter().map(|n| (n.as_str(), "length")));
    let mut rows = Vec::with_capacity(mean.len());
    let mut widths = Vec::with_capacity(mean.len());
    for (i, (alpha, phi)) in alphas.iter().zip(&mean.images).enumerate() {
        let stats = hyperplane_stats(&ensemble, i)?;
        let axis = principal_axis(&stats.covariance, &mean.tangent(i));
        let mut row = vec![*alpha, stats.width];
        row.extend(phi.iter().zip(&axis).map(|(p, a)| p - stats.width * a));
        row.extend(phi.iter().zip(&axis).map(|(p, a)| p + stats.width * a));
        rows.push(row);
        widths.push(stats.width);
    }
    run.csv("widths.csv", &columns, rows)?;

    let profile = free_energy_profile(&ensemble, spec)?;
    run.csv(
        "free_energy.csv",
        &[("alpha", "1"), ("F", "energy")],
        profile.iter().map(|(a, f)| vec![*a, *f]),
    )?;

    let residuals = self_consistency_residual(&ensemble, config.finite_t.min_effective_samples)?;
    run.csv(
        "residuals.csv",
        &[
            ("alpha", "1"),
            ("residual", "length"),
            ("stderr", "length"),
            ("effective_samples", "1"),
            ("z", "1"),
        ],
        residuals.iter().map(|r| {
            vec![
                r.alpha,
                r.residual,
                r.stderr,
                r.effective_samples,
                r.z_score(),
            ]
        }),
    )?;

    // endpoints are pinned minima; the consistency test concerns the interior
    let interior = &residuals[1..residuals.len() - 1];
    let passing = interior.iter().filter(|r| r.z_score() <= Z_LIMIT).count();
    let fraction = passing as f64 / interior.len().max(1) as f64;
    let max_z = interior.iter().map(|r| r.z_score()).fold(0.0, f64::max);
    let f_max = profile
        .iter()
        .map(|p| p.1)
        .fold(f64::NEG_INFINITY, f64::max);
    let separation: Vec<f64> = mean
        .images
        .iter()
        .zip(&widths)
        .map(|(x, w)| linalg::point_polyline_distance(x, &reference.path.images) / w)
        .collect();
    let max_separation = separation.iter().copied().fold(0.0, f64::max);

    let mut t = toml::Table::new();
    t.insert("potential".into(), spec.name().into());
    t.insert("kt".into(), ensemble.kt.into());
    t.insert(
        "realizations".into(),
        (ensemble.realizations.len() as i64).into(),
    );
    t.insert("images".into(), (mean.len() as i64).into());
    t.insert(
        "reverted_steps".into(),
        (ensemble.reverted_steps as i64).into(),
    );
    t.insert("z_limit".into(), Z_LIMIT.into());
    t.insert("interior_nodes".into(), (interior.len() as i64).into());
    t.insert(
        "interior_nodes_within_limit".into(),
        (passing as i64).into(),
    );
    t.insert("fraction_within_limit".into(), fraction.into());
    t.insert("max_z".into(), max_z.into());
    t.insert("free_energy_barrier".into(), f_max.into());
    t.insert("reference_barrier".into(), reference.barrier_forward.into());
    t.insert(
        "max_distance_to_reference_over_width".into(),
        max_separation.into(),
    );
    run.report("report.toml", &t)?;
    run.record("fraction_within_limit", fraction);
    run.record("max_distance_to_reference_over_width", max_separation);
    Ok(())
}
