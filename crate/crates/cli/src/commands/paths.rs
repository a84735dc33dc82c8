//! `string`, `neb` and `mep2`.

use landscape::string_zero::{
    converge_string, init_string, mep_type2, momentum_sign_changes, neb_relax, MepReport,
    SaddlePoint, StringPath,
};
use landscape::{linalg, Landscape, PotentialSpec};

use super::{coordinate_names, endpoints, string_dt};
use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::output::{point, Run};

/// Relaxes the configured string on `spec`.
pub fn relax_string(
    config: &ExperimentConfig,
    spec: &PotentialSpec,
) -> Result<MepReport, CliError> {
    let (a, b) = endpoints(config, spec)?;
    let s = &config.string;
    let init = init_string(&a, &b, s.images)?;
    Ok(converge_string(
        &init,
        spec,
        string_dt(config, spec),
        s.tol,
        s.max_iter,
    )?)
}

/// Norm of the gradient component normal to the path at each image.
pub fn image_residuals<L: Landscape + ?Sized>(path: &StringPath, landscape: &L) -> Vec<f64> {
    (0..path.len())
        .map(|i| {
            let mut g = landscape.gradient(&path.images[i]);
            linalg::reject(&mut g, &path.tangent(i));
            linalg::norm(&g)
        })
        .collect()
}

/// `(α, x..., V, residual)` rows of a path.
pub fn write_path<L: Landscape + ?Sized>(
    run: &mut Run,
    name: &str,
    path: &StringPath,
    landscape: &L,
) -> Result<(), CliError> {
    let names = coordinate_names(path.dimension());
    let mut columns: Vec<(&str, &str)> = vec![("alpha", "1")];
    columns.extend(names.iter().map(|n| (n.as_str(), "length")));
    columns.push(("V", "energy"));
    columns.push(("residual", "force"));
    let residuals = image_residuals(path, landscape);
    let rows = path
        .alphas()
        .into_iter()
        .zip(&path.images)
        .zip(residuals)
        .map(|((alpha, x), r)| {
            let mut row = vec![alpha];
            row.extend_from_slice(x);
            row.push(landscape.value(x));
            row.push(r);
            row
        });
    run.csv(name, &columns, rows)
}

fn saddle_table(s: &SaddlePoint) -> toml::Value {
    let mut t = toml::Table::new();
    t.insert("location".into(), point(&s.location));
    t.insert("value".into(), s.value.into());
    t.insert("barrier_forward".into(), s.barrier_forward.into());
    t.insert("barrier_backward".into(), s.barrier_backward.into());
    t.insert("eigenvalues".into(), point(&s.eigenvalues));
    t.insert("image".into(), (s.image as i64).into());
    toml::Value::Table(t)
}

pub fn mep_report_table(report: &MepReport, tol: f64, method: &str) -> toml::Table {
    let mut t = toml::Table::new();
    t.insert("method".into(), method.into());
    t.insert("images".into(), (report.path.len() as i64).into());
    t.insert("iterations".into(), (report.iterations as i64).into());
    t.insert("residual".into(), report.residual.into());
    t.insert("tol".into(), tol.into());
    t.insert("converged".into(), (report.residual <= tol).into());
    t.insert("start".into(), point(report.path.first()));
    t.insert("end".into(), point(report.path.last()));
    t.insert("saddle".into(), point(&report.saddle));
    t.insert("barrier_forward".into(), report.barrier_forward.into());
    t.insert("barrier_backward".into(), report.barrier_backward.into());
    t.insert(
        "saddles".into(),
        toml::Value::Array(report.saddles.iter().map(saddle_table).collect()),
    );
    t
}

fn finish_mep(
    run: &mut Run,
    report: &MepReport,
    landscape: &PotentialSpec,
    tol: f64,
    method: &str,
) -> Result<(), CliError> {
    write_path(run, "path.csv", &report.path, landscape)?;
    run.report("report.toml", &mep_report_table(report, tol, method))?;
    run.record("residual", report.residual);
    run.record("barrier_forward", report.barrier_forward);
    run.record("saddles", report.saddles.len() as i64);
    Ok(())
}

pub fn string(
    config: &ExperimentConfig,
    spec: &PotentialSpec,
    run: &mut Run,
) -> Result<(), CliError> {
    let report = relax_string(config, spec)?;
    finish_mep(run, &report, spec, config.string.tol, "string")
}

pub fn neb(config: &ExperimentConfig, spec: &PotentialSpec, run: &mut Run) -> Result<(), CliError> {
    let (a, b) = endpoints(config, spec)?;
    let s = &config.string;
    let init = init_string(&a, &b, s.images)?;
    let report = neb_relax(
        &init,
        spec,
        s.k_spring,
        string_dt(config, spec),
        s.tol,
        s.max_iter,
    )?;
    finish_mep(run, &report, spec, s.tol, "nudged_elastic_band")
}

/// Phase-space path of the inertial dynamics between the string endpoints
/// through the saddle of the zero-temperature string.
pub fn mep2_path(
    config: &ExperimentConfig,
    spec: &PotentialSpec,
) -> Result<(landscape::string_zero::Type2Mep, MepReport), CliError> {
    if spec.dimension != 1 {
        return Err(CliError::Config(format!(
            "`mep2` needs a one-dimensional potential, {} has dimension {}",
            spec.name(),
            spec.dimension
        )));
    }
    let report = relax_string(config, spec)?;
    let saddle = report
        .saddles
        .first()
        .ok_or(landscape::Error::SaddleVerification(
            "the string between the endpoints has no saddle".into(),
        ))?;
    let mep = mep_type2(
        spec,
        config.dynamics.mass,
        config.dynamics.gamma,
        report.path.first(),
        report.path.last(),
        &saddle.location,
    )?;
    Ok((mep, report))
}

pub fn write_mep2(run: &mut Run, mep: &landscape::string_zero::Type2Mep) -> Result<(), CliError> {
    let rows = mep
        .positions
        .iter()
        .zip(&mep.momenta)
        .map(|(q, p)| vec![*q, *p]);
    run.csv("mep.csv", &[("q", "length"), ("p", "momentum")], rows)?;
    let flips = momentum_sign_changes(&mep.momenta);
    let mut t = toml::Table::new();
    t.insert("mass".into(), mep.mass.into());
    t.insert("points".into(), (mep.positions.len() as i64).into());
    t.insert("saddle_index".into(), (mep.saddle_index as i64).into());
    t.insert("saddle".into(), mep.positions[mep.saddle_index].into());
    t.insert(
        "momentum_sign_changes".into(),
        toml::Value::Array(flips.iter().map(|i| (*i as i64).into()).collect()),
    );
    run.report("mep_report.toml", &t)?;
    run.record("momentum_sign_changes", flips.len() as i64);
    Ok(())
}

pub fn mep2(
    config: &ExperimentConfig,
    spec: &PotentialSpec,
    run: &mut Run,
) -> Result<(), CliError> {
    let (mep, _) = mep2_path(config, spec)?;
    write_mep2(run, &mep)
}
