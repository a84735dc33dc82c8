//! `potential grid`, `simulate` and `transitions`.

use rayon::prelude::*;

use landscape::dynamics::{
    empirical_rate, Basin, InertialIntegrator, OverdampedIntegrator, TransitionDetector,
    TransitionRecord, MIN_DWELLS,
};
use landscape::{seeding, Landscape, PotentialSpec};

use super::{coordinate_names, default_endpoints, dynamics_dt, module_seed, momentum_names};
use crate::config::{ExperimentConfig, FlowChoice};
use crate::error::CliError;
use crate::output::Run;

/// Bins of the dwell-time histogram.
const HISTOGRAM_BINS: usize = 20;

pub fn potential_grid(
    spec: &PotentialSpec,
    resolution: usize,
    run: &mut Run,
) -> Result<(), CliError> {
    if resolution < 2 {
        return Err(CliError::Config("`--resolution` must be at least 2".into()));
    }
    let bounds = spec.sampling_box();
    let axis = |(lo, hi): (f64, f64), k: usize| lo + (hi - lo) * k as f64 / (resolution - 1) as f64;
    let rows: Vec<Vec<f64>> = match bounds.len() {
        1 => (0..resolution)
            .map(|i| {
                let x = axis(bounds[0], i);
                vec![x, spec.value(&[x])]
            })
            .collect(),
        _ => (0..resolution)
            .flat_map(|i| (0..resolution).map(move |j| (i, j)))
            .map(|(i, j)| {
                let p = [axis(bounds[0], i), axis(bounds[1], j)];
                vec![p[0], p[1], spec.value(&p)]
            })
            .collect(),
    };
    let names = coordinate_names(spec.dimension);
    let mut columns: Vec<(&str, &str)> = names.iter().map(|n| (n.as_str(), "length")).collect();
    columns.push(("V", "energy"));
    run.csv("grid.csv", &columns, rows)?;
    run.record("potential", spec.name());
    run.record("resolution", resolution as i64);
    Ok(())
}

/// Capture balls around the default endpoints, if the landscape has two
/// minima.
fn default_basins(spec: &PotentialSpec, radius: f64) -> Result<Vec<Basin>, CliError> {
    let (a, b) = default_endpoints(spec)?;
    Ok(vec![Basin::new(a, radius), Basin::new(b, radius)])
}

fn initial_state(
    config: &ExperimentConfig,
    spec: &PotentialSpec,
) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let d = spec.dimension;
    let x0 = match &config.dynamics.x0 {
        Some(x) => x.clone(),
        None => default_endpoints(spec)?.0,
    };
    let p0 = config.dynamics.p0.clone().unwrap_or_else(|| vec![0.0; d]);
    for (name, v) in [("dynamics.x0", &x0), ("dynamics.p0", &p0)] {
        if v.len() != d {
            return Err(CliError::Config(format!(
                "`{name}` has {} components, the potential has {d}",
                v.len()
            )));
        }
    }
    Ok((x0, p0))
}

/// One chain, observed by a transition detector every step; `sink` receives
/// `(t, x, p)` every `every` steps, starting with the initial state.
fn run_chain(
    config: &ExperimentConfig,
    spec: &PotentialSpec,
    basins: &[Basin],
    seed: u64,
    stream: u64,
    every: usize,
    mut sink: impl FnMut(f64, &[f64], Option<&[f64]>),
) -> Result<TransitionRecord, CliError> {
    let dyn_cfg = &config.dynamics;
    let dt = dynamics_dt(config, spec);
    let (x0, p0) = initial_state(config, spec)?;
    let rng = seeding::rng(seed, stream);
    let mut detector = TransitionDetector::new(basins.to_vec())?;
    detector.observe(0.0, &x0);
    let end_time = match dyn_cfg.kind {
        FlowChoice::Overdamped => {
            let mut it =
                OverdampedIntegrator::new(spec, &x0, dyn_cfg.epsilon, dyn_cfg.gamma, dt, rng)?;
            sink(0.0, &x0, None);
            for k in 1..=dyn_cfg.steps {
                it.step()?;
                detector.observe(it.time(), it.state());
                if k % every == 0 {
                    sink(it.time(), it.state(), None);
                }
            }
            it.time()
        }
        FlowChoice::Inertial => {
            let mut it = InertialIntegrator::new(
                spec,
                &x0,
                &p0,
                dyn_cfg.mass,
                dyn_cfg.gamma,
                dyn_cfg.epsilon,
                dt,
                rng,
            )?;
            sink(0.0, &x0, Some(&p0));
            for k in 1..=dyn_cfg.steps {
                it.step()?;
                detector.observe(it.time(), it.position());
                if k % every == 0 {
                    sink(it.time(), it.position(), Some(it.momentum()));
                }
            }
            it.time()
        }
    };
    Ok(detector.finish(end_time))
}

fn event_rows(record: &TransitionRecord, chain: Option<usize>) -> Vec<Vec<f64>> {
    record
        .events
        .iter()
        .map(|e| {
            let mut row = chain.map(|c| vec![c as f64]).unwrap_or_default();
            row.extend([e.time, e.from as f64, e.to as f64]);
            row
        })
        .collect()
}

/// Writes `trajectory.csv` (`t, x... [, p...]`) and `events.csv`; the
/// transition count between the two default capture balls goes into the
/// manifest.
pub fn simulate(
    config: &ExperimentConfig,
    spec: &PotentialSpec,
    run: &mut Run,
) -> Result<(), CliError> {
    let d = spec.dimension;
    let basins = default_basins(spec, config.dynamics.capture_radius)?;
    let inertial = config.dynamics.kind == FlowChoice::Inertial;
    let mut rows = Vec::with_capacity(config.dynamics.steps / config.dynamics.output_every + 1);
    let record = run_chain(
        config,
        spec,
        &basins,
        module_seed(config, "dynamics"),
        0,
        config.dynamics.output_every,
        |t, x, p| {
            let mut row = Vec::with_capacity(1 + 2 * d);
            row.push(t);
            row.extend_from_slice(x);
            if let Some(p) = p {
                row.extend_from_slice(p);
            }
            rows.push(row);
        },
    )?;
    let positions = coordinate_names(d);
    let momenta = momentum_names(d);
    let mut columns: Vec<(&str, &str)> = vec![("t", "time")];
    columns.extend(positions.iter().map(|n| (n.as_str(), "length")));
    if inertial {
        columns.extend(momenta.iter().map(|n| (n.as_str(), "momentum")));
    }
    let kt = config.dynamics.epsilon / (2.0 * config.dynamics.gamma);
    run.csv_with(
        "trajectory.csv",
        &columns,
        rows,
        &[("temperature", format!("k_BT = epsilon / 2 gamma = {kt}"))],
    )?;
    run.csv(
        "events.csv",
        &[("t", "time"), ("from", "basin"), ("to", "basin")],
        event_rows(&record, None),
    )?;
    run.record("transitions", record.events.len() as i64);
    run.record("kt", kt);
    run.record("total_time", record.total_time);
    Ok(())
}

/// Independent chains (`dynamics.chains`, stream `k` for chain `k`) between
/// the default capture balls: `events.csv`, `dwell_histogram.csv` and a rate
/// report.
pub fn transitions(
    config: &ExperimentConfig,
    spec: &PotentialSpec,
    run: &mut Run,
) -> Result<(), CliError> {
    if config.dynamics.chains == 0 {
        return Err(CliError::Config(
            "`dynamics.chains` must be at least 1".into(),
        ));
    }
    let basins = default_basins(spec, config.dynamics.capture_radius)?;
    let seed = module_seed(config, "dynamics");
    let records: Vec<TransitionRecord> = (0..config.dynamics.chains)
        .into_par_iter()
        .map(|c| {
            run_chain(
                config,
                spec,
                &basins,
                seed,
                c as u64,
                usize::MAX,
                |_, _, _| {},
            )
        })
        .collect::<Result<_, _>>()?;
    let events: Vec<Vec<f64>> = records
        .iter()
        .enumerate()
        .flat_map(|(c, r)| event_rows(r, Some(c)))
        .collect();
    run.csv(
        "events.csv",
        &[
            ("chain", "1"),
            ("t", "time"),
            ("from", "basin"),
            ("to", "basin"),
        ],
        events,
    )?;
    let merged = records
        .into_iter()
        .reduce(TransitionRecord::merge)
        .expect("at least one chain");

    let longest = merged
        .dwell_times
        .iter()
        .flatten()
        .fold(0.0f64, |m, t| m.max(*t));
    let width = if longest > 0.0 {
        longest / HISTOGRAM_BINS as f64
    } else {
        1.0
    };
    let mut hist = Vec::new();
    for (b, dwells) in merged.dwell_times.iter().enumerate() {
        let mut counts = [0usize; HISTOGRAM_BINS];
        for t in dwells {
            counts[((t / width) as usize).min(HISTOGRAM_BINS - 1)] += 1;
        }
        for (k, c) in counts.iter().enumerate() {
            hist.push(vec![
                b as f64,
                k as f64 * width,
                (k + 1) as f64 * width,
                *c as f64,
            ]);
        }
    }
    run.csv(
        "dwell_histogram.csv",
        &[
            ("basin", "1"),
            ("lower", "time"),
            ("upper", "time"),
            ("count", "1"),
        ],
        hist,
    )?;

    let kt = config.dynamics.epsilon / (2.0 * config.dynamics.gamma);
    let mut report = toml::Table::new();
    report.insert("kt".into(), kt.into());
    report.insert("epsilon".into(), config.dynamics.epsilon.into());
    report.insert("chains".into(), (config.dynamics.chains as i64).into());
    report.insert("total_time".into(), merged.total_time.into());
    report.insert("transitions".into(), (merged.events.len() as i64).into());
    let mut per_basin = Vec::new();
    for (b, basin) in basins.iter().enumerate() {
        let mut t = toml::Table::new();
        t.insert("center".into(), crate::output::point(&basin.center));
        t.insert("exits".into(), (merged.dwell_times[b].len() as i64).into());
        t.insert("committed_time".into(), merged.committed_time(b).into());
        match empirical_rate(&merged, b) {
            Ok(r) => {
                t.insert("rate".into(), r.rate.into());
                t.insert("rate_stderr".into(), r.stderr.into());
            }
            Err(landscape::Error::InsufficientStatistics { .. }) => {
                log::warn!("basin {b}: fewer than {MIN_DWELLS} exits, no rate estimate");
            }
            Err(e) => return Err(e.into()),
        }
        per_basin.push(toml::Value::Table(t));
    }
    report.insert("basin".into(), toml::Value::Array(per_basin));
    run.report("report.toml", &report)?;
    run.record("transitions", merged.events.len() as i64);
    Ok(())
}
