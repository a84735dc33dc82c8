//! `rates` and `graph`.

use std::path::Path;

use rayon::prelude::*;

use landscape::rates::{
    build_graph, capture_mass, equilibrium_weights, log_kappa, tst_rate_arrhenius, two_state_relax,
    GraphOptions, KappaOptions, PairOutcome, WeightMethod,
};
use landscape::string_zero::{extract_saddle, StringPath};
use landscape::{Landscape, PotentialSpec};

use super::paths::{relax_string, write_path};
use super::{coordinate_names, epsilon_of, grid_seeds, string_dt};
use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::output::{point, read_csv, Run};

/// Points of each two-state relaxation curve, spanning five relaxation times.
const RELAXATION_POINTS: usize = 101;

/// Reads the position columns of a path CSV (as written by `string`).
pub fn read_path(path: &Path, dimension: usize) -> Result<StringPath, CliError> {
    let (header, rows) = read_csv(path)?;
    let names = coordinate_names(dimension);
    let index: Vec<usize> = names
        .iter()
        .map(|n| {
            header
                .iter()
                .position(|h| h == n)
                .ok_or_else(|| CliError::Config(format!("{} has no column `{n}`", path.display())))
        })
        .collect::<Result<_, _>>()?;
    let images = rows
        .iter()
        .map(|r| index.iter().map(|&k| r[k]).collect())
        .collect();
    Ok(StringPath::new(images, [true, true])?)
}

struct RateRow {
    kt: f64,
    epsilon: f64,
    log_kappa: f64,
    weights: [f64; 2],
    /// `ln k₁₂`, `ln k₂₁`, `ln λ`
    log_rates: [f64; 3],
    /// Harmonic TST from each end over the highest saddle, mass = friction.
    tst: [f64; 2],
    relaxation: Option<Vec<Vec<f64>>>,
}

fn rate_row<L: Landscape + ?Sized>(
    path: &StringPath,
    landscape: &L,
    saddle: &[f64],
    kt: f64,
    config: &ExperimentConfig,
) -> Result<RateRow, CliError> {
    let gamma = config.rates.friction;
    let epsilon = epsilon_of(kt, gamma);
    let options = KappaOptions {
        hermite_nodes: config.rates.hermite_nodes,
        ..KappaOptions::default()
    };
    let lk = log_kappa(path, landscape, kt, &options)?;
    let ends = [path.first().to_vec(), path.last().to_vec()];
    let w = equilibrium_weights(landscape, &ends, kt, &WeightMethod::Laplace)?;
    let log_12 = epsilon.ln() - lk - w[0].ln();
    let log_21 = epsilon.ln() - lk - w[1].ln();
    let log_lambda = epsilon.ln() - lk + (1.0 / w[0] + 1.0 / w[1]).ln();
    let tst = [
        tst_rate_arrhenius(landscape, &ends[0], saddle, gamma, kt)?,
        tst_rate_arrhenius(landscape, &ends[1], saddle, gamma, kt)?,
    ];
    let kappa = lk.exp();
    let relaxation = if kappa.is_finite() && log_lambda.exp() > 0.0 {
        let horizon = 5.0 / log_lambda.exp();
        let times: Vec<f64> = (0..RELAXATION_POINTS)
            .map(|k| horizon * k as f64 / (RELAXATION_POINTS - 1) as f64)
            .collect();
        let s = two_state_relax(w[0], w[1], epsilon, kappa, (1.0, 0.0), &times)?;
        Some(
            s.times
                .iter()
                .zip(s.n1.iter().zip(&s.n2))
                .map(|(t, (a, b))| vec![*t, *a, *b])
                .collect(),
        )
    } else {
        None
    };
    Ok(RateRow {
        kt,
        epsilon,
        log_kappa: lk,
        weights: [w[0], w[1]],
        log_rates: [log_12, log_21, log_lambda],
        tst,
        relaxation,
    })
}

/// κ, two-state rates and the harmonic TST comparison along a path (read
/// from `path_file` or relaxed from the configuration) at every `rates.kt`.
pub fn rates(
    config: &ExperimentConfig,
    spec: &PotentialSpec,
    path_file: Option<&Path>,
    run: &mut Run,
) -> Result<(), CliError> {
    let path = match path_file {
        Some(p) => read_path(p, spec.dimension)?,
        None => {
            let report = relax_string(config, spec)?;
            write_path(run, "path.csv", &report.path, spec)?;
            report.path
        }
    };
    let saddle = extract_saddle(&path, spec)?.location;
    let rows: Vec<RateRow> = config
        .rates
        .kt
        .par_iter()
        .map(|&kt| rate_row(&path, spec, &saddle, kt, config))
        .collect::<Result<_, _>>()?;

    let table = rows.iter().map(|r| {
        let [l12, l21, ll] = r.log_rates;
        vec![
            r.kt,
            r.epsilon,
            r.log_kappa,
            r.weights[0],
            r.weights[1],
            l12.exp(),
            l21.exp(),
            ll.exp(),
            l12,
            r.tst[0],
            r.tst[1],
            l12.exp() / r.tst[0],
        ]
    });
    run.csv_with(
        "rates.csv",
        &[
            ("kt", "energy"),
            ("epsilon", "energy*friction"),
            ("log_kappa", "1"),
            ("n1", "1"),
            ("n2", "1"),
            ("k12", "1/time"),
            ("k21", "1/time"),
            ("lambda", "1/time"),
            ("log_k12", "1"),
            ("k12_tst", "1/time"),
            ("k21_tst", "1/time"),
            ("k12_over_tst", "1"),
        ],
        table,
        &[(
            "tst_mass",
            format!("mass = friction = {}", config.rates.friction),
        )],
    )?;
    for (i, r) in rows.iter().enumerate() {
        if let Some(curve) = &r.relaxation {
            run.csv_with(
                &format!("kt_{i}/relaxation.csv"),
                &[("t", "time"), ("n1", "1"), ("n2", "1")],
                curve.iter().cloned(),
                &[("kt", r.kt.to_string())],
            )?;
        }
    }
    run.record("saddle", point(&saddle));
    run.record("temperatures", rows.len() as i64);
    Ok(())
}

/// Markov graph of the metastable sets reached from the seeds.
pub fn graph(
    config: &ExperimentConfig,
    spec: &PotentialSpec,
    run: &mut Run,
) -> Result<(), CliError> {
    let g = &config.graph;
    let seeds = match &g.seeds {
        Some(s) => s.clone(),
        None => grid_seeds(spec, g.seed_grid),
    };
    if let Some(bad) = seeds.iter().find(|s| s.len() != spec.dimension) {
        return Err(CliError::Config(format!(
            "`graph.seeds` entry {bad:?} does not have {} components",
            spec.dimension
        )));
    }
    let kt = g.kt.unwrap_or(config.rates.kt[0]);
    let options = GraphOptions {
        capture_radius: g.capture_radius,
        friction: config.rates.friction,
        images: config.string.images,
        string_dt: string_dt(config, spec),
        string_tol: config.string.tol,
        max_iter: config.string.max_iter,
        ..GraphOptions::default()
    };
    let graph = build_graph(spec, &seeds, kt, &options)?;
    let centers: Vec<Vec<f64>> = graph.nodes.iter().map(|n| n.minimum.clone()).collect();
    let captured = capture_mass(
        spec,
        &centers,
        g.capture_radius,
        kt,
        g.grid_resolution,
        &spec.sampling_box(),
    )?;

    let names = coordinate_names(spec.dimension);
    let mut columns: Vec<(&str, &str)> = vec![("node", "1")];
    columns.extend(names.iter().map(|n| (n.as_str(), "length")));
    columns.extend([("V", "energy"), ("weight", "1"), ("captured_mass", "1")]);
    let rows = graph
        .nodes
        .iter()
        .zip(&captured)
        .enumerate()
        .map(|(i, (n, c))| {
            let mut row = vec![i as f64];
            row.extend_from_slice(&n.minimum);
            row.extend([n.energy, n.weight, *c]);
            row
        });
    run.csv("nodes.csv", &columns, rows)?;

    let saddle_names: Vec<String> = names.iter().map(|n| format!("saddle_{n}")).collect();
    let mut columns: Vec<(&str, &str)> = vec![("from", "node"), ("to", "node")];
    columns.extend(saddle_names.iter().map(|n| (n.as_str(), "length")));
    columns.extend([
        ("barrier_forward", "energy"),
        ("barrier_backward", "energy"),
        ("log_kappa", "1"),
        ("rate_forward", "1/time"),
        ("rate_backward", "1/time"),
    ]);
    let rows = graph.edges.iter().map(|e| {
        let mut row = vec![e.from as f64, e.to as f64];
        row.extend_from_slice(&e.saddle);
        row.extend([
            e.barrier_forward,
            e.barrier_backward,
            e.log_kappa,
            e.rate_forward,
            e.rate_backward,
        ]);
        row
    });
    run.csv("edges.csv", &columns, rows)?;
    for e in &graph.edges {
        write_path(run, &format!("edge_{}_{}.csv", e.from, e.to), &e.mep, spec)?;
    }

    let total: f64 = captured.iter().sum();
    let mut t = toml::Table::new();
    t.insert("kt".into(), kt.into());
    t.insert("epsilon".into(), graph.epsilon.into());
    t.insert("capture_radius".into(), g.capture_radius.into());
    t.insert("nodes".into(), (graph.nodes.len() as i64).into());
    t.insert("edges".into(), (graph.edges.len() as i64).into());
    t.insert("captured_mass".into(), total.into());
    t.insert("lost_mass".into(), (1.0 - total).abs().into());
    let pairs = graph
        .pairs
        .iter()
        .map(|(i, j, outcome)| {
            let mut p = toml::Table::new();
            p.insert("from".into(), (*i as i64).into());
            p.insert("to".into(), (*j as i64).into());
            match outcome {
                PairOutcome::Linked => {
                    p.insert("outcome".into(), "linked".into());
                }
                PairOutcome::Rejected { via } => {
                    p.insert("outcome".into(), "rejected".into());
                    p.insert("via".into(), (*via as i64).into());
                }
                PairOutcome::Unresolved { reason } => {
                    p.insert("outcome".into(), "unresolved".into());
                    p.insert("reason".into(), reason.clone().into());
                }
            }
            toml::Value::Table(p)
        })
        .collect();
    t.insert("pair".into(), toml::Value::Array(pairs));
    run.report("report.toml", &t)?;
    run.record("nodes", graph.nodes.len() as i64);
    run.record("edges", graph.edges.len() as i64);
    run.record("lost_mass", (1.0 - total).abs());
    Ok(())
}
