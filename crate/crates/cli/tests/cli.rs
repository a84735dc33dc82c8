use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn landscape(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_landscape"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("LANDSCAPE_OUT")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], out: &Path) {
    let o = landscape(args, out);
    assert!(
        o.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&o.stderr)
    );
}

fn table(path: &Path) -> toml::Table {
    fs::read_to_string(path).unwrap().parse().unwrap()
}

/// Numeric rows of a CSV with `#` comment headers.
fn rows(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .unwrap();
    let header = reader
        .headers()
        .unwrap()
        .iter()
        .map(str::to_string)
        .collect();
    let rows = reader
        .records()
        .map(|r| r.unwrap().iter().map(|f| f.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn simulate_with_the_same_seed_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let args = [
        "simulate",
        "--seed",
        "7",
        "--steps",
        "20000",
        "--epsilon",
        "0.3",
    ];
    ok(&args, &tmp.path().join("a"));
    ok(&args, &tmp.path().join("b"));
    for name in ["trajectory.csv", "events.csv"] {
        let a = fs::read(tmp.path().join("a/simulate").join(name)).unwrap();
        let b = fs::read(tmp.path().join("b/simulate").join(name)).unwrap();
        assert_eq!(a, b, "{name}");
    }
    ok(
        &[
            "simulate",
            "--seed",
            "8",
            "--steps",
            "20000",
            "--epsilon",
            "0.3",
        ],
        &tmp.path().join("c"),
    );
    assert_ne!(
        fs::read(tmp.path().join("a/simulate/trajectory.csv")).unwrap(),
        fs::read(tmp.path().join("c/simulate/trajectory.csv")).unwrap()
    );
}

#[test]
fn unknown_configuration_key_is_rejected_by_name() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("bad.toml");
    fs::write(&config, "[dynamics]\nepsilno = 0.1\n").unwrap();
    let o = landscape(
        &["--config", config.to_str().unwrap(), "simulate"],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("epsilno"));
    let o = landscape(&["--set", "string.imagez=3", "string"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("imagez"));
}

#[test]
fn string_on_mueller_reports_a_converged_path() {
    let tmp = tempfile::tempdir().unwrap();
    ok(
        &[
            "--set",
            "potential.kind=\"mueller\"",
            "--set",
            "string.images=30",
            "string",
        ],
        tmp.path(),
    );
    let report = table(&tmp.path().join("string/report.toml"));
    let residual = report["residual"].as_float().unwrap();
    assert!(residual <= report["tol"].as_float().unwrap());
    assert_eq!(report["saddle"].as_array().unwrap().len(), 2);
    let (header, path) = rows(&tmp.path().join("string/path.csv"));
    assert_eq!(header, ["alpha", "x", "y", "V", "residual"]);
    assert_eq!(path.len(), 30);
    assert_eq!(path[0][0], 0.0);
    assert_eq!(path[29][0], 1.0);
}

#[test]
fn failures_map_to_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let o = landscape(
        &[
            "--set",
            "potential.kind=\"mueller\"",
            "--set",
            "string.max_iter=5",
            "string",
        ],
        tmp.path(),
    );
    assert_eq!(
        o.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let o = landscape(
        &[
            "--set",
            "finite_t.realizations=2",
            "--set",
            "finite_t.steps=100",
            "--set",
            "finite_t.min_effective_samples=1e9",
            "--set",
            "potential.kind=\"double_well_2d\"",
            "fstring",
        ],
        tmp.path(),
    );
    assert_eq!(
        o.status.code(),
        Some(4),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let o = landscape(&["--set", "dynamics.epsilon=-1", "simulate"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn rates_reads_a_written_path() {
    let tmp = tempfile::tempdir().unwrap();
    ok(
        &["--set", "rates.kt=[0.05, 0.1]", "rates"],
        &tmp.path().join("a"),
    );
    let written = tmp.path().join("a/rates/path.csv");
    ok(
        &[
            "--set",
            "rates.kt=[0.05, 0.1]",
            "rates",
            "--path",
            written.to_str().unwrap(),
        ],
        &tmp.path().join("b"),
    );
    let (header, computed) = rows(&tmp.path().join("a/rates/rates.csv"));
    let (_, read) = rows(&tmp.path().join("b/rates/rates.csv"));
    assert_eq!(computed.len(), 2);
    let k12 = header.iter().position(|h| h == "k12").unwrap();
    for (c, r) in computed.iter().zip(&read) {
        assert!((c[k12] / r[k12] - 1.0).abs() < 1e-12);
    }
    // slower at the lower temperature
    assert!(computed[0][k12] < computed[1][k12]);
}

#[test]
fn fig1_bundle_shows_repeated_transitions() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&["reproduce", "fig1"], tmp.path());
    let manifest = table(&tmp.path().join("fig1/manifest.toml"));
    assert!(manifest["summary"]["transitions"].as_integer().unwrap() >= 6);
    let (header, trajectory) = rows(&tmp.path().join("fig1/trajectory.csv"));
    assert_eq!(header, ["t", "x"]);
    assert!(trajectory.iter().any(|r| r[1] > 0.8) && trajectory.iter().any(|r| r[1] < -0.8));
}

#[test]
fn fig3_bundle_has_the_cusp_at_the_saddle() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&["reproduce", "fig3"], tmp.path());
    let report = table(&tmp.path().join("fig3/mep_report.toml"));
    let saddle = report["saddle_index"].as_integer().unwrap() as usize;
    let (_, mep) = rows(&tmp.path().join("fig3/mep.csv"));
    let energy = |q: f64| (q * q - 1.0).powi(2);
    let top = (0..mep.len())
        .max_by(|&a, &b| energy(mep[a][0]).total_cmp(&energy(mep[b][0])))
        .unwrap();
    assert_eq!(top, saddle);
    assert_eq!(mep[saddle][1], 0.0);
    // uphill is the reversed relaxation: p approaches 0 from above on both sides
    for row in &mep[saddle - 50..saddle + 50] {
        assert!(row[1] >= 0.0);
    }
    let (_, path) = rows(&tmp.path().join("fig3/sde_path.csv"));
    assert!(path.len() > 10);
    assert!((path[0][0] + 1.0).hypot(path[0][1]) <= 0.2 + 1e-12);
    let last = path.last().unwrap();
    assert!((last[0] - 1.0).hypot(last[1]) <= 0.2 + 1e-12);
}

#[test]
fn fig4_bundle_brackets_the_mean_string() {
    let tmp = tempfile::tempdir().unwrap();
    let mut args = vec!["reproduce", "fig4"];
    for s in [
        "finite_t.realizations=4",
        "finite_t.steps=400",
        "finite_t.burn_in=100",
        "finite_t.sampling_steps=400",
    ] {
        args.extend(["--set", s]);
    }
    ok(&args, tmp.path());
    let (_, mean) = rows(&tmp.path().join("fig4/mean_string.csv"));
    let (header, widths) = rows(&tmp.path().join("fig4/widths.csv"));
    assert_eq!(
        header,
        ["alpha", "width", "lower_x", "lower_y", "upper_x", "upper_y"]
    );
    assert_eq!(mean.len(), widths.len());
    for (m, w) in mean.iter().zip(&widths) {
        assert!(w[1] > 0.0);
        for k in 0..2 {
            let (lo, hi) = (w[2 + k], w[4 + k]);
            assert!(m[1 + k] >= lo.min(hi) - 1e-12 && m[1 + k] <= lo.max(hi) + 1e-12);
        }
    }
    let report = table(&tmp.path().join("fig4/report.toml"));
    assert!(report["free_energy_barrier"]
        .as_float()
        .unwrap()
        .is_finite());
}
