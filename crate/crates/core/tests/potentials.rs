use landscape::potentials::make_perturbed;
use landscape::{Landscape, PotentialSpec};
use proptest::prelude::*;

fn landscapes() -> Vec<PotentialSpec> {
    let mueller = PotentialSpec::mueller();
    let dw2 = PotentialSpec::double_well_2d();
    vec![
        PotentialSpec::double_well_1d(),
        dw2.clone(),
        PotentialSpec::double_well_2d_with(2.5).unwrap(),
        mueller.clone(),
        make_perturbed(&mueller, 3, 5.0, 50, 0.1).unwrap(),
        make_perturbed(&dw2, 4, 0.05, 20, 0.2).unwrap(),
    ]
}

fn point_in_box(spec: &PotentialSpec, u: &[f64]) -> Vec<f64> {
    spec.sampling_box()
        .iter()
        .zip(u)
        .map(|(&(lo, hi), t)| lo + t * (hi - lo))
        .collect()
}

fn central_difference(spec: &PotentialSpec, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|k| {
            let mut a = x.to_vec();
            let mut b = x.to_vec();
            a[k] += h;
            b[k] -= h;
            (spec.value(&a) - spec.value(&b)) / (2.0 * h)
        })
        .collect()
}

proptest! {
    #[test]
    fn gradient_matches_central_difference(u in prop::collection::vec(0.0f64..1.0, 2)) {
        for spec in landscapes() {
            let x = point_in_box(&spec, &u);
            let g = spec.grad(&x).unwrap();
            let fd = central_difference(&spec, &x, 1e-5);
            let scale = g.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            for (a, b) in g.iter().zip(&fd) {
                prop_assert!((a - b).abs() <= 1e-6 * scale, "{}: {g:?} vs {fd:?}", spec.name());
            }
        }
    }

    #[test]
    fn hessian_matches_gradient_differences(u in prop::collection::vec(0.0f64..1.0, 2)) {
        for spec in landscapes() {
            let x = point_in_box(&spec, &u);
            let h = spec.hessian(&x).unwrap();
            prop_assert!(h.asymmetry() == 0.0);
            let scale = h.matrix.amax().max(1.0);
            for k in 0..x.len() {
                let step = 1e-5;
                let mut a = x.clone();
                let mut b = x.clone();
                a[k] += step;
                b[k] -= step;
                let (ga, gb) = (spec.gradient(&a), spec.gradient(&b));
                for j in 0..x.len() {
                    let fd = (ga[j] - gb[j]) / (2.0 * step);
                    prop_assert!((h.matrix[(j, k)] - fd).abs() <= 1e-5 * scale);
                }
            }
        }
    }

    #[test]
    fn perturbation_never_exceeds_amplitude(seed in 0u64..1000, amp in 0.0f64..20.0) {
        let p = make_perturbed(&PotentialSpec::mueller(), seed, amp, 30, 0.1).unwrap();
        let bounds = p.sampling_box();
        for i in 0..=40 {
            for j in 0..=40 {
                let x = [
                    bounds[0].0 + (bounds[0].1 - bounds[0].0) * i as f64 / 40.0,
                    bounds[1].0 + (bounds[1].1 - bounds[1].0) * j as f64 / 40.0,
                ];
                prop_assert!(p.perturbation_value(&x).abs() <= amp * (1.0 + 1e-9));
            }
        }
    }
}

/// Newton on `∇V = 0` with the analytic 2×2 Hessian, independent of the
/// library's refinement routines.
fn newton_2d(spec: &PotentialSpec, mut x: [f64; 2]) -> Option<[f64; 2]> {
    for _ in 0..60 {
        let g = spec.gradient(&x);
        let h = spec.hessian_matrix(&x);
        let det = h[(0, 0)] * h[(1, 1)] - h[(0, 1)] * h[(1, 0)];
        if det.abs() < 1e-12 {
            return None;
        }
        let dx = (h[(1, 1)] * g[0] - h[(0, 1)] * g[1]) / det;
        let dy = (h[(0, 0)] * g[1] - h[(1, 0)] * g[0]) / det;
        x = [x[0] - dx, x[1] - dy];
        if dx.hypot(dy) < 1e-14 {
            break;
        }
    }
    (spec.gradient(&x).iter().all(|v| v.abs() < 1e-9)).then_some(x)
}

/// All critical points in the sampling box, seeded from local minima of
/// `|∇V|²` on a fine grid.
fn critical_points(spec: &PotentialSpec) -> Vec<([f64; 2], usize)> {
    let b = spec.sampling_box();
    let n = 300;
    let at = |i: usize, j: usize| {
        [
            b[0].0 + (b[0].1 - b[0].0) * i as f64 / n as f64,
            b[1].0 + (b[1].1 - b[1].0) * j as f64 / n as f64,
        ]
    };
    let g2 = |x: [f64; 2]| spec.gradient(&x).iter().map(|v| v * v).sum::<f64>();
    let mut found: Vec<([f64; 2], usize)> = Vec::new();
    for i in 1..n {
        for j in 1..n {
            let c = g2(at(i, j));
            let is_min = (0..3)
                .flat_map(|di| (0..3).map(move |dj| (i + di - 1, j + dj - 1)))
                .all(|(a, bb)| g2(at(a, bb)) >= c);
            if !is_min {
                continue;
            }
            if let Some(x) = newton_2d(spec, at(i, j)) {
                if found
                    .iter()
                    .all(|(y, _)| (y[0] - x[0]).hypot(y[1] - x[1]) > 1e-6)
                {
                    let index = spec.hessian(&x).unwrap().negative_count();
                    found.push((x, index));
                }
            }
        }
    }
    found
}

#[test]
fn mueller_critical_points_match_tabulated_values() {
    let spec = PotentialSpec::mueller();
    let points = critical_points(&spec);
    let minima: Vec<_> = points.iter().filter(|p| p.1 == 0).collect();
    let saddles: Vec<_> = points.iter().filter(|p| p.1 == 1).collect();
    assert_eq!(minima.len(), 3, "{points:?}");
    assert_eq!(saddles.len(), 2, "{points:?}");
    let tabulated_minima = [[-0.558, 1.442], [0.623, 0.028], [-0.050, 0.467]];
    for t in tabulated_minima {
        assert!(minima
            .iter()
            .any(|(m, _)| (m[0] - t[0]).hypot(m[1] - t[1]) < 2e-3));
    }
    let tabulated_saddles = [([-0.822, 0.624], -40.66), ([0.212, 0.293], -72.25)];
    for (t, v) in tabulated_saddles {
        let (s, _) = saddles
            .iter()
            .find(|(s, _)| (s[0] - t[0]).hypot(s[1] - t[1]) < 2e-3)
            .expect("tabulated saddle present");
        assert!((spec.value(s) - v).abs() < 1e-2);
    }
}

#[test]
fn double_well_values_and_critical_points() {
    let dw2 = PotentialSpec::double_well_2d();
    let points = critical_points(&dw2);
    assert_eq!(points.iter().filter(|p| p.1 == 0).count(), 2);
    let saddle = points.iter().find(|p| p.1 == 1).unwrap().0;
    assert!(saddle[0].abs() < 1e-12 && saddle[1].abs() < 1e-12);
    assert_eq!(dw2.value(&[0.0, 0.0]), 0.25);
    assert_eq!(dw2.value(&[1.0, 2.0]), 2.0);
}
