//! One-dimensional quadrature rules.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Adaptive Simpson integration of `f` over `[a, b]` to absolute tolerance
/// `tol`, with Richardson correction on accepted panels.
pub fn adaptive_simpson<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    tol: f64,
    max_depth: u32,
) -> Result<f64> {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let mut failed = false;
    let value = simpson_step(&mut f, a, b, fa, fm, fb, whole, tol, max_depth, &mut failed);
    if failed || !value.is_finite() {
        return Err(Error::Quadrature(format!(
            "adaptive Simpson on [{a}, {b}] did not reach tolerance {tol:e}"
        )));
    }
    Ok(value)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: FnMut(f64) -> f64>(
    f: &mut F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    failed: &mut bool,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    if depth == 0 {
        *failed = true;
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, failed)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, failed)
}

/// Gauss–Hermite rule for `∫ g(t) e^{−t²} dt` by the Golub–Welsch eigenvalue
/// method. Returns `(nodes, weights)` with nodes ascending.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Hermite rule needs at least one node");
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let off = (k as f64 / 2.0).sqrt();
        jacobi[(k - 1, k)] = off;
        jacobi[(k, k - 1)] = off;
    }
    let eig = SymmetricEigen::new(jacobi);
    let mu0 = std::f64::consts::PI.sqrt();
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let v0 = eig.eigenvectors[(0, k)];
            (eig.eigenvalues[k], mu0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// `log ∫_a^b e^{g(x)} dx` for an integrand peaked at `peak ∈ [a, b]` with
/// width of order `scale`.
///
/// Breakpoints are placed at `peak ± scale·2^k` so that adaptive Simpson sees
/// the peak on every panel; each panel is integrated relative to `g(peak)` to
/// `rel_tol`.
pub fn log_peaked_integral<G: FnMut(f64) -> f64>(
    mut g: G,
    a: f64,
    b: f64,
    peak: f64,
    scale: f64,
    rel_tol: f64,
) -> Result<f64> {
    if !(a < b) || !(scale > 0.0) {
        return Err(Error::Quadrature(format!(
            "invalid peaked integral on [{a}, {b}] with scale {scale}"
        )));
    }
    let peak = peak.clamp(a, b);
    let top = g(peak);
    let mut breaks = vec![a, peak, b];
    let mut offset = scale;
    while peak - offset > a || peak + offset < b {
        if peak - offset > a {
            breaks.push(peak - offset);
        }
        if peak + offset < b {
            breaks.push(peak + offset);
        }
        offset *= 2.0;
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    // panel tolerance relative to the peak mass ≈ e^{top}·scale
    let tol = rel_tol * scale.min(b - a) / breaks.len() as f64;
    let mut total = 0.0;
    for w in breaks.windows(2) {
        total += adaptive_simpson(|x| (g(x) - top).exp(), w[0], w[1], tol, 50)?;
    }
    if !(total > 0.0) {
        return Err(Error::Quadrature("peaked integral vanished".into()));
    }
    Ok(top + total.ln())
}

/// `log Σ exp(x_i)` without overflow.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Cumulative trapezoid rule; the first entry is zero.
pub fn cumulative_trapezoid(x: &[f64], y: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..x.len() {
        acc += 0.5 * (x[k] - x[k - 1]) * (y[k] + y[k - 1]);
        out.push(acc);
    }
    out
}

/// Cumulative integral of the piecewise cubic that interpolates four
/// neighbouring samples on each interval (centered where possible); the first
/// entry is zero. Fourth-order accurate on smooth data; falls back to the
/// trapezoid rule below four samples.
pub fn cumulative_cubic(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n < 4 {
        return cumulative_trapezoid(x, y);
    }
    let lagrange = |s: usize, t: f64| -> f64 {
        (s..s + 4)
            .map(|j| {
                let basis: f64 = (s..s + 4)
                    .filter(|&m| m != j)
                    .map(|m| (t - x[m]) / (x[j] - x[m]))
                    .product();
                basis * y[j]
            })
            .sum()
    };
    // two-point Gauss–Legendre is exact for cubics
    let g = 0.5 / 3f64.sqrt();
    let mut out = Vec::with_capacity(n);
    let mut acc = 0.0;
    out.push(0.0);
    for k in 0..n - 1 {
        let s = k.saturating_sub(1).min(n - 4);
        let (a, b) = (x[k], x[k + 1]);
        let mid = 0.5 * (a + b);
        let h = b - a;
        acc += 0.5 * h * (lagrange(s, mid - g * h) + lagrange(s, mid + g * h));
        out.push(acc);
    }
    out
}
