use crate::error::{require_positive, Error, Result};
use crate::potentials::Landscape;

/// Offset from the saddle along the unstable direction at which the
/// deterministic relaxations start.
pub const TYPE2_OFFSET: f64 = 1e-4;

const RK4_DT: f64 = 1e-3;
const ARRIVAL: f64 = 1e-6;
const MAX_STEPS: usize = 10_000_000;
const THINNING: f64 = 2e-3;

/// Phase-space minimum energy path of an inertial system in one position
/// dimension: `(q_k, p_k)` from `(q_A, 0)` through `(q_S, 0)` to `(q_B, 0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Type2Mep {
    pub positions: Vec<f64>,
    pub momenta: Vec<f64>,
    /// Index of the saddle point `(q_S, 0)`.
    pub saddle_index: usize,
    pub mass: f64,
}

impl Type2Mep {
    pub fn phase_points(&self) -> Vec<Vec<f64>> {
        self.positions
            .iter()
            .zip(&self.momenta)
            .map(|(q, p)| vec![*q, *p])
            .collect()
    }

    /// `p²/2m + V(q)` along the path.
    pub fn energies<L: Landscape + ?Sized>(&self, landscape: &L) -> Vec<f64> {
        self.positions
            .iter()
            .zip(&self.momenta)
            .map(|(q, p)| 0.5 * p * p / self.mass + landscape.value(&[*q]))
            .collect()
    }
}

/// Indices `k` at which the sign of `momenta` differs from the last nonzero
/// sign before it. Exact zeros carry no sign.
pub fn momentum_sign_changes(momenta: &[f64]) -> Vec<usize> {
    let mut last = 0.0f64;
    let mut changes = Vec::new();
    for (k, &p) in momenta.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        if last != 0.0 && p.signum() != last.signum() {
            changes.push(k);
        }
        last = p;
    }
    changes
}

fn rhs<L: Landscape + ?Sized>(
    landscape: &L,
    mass: f64,
    friction: f64,
    q: f64,
    p: f64,
) -> (f64, f64) {
    let mut g = [0.0];
    landscape.gradient_into(&[q], &mut g);
    (p / mass, -g[0] - friction * p)
}

/// Deterministic damped relaxation by RK4 until within `ARRIVAL` of
/// `(target, 0)` in phase space.
fn relax<L: Landscape + ?Sized>(
    landscape: &L,
    mass: f64,
    gamma: f64,
    q0: f64,
    target: f64,
) -> Result<Vec<(f64, f64)>> {
    let friction = gamma / mass;
    let (mut q, mut p) = (q0, 0.0);
    let mut out = vec![(q, p)];
    let h = RK4_DT;
    for _ in 0..MAX_STEPS {
        let k1 = rhs(landscape, mass, friction, q, p);
        let k2 = rhs(
            landscape,
            mass,
            friction,
            q + 0.5 * h * k1.0,
            p + 0.5 * h * k1.1,
        );
        let k3 = rhs(
            landscape,
            mass,
            friction,
            q + 0.5 * h * k2.0,
            p + 0.5 * h * k2.1,
        );
        let k4 = rhs(landscape, mass, friction, q + h * k3.0, p + h * k3.1);
        q += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
        p += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        if !(q.is_finite() && p.is_finite()) {
            return Err(Error::Construction(
                "damped relaxation produced a non-finite state".into(),
            ));
        }
        out.push((q, p));
        let dq = q - target;
        if (dq * dq + p * p).sqrt() <= ARRIVAL {
            out.push((target, 0.0));
            return Ok(out);
        }
        let mut g = [0.0];
        landscape.gradient_into(&[q], &mut g);
        if (g[0].abs() + p.abs()) < 1e-12 {
            break;
        }
    }
    Err(Error::Construction(format!(
        "relaxation from q={q0} did not reach the minimum at q={target}; ended at ({q}, {p})"
    )))
}

fn thin(points: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    let n = points.len();
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (k, pt) in points.into_iter().enumerate() {
        let keep = match out.last() {
            None => true,
            Some(&(q, p)) => {
                k == n - 1 || ((pt.0 - q) * (pt.0 - q) + (pt.1 - p) * (pt.1 - p)).sqrt() >= THINNING
            }
        };
        if keep {
            out.push(pt);
        }
    }
    out
}

/// Minimum energy path of `m q̈ + γ q̇ = −V′(q)` from `min_a` over `saddle`
/// to `min_b`.
///
/// The downhill half is the damped trajectory released at rest from
/// `saddle + δ` (towards `min_b`). The uphill half is the damped trajectory
/// released from `saddle − δ` towards `min_a`, mapped through
/// `(q(t), p(t)) → (q(−t), −p(−t))`. Both halves meet the saddle at zero
/// momentum.
pub fn mep_type2<L: Landscape + ?Sized>(
    landscape: &L,
    mass: f64,
    gamma: f64,
    min_a: &[f64],
    min_b: &[f64],
    saddle: &[f64],
) -> Result<Type2Mep> {
    require_positive("mass", mass)?;
    require_positive("gamma", gamma)?;
    if landscape.dimension() != 1 {
        return Err(Error::Configuration(
            "the inertial minimum energy path is implemented for 1-D position space".into(),
        ));
    }
    for x in [min_a, min_b, saddle] {
        crate::error::check_dimension(1, x.len())?;
    }
    let s = saddle[0];
    let curvature = landscape.hessian_matrix(saddle)[(0, 0)];
    let slope = landscape.gradient(saddle)[0];
    if !(curvature < 0.0) || slope.abs() > 1e-8 * curvature.abs() {
        return Err(Error::SaddleVerification(format!(
            "q={s} is not a nondegenerate maximum (V'={slope:e}, V''={curvature})"
        )));
    }
    let toward_b = (min_b[0] - s).signum();
    let uphill = relax(
        landscape,
        mass,
        gamma,
        s - toward_b * TYPE2_OFFSET,
        min_a[0],
    )?;
    let downhill = relax(
        landscape,
        mass,
        gamma,
        s + toward_b * TYPE2_OFFSET,
        min_b[0],
    )?;

    let mut points: Vec<(f64, f64)> = thin(uphill)
        .into_iter()
        .rev()
        .map(|(q, p)| (q, -p))
        .collect();
    let saddle_index = points.len();
    points.push((s, 0.0));
    points.extend(thin(downhill));
    let (positions, momenta) = points.into_iter().unzip();
    Ok(Type2Mep {
        positions,
        momenta,
        saddle_index,
        mass,
    })
}
