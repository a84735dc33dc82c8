//! Direct stochastic simulation of gradient flows.
//!
//! Overdamped (type-I) dynamics `γẋ = −∇V + √ε Ẇ` is integrated with
//! Euler–Maruyama; inertial (type-II) dynamics `mq̈ + γq̇ = −∇V + √(mε) Ẇ`
//! with semi-implicit Euler, noise entering the momentum only. The
//! temperature is always derived as `k_BT = ε / 2γ`.
//!
//! Long runs should use the streaming integrators together with
//! [`TransitionDetector`] instead of materializing a [`Trajectory`].

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{require_positive, Error, Result};
use crate::linalg;
use crate::potentials::Landscape;
use crate::seeding;

/// Noise and friction parameters of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    pub epsilon: f64,
    pub gamma: f64,
    pub mass: f64,
    pub seed: u64,
}

impl NoiseParams {
    /// `k_BT = ε / 2γ`
    pub fn temperature(&self) -> f64 {
        self.epsilon / (2.0 * self.gamma)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FlowKind {
    Overdamped,
    Inertial,
}

/// A uniformly sampled solution path. `positions[0]` is the initial state, so
/// `positions.len() == n_steps + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub kind: FlowKind,
    pub positions: Vec<Vec<f64>>,
    pub momenta: Option<Vec<Vec<f64>>>,
    pub dt: f64,
    pub params: NoiseParams,
}

impl Trajectory {
    pub fn temperature(&self) -> f64 {
        self.params.temperature()
    }

    pub fn n_steps(&self) -> usize {
        self.positions.len() - 1
    }

    pub fn time(&self, step: usize) -> f64 {
        step as f64 * self.dt
    }
}

fn check_flow_params(epsilon: f64, gamma: f64, dt: f64) -> Result<()> {
    require_positive("dt", dt)?;
    require_positive("gamma", gamma)?;
    if !(epsilon.is_finite() && epsilon >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "epsilon",
            reason: format!("must be non-negative, got {epsilon}"),
        });
    }
    Ok(())
}

/// Streaming Euler–Maruyama integrator for `γẋ = −∇V + √ε Ẇ`.
pub struct OverdampedIntegrator<'a, L: Landscape + ?Sized> {
    landscape: &'a L,
    x: Vec<f64>,
    grad: Vec<f64>,
    drift: f64,
    kick: f64,
    rng: ChaCha8Rng,
    step: usize,
    dt: f64,
}

impl<'a, L: Landscape + ?Sized> OverdampedIntegrator<'a, L> {
    pub fn new(
        landscape: &'a L,
        x0: &[f64],
        epsilon: f64,
        gamma: f64,
        dt: f64,
        rng: ChaCha8Rng,
    ) -> Result<Self> {
        check_flow_params(epsilon, gamma, dt)?;
        crate::error::check_dimension(landscape.dimension(), x0.len())?;
        Ok(Self {
            landscape,
            x: x0.to_vec(),
            grad: vec![0.0; x0.len()],
            drift: dt / gamma,
            kick: (epsilon * dt).sqrt() / gamma,
            rng,
            step: 0,
            dt,
        })
    }

    pub fn state(&self) -> &[f64] {
        &self.x
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.dt
    }

    pub fn step(&mut self) -> Result<&[f64]> {
        self.landscape.gradient_into(&self.x, &mut self.grad);
        for (x, g) in self.x.iter_mut().zip(&self.grad) {
            let xi: f64 = self.rng.sample(StandardNormal);
            *x += -self.drift * g + self.kick * xi;
        }
        self.step += 1;
        if !linalg::all_finite(&self.x) {
            return Err(Error::Divergence {
                module: "dynamics",
                step: self.step,
            });
        }
        Ok(&self.x)
    }
}

/// Streaming semi-implicit Euler integrator for `mq̈ + γq̇ = −∇V + √(mε) Ẇ`.
pub struct InertialIntegrator<'a, L: Landscape + ?Sized> {
    landscape: &'a L,
    q: Vec<f64>,
    p: Vec<f64>,
    grad: Vec<f64>,
    mass: f64,
    friction: f64,
    kick: f64,
    rng: ChaCha8Rng,
    step: usize,
    dt: f64,
}

impl<'a, L: Landscape + ?Sized> InertialIntegrator<'a, L> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        landscape: &'a L,
        q0: &[f64],
        p0: &[f64],
        mass: f64,
        gamma: f64,
        epsilon: f64,
        dt: f64,
        rng: ChaCha8Rng,
    ) -> Result<Self> {
        check_flow_params(epsilon, gamma, dt)?;
        require_positive("mass", mass)?;
        crate::error::check_dimension(landscape.dimension(), q0.len())?;
        crate::error::check_dimension(landscape.dimension(), p0.len())?;
        Ok(Self {
            landscape,
            q: q0.to_vec(),
            p: p0.to_vec(),
            grad: vec![0.0; q0.len()],
            mass,
            friction: gamma / mass,
            kick: (mass * epsilon * dt).sqrt(),
            rng,
            step: 0,
            dt,
        })
    }

    pub fn position(&self) -> &[f64] {
        &self.q
    }

    pub fn momentum(&self) -> &[f64] {
        &self.p
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.dt
    }

    pub fn step(&mut self) -> Result<()> {
        self.landscape.gradient_into(&self.q, &mut self.grad);
        for k in 0..self.q.len() {
            let xi: f64 = self.rng.sample(StandardNormal);
            self.p[k] += -self.dt * (self.grad[k] + self.friction * self.p[k]) + self.kick * xi;
            self.q[k] += self.dt * self.p[k] / self.mass;
        }
        self.step += 1;
        if !(linalg::all_finite(&self.q) && linalg::all_finite(&self.p)) {
            return Err(Error::Divergence {
                module: "dynamics",
                step: self.step,
            });
        }
        Ok(())
    }
}

/// Euler–Maruyama solution of `γẋ = −∇V + √ε Ẇ`:
/// `x_{k+1} = x_k − (dt/γ)∇V(x_k) + √(ε dt)/γ · ξ_k`.
pub fn integrate_type1<L: Landscape + ?Sized>(
    landscape: &L,
    x0: &[f64],
    epsilon: f64,
    gamma: f64,
    dt: f64,
    n_steps: usize,
    seed: u64,
) -> Result<Trajectory> {
    let mut integrator =
        OverdampedIntegrator::new(landscape, x0, epsilon, gamma, dt, seeding::rng(seed, 0))?;
    let mut positions = Vec::with_capacity(n_steps + 1);
    positions.push(x0.to_vec());
    for _ in 0..n_steps {
        positions.push(integrator.step()?.to_vec());
    }
    Ok(Trajectory {
        kind: FlowKind::Overdamped,
        positions,
        momenta: None,
        dt,
        params: NoiseParams {
            epsilon,
            gamma,
            mass: 1.0,
            seed,
        },
    })
}

/// Semi-implicit Euler solution of `mq̈ + γq̇ = −∇V + √(mε) Ẇ`.
///
/// The momentum noise balances friction at `⟨p²⟩ = m²ε/2γ`, which is the
/// Maxwell variance `m k_BT` for unit mass.
#[allow(clippy::too_many_arguments)]
pub fn integrate_type2<L: Landscape + ?Sized>(
    landscape: &L,
    q0: &[f64],
    p0: &[f64],
    mass: f64,
    gamma: f64,
    epsilon: f64,
    dt: f64,
    n_steps: usize,
    seed: u64,
) -> Result<Trajectory> {
    let mut integrator = InertialIntegrator::new(
        landscape,
        q0,
        p0,
        mass,
        gamma,
        epsilon,
        dt,
        seeding::rng(seed, 0),
    )?;
    let mut positions = Vec::with_capacity(n_steps + 1);
    let mut momenta = Vec::with_capacity(n_steps + 1);
    positions.push(q0.to_vec());
    momenta.push(p0.to_vec());
    for _ in 0..n_steps {
        integrator.step()?;
        positions.push(integrator.position().to_vec());
        momenta.push(integrator.momentum().to_vec());
    }
    Ok(Trajectory {
        kind: FlowKind::Inertial,
        positions,
        momenta: Some(momenta),
        dt,
        params: NoiseParams {
            epsilon,
            gamma,
            mass,
            seed,
        },
    })
}

/// A capture ball around a local minimum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Basin {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Basin {
    pub fn new(center: Vec<f64>, radius: f64) -> Self {
        Self { center, radius }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        linalg::distance(x, &self.center) <= self.radius
    }
}

/// Rejects fewer than two basins and overlapping capture balls.
pub fn validate_basins(basins: &[Basin]) -> Result<()> {
    if basins.len() < 2 {
        return Err(Error::Configuration(format!(
            "transition detection needs at least 2 basins, got {}",
            basins.len()
        )));
    }
    for (i, a) in basins.iter().enumerate() {
        if !(a.radius > 0.0) {
            return Err(Error::Configuration(format!(
                "basin {i} has non-positive capture radius"
            )));
        }
        for (j, b) in basins.iter().enumerate().skip(i + 1) {
            if a.center.len() != b.center.len() {
                return Err(Error::DimensionMismatch {
                    expected: a.center.len(),
                    got: b.center.len(),
                });
            }
            if linalg::distance(&a.center, &b.center) <= a.radius + b.radius {
                return Err(Error::Configuration(format!(
                    "capture balls of basins {i} and {j} overlap"
                )));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionEvent {
    pub time: f64,
    pub from: usize,
    pub to: usize,
}

/// Committed transitions between basins.
///
/// `dwell_times[b]` lists completed stays in basin `b` (commitment to exit);
/// `open_dwell[b]` is the censored stay still in progress when observation
/// ended.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TransitionRecord {
    pub events: Vec<TransitionEvent>,
    pub dwell_times: Vec<Vec<f64>>,
    pub open_dwell: Vec<f64>,
    pub commitments: usize,
    pub total_time: f64,
}

impl TransitionRecord {
    /// Time spent committed to `basin`, censored stay included.
    pub fn committed_time(&self, basin: usize) -> f64 {
        self.dwell_times[basin].iter().sum::<f64>() + self.open_dwell[basin]
    }

    pub fn merge(mut self, other: TransitionRecord) -> TransitionRecord {
        let offset = self.total_time;
        self.events
            .extend(other.events.into_iter().map(|e| TransitionEvent {
                time: e.time + offset,
                ..e
            }));
        for (mine, theirs) in self.dwell_times.iter_mut().zip(other.dwell_times) {
            mine.extend(theirs);
        }
        for (mine, theirs) in self.open_dwell.iter_mut().zip(other.open_dwell) {
            *mine += theirs;
        }
        self.commitments += other.commitments;
        self.total_time += other.total_time;
        self
    }
}

/// Committor-style transition counter: a transition is recorded only when a
/// trajectory last committed to basin `i` enters the capture ball of `j ≠ i`.
#[derive(Debug, Clone)]
pub struct TransitionDetector {
    basins: Vec<Basin>,
    committed: Option<(usize, f64)>,
    record: TransitionRecord,
}

impl TransitionDetector {
    pub fn new(basins: Vec<Basin>) -> Result<Self> {
        validate_basins(&basins)?;
        let n = basins.len();
        Ok(Self {
            basins,
            committed: None,
            record: TransitionRecord {
                dwell_times: vec![Vec::new(); n],
                open_dwell: vec![0.0; n],
                ..Default::default()
            },
        })
    }

    pub fn committed_basin(&self) -> Option<usize> {
        self.committed.map(|(b, _)| b)
    }

    pub fn transitions(&self) -> usize {
        self.record.events.len()
    }

    pub fn observe(&mut self, time: f64, x: &[f64]) {
        let Some(hit) = self.basins.iter().position(|b| b.contains(x)) else {
            return;
        };
        match self.committed {
            Some((current, _)) if current == hit => {}
            Some((current, since)) => {
                self.record.events.push(TransitionEvent {
                    time,
                    from: current,
                    to: hit,
                });
                self.record.dwell_times[current].push(time - since);
                self.record.commitments += 1;
                self.committed = Some((hit, time));
            }
            None => {
                self.record.commitments += 1;
                self.committed = Some((hit, time));
            }
        }
    }

    pub fn finish(mut self, end_time: f64) -> TransitionRecord {
        if let Some((current, since)) = self.committed {
            self.record.open_dwell[current] = end_time - since;
        }
        self.record.total_time = end_time;
        self.record
    }
}

/// Runs a [`TransitionDetector`] over a stored trajectory's positions.
pub fn detect_transitions(traj: &Trajectory, basins: &[Basin]) -> Result<TransitionRecord> {
    let mut detector = TransitionDetector::new(basins.to_vec())?;
    for (k, x) in traj.positions.iter().enumerate() {
        detector.observe(traj.time(k), x);
    }
    Ok(detector.finish(traj.time(traj.n_steps())))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub rate: f64,
    pub stderr: f64,
    pub exits: usize,
    pub dwell_time: f64,
}

/// Minimum number of completed dwells for an escape-rate estimate.
pub const MIN_DWELLS: usize = 5;

/// Escape rate from `from_basin`: exits divided by the total time committed to
/// it; standard error `rate / √exits` under exponential dwell times.
pub fn empirical_rate(record: &TransitionRecord, from_basin: usize) -> Result<RateEstimate> {
    let Some(dwells) = record.dwell_times.get(from_basin) else {
        return Err(Error::Configuration(format!(
            "basin {from_basin} is not part of the record"
        )));
    };
    let exits = dwells.len();
    if exits < MIN_DWELLS {
        return Err(Error::InsufficientStatistics {
            what: "empirical_rate",
            count: exits,
            required: MIN_DWELLS,
        });
    }
    let dwell_time = record.committed_time(from_basin);
    let rate = exits as f64 / dwell_time;
    Ok(RateEstimate {
        rate,
        stderr: rate / (exits as f64).sqrt(),
        exits,
        dwell_time,
    })
}

/// Long overdamped run split into independent chains; returns the merged
/// transition record. Chain `k` uses stream `k` of `seed`.
#[allow(clippy::too_many_arguments)]
pub fn sample_transitions_type1<L: Landscape + ?Sized>(
    landscape: &L,
    x0: &[f64],
    epsilon: f64,
    gamma: f64,
    dt: f64,
    steps_per_chain: usize,
    chains: usize,
    basins: &[Basin],
    seed: u64,
) -> Result<TransitionRecord> {
    use rayon::prelude::*;
    validate_basins(basins)?;
    let records: Vec<Result<TransitionRecord>> = (0..chains)
        .into_par_iter()
        .map(|chain| {
            let mut integrator = OverdampedIntegrator::new(
                landscape,
                x0,
                epsilon,
                gamma,
                dt,
                seeding::rng(seed, chain as u64),
            )?;
            let mut detector = TransitionDetector::new(basins.to_vec())?;
            detector.observe(0.0, x0);
            for _ in 0..steps_per_chain {
                integrator.step()?;
                detector.observe(integrator.time(), integrator.state());
            }
            Ok(detector.finish(integrator.time()))
        })
        .collect();
    let mut merged: Option<TransitionRecord> = None;
    for r in records {
        let r = r?;
        merged = Some(match merged {
            None => r,
            Some(m) => m.merge(r),
        });
    }
    merged.ok_or_else(|| Error::Configuration("at least one chain is required".into()))
}

/// Options for [`descend`].
#[derive(Debug, Clone, Copy)]
pub struct DescentOptions {
    pub max_iterations: usize,
}

impl Default for DescentOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200_000,
        }
    }
}

/// Gradient descent with an adaptive (backtracking) step, polished by Newton
/// steps once the Hessian is positive definite, until `‖∇V‖ ≤ tol`. The
/// returned point is checked to have a positive-semidefinite Hessian.
pub fn descend<L: Landscape + ?Sized>(landscape: &L, x0: &[f64], tol: f64) -> Result<Vec<f64>> {
    descend_with(landscape, x0, tol, DescentOptions::default())
}

pub fn descend_with<L: Landscape + ?Sized>(
    landscape: &L,
    x0: &[f64],
    tol: f64,
    options: DescentOptions,
) -> Result<Vec<f64>> {
    require_positive("tol", tol)?;
    crate::error::check_dimension(landscape.dimension(), x0.len())?;
    let mut x = x0.to_vec();
    let mut v = landscape.value(&x);
    let mut g = landscape.gradient(&x);
    let mut step = 1e-3;
    for _ in 0..options.max_iterations {
        let gnorm = linalg::norm(&g);
        if !gnorm.is_finite() {
            return Err(Error::Divergence {
                module: "descend",
                step: 0,
            });
        }
        if gnorm <= tol {
            return verify_minimum(landscape, x);
        }
        // Newton polish inside a convex region.
        let h = landscape.hessian_matrix(&x);
        if linalg::sorted_eigen(&h).0[0] > 0.0 {
            if let Some(dx) = h.lu().solve(&nalgebra::DVector::from_column_slice(&g)) {
                let trial: Vec<f64> = x.iter().zip(dx.iter()).map(|(a, d)| a - d).collect();
                let gt = landscape.gradient(&trial);
                let vt = landscape.value(&trial);
                if linalg::norm(&gt) < gnorm && vt <= v + 1e-12 * v.abs().max(1.0) {
                    x = trial;
                    g = gt;
                    v = vt;
                    continue;
                }
            }
        }
        loop {
            let trial: Vec<f64> = x.iter().zip(&g).map(|(a, d)| a - step * d).collect();
            let vt = landscape.value(&trial);
            if vt <= v - 1e-4 * step * gnorm * gnorm {
                x = trial;
                v = vt;
                g = landscape.gradient(&x);
                step *= 1.5;
                break;
            }
            step *= 0.5;
            if step < 1e-300 {
                // Descent direction exhausted at machine precision.
                return verify_minimum(landscape, x);
            }
        }
    }
    Err(Error::NonConvergence {
        module: "descend",
        iterations: options.max_iterations,
        residual: linalg::norm(&g),
    })
}

fn verify_minimum<L: Landscape + ?Sized>(landscape: &L, x: Vec<f64>) -> Result<Vec<f64>> {
    let h = landscape.hessian_matrix(&x);
    let eig = linalg::sorted_eigen(&h).0;
    let scale = eig.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    if eig[0] < -1e-8 * scale {
        return Err(Error::NotAMinimum(format!(
            "descent stalled at {x:?} with Hessian eigenvalue {}",
            eig[0]
        )));
    }
    Ok(x)
}

/// Removes points closer than `min_distance` to an earlier point.
pub fn deduplicate(points: Vec<Vec<f64>>, min_distance: f64) -> Vec<Vec<f64>> {
    let mut unique: Vec<Vec<f64>> = Vec::new();
    for p in points {
        if unique
            .iter()
            .all(|u| linalg::distance(u, &p) >= min_distance)
        {
            unique.push(p);
        }
    }
    unique
}

/// A reactive inertial trajectory: positions and momenta from the last exit of
/// basin A to the first entry into basin B.
#[derive(Debug, Clone, PartialEq)]
pub struct ReactivePath {
    pub positions: Vec<Vec<f64>>,
    pub momenta: Vec<Vec<f64>>,
}

impl ReactivePath {
    /// Phase-space points `(q..., p...)`.
    pub fn phase_points(&self) -> Vec<Vec<f64>> {
        self.positions
            .iter()
            .zip(&self.momenta)
            .map(|(q, p)| q.iter().chain(p).copied().collect())
            .collect()
    }
}

/// Settings for [`shoot_reactive_path`].
#[derive(Debug, Clone)]
pub struct ShootingOptions {
    pub mass: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub dt: f64,
    /// Step budget for each half-trajectory.
    pub max_steps: usize,
    pub max_attempts: usize,
}

/// Generates an inertial transition path by shooting from the dividing point
/// `saddle` of a one-dimensional landscape.
///
/// The initial momentum is drawn from the flux-weighted Maxwell distribution
/// (Rayleigh with variance `m k_BT`); the state is integrated forward, and
/// the momentum-reversed state is integrated forward and then time-reversed
/// with momentum negation. Reversibility of the equilibrium dynamics makes the
/// spliced path a trajectory of the same stochastic dynamics. Attempts whose
/// halves do not connect `a` (phase-space ball around `(q_A, 0)`) to `b` are
/// discarded. Attempt `k` uses stream `k` of `seed`.
pub fn shoot_reactive_path<L: Landscape + ?Sized>(
    landscape: &L,
    saddle: &[f64],
    a: &Basin,
    b: &Basin,
    options: &ShootingOptions,
    seed: u64,
) -> Result<ReactivePath> {
    if landscape.dimension() != 1 {
        return Err(Error::Configuration(
            "reactive-path shooting is implemented for 1-D position space".into(),
        ));
    }
    validate_basins(&[a.clone(), b.clone()])?;
    let kt = options.epsilon / (2.0 * options.gamma);
    require_positive("epsilon", options.epsilon)?;
    for attempt in 0..options.max_attempts {
        let mut rng = seeding::rng(seed, attempt as u64);
        let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
        let p0 = (-2.0 * options.mass * kt * u.ln()).sqrt();
        let forward = run_until_basin(landscape, saddle, p0, options, &mut rng, a, b)?;
        let backward = run_until_basin(landscape, saddle, -p0, options, &mut rng, a, b)?;
        if let ((Some(1), fwd), (Some(0), bwd)) = (forward, backward) {
            let mut positions = Vec::with_capacity(fwd.len() + bwd.len());
            let mut momenta = Vec::with_capacity(fwd.len() + bwd.len());
            for (q, p) in bwd.iter().rev() {
                positions.push(vec![*q]);
                momenta.push(vec![-*p]);
            }
            for (q, p) in fwd.iter().skip(1) {
                positions.push(vec![*q]);
                momenta.push(vec![*p]);
            }
            return Ok(ReactivePath { positions, momenta });
        }
    }
    Err(Error::InsufficientStatistics {
        what: "shoot_reactive_path",
        count: 0,
        required: 1,
    })
}

type HalfPath = (Option<usize>, Vec<(f64, f64)>);

fn run_until_basin<L: Landscape + ?Sized>(
    landscape: &L,
    q0: &[f64],
    p0: f64,
    options: &ShootingOptions,
    rng: &mut ChaCha8Rng,
    a: &Basin,
    b: &Basin,
) -> Result<HalfPath> {
    let mut integrator = InertialIntegrator::new(
        landscape,
        q0,
        &[p0],
        options.mass,
        options.gamma,
        options.epsilon,
        options.dt,
        seeding::rng(rng.random(), 0),
    )?;
    let mut path = vec![(q0[0], p0)];
    for _ in 0..options.max_steps {
        integrator.step()?;
        let point = [integrator.position()[0], integrator.momentum()[0]];
        path.push((point[0], point[1]));
        if a.contains(&point) {
            return Ok((Some(0), path));
        }
        if b.contains(&point) {
            return Ok((Some(1), path));
        }
    }
    Ok((None, path))
}
