//! Figure bundles: preset configurations layered under the user's file and
//! `--set` overrides.

use clap::ValueEnum;

use landscape::dynamics::{shoot_reactive_path, Basin, ShootingOptions};
use landscape::linalg;
use landscape::PotentialSpec;

use super::paths::{mep2_path, write_mep2, write_path};
use super::{dynamics_dt, fstring, module_seed, simulate};
use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::output::Run;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Figure {
    /// Overdamped double-well time series with repeated transitions.
    Fig1,
    /// Inertial phase-space MEP and one stochastic transition path.
    Fig3,
    /// Finite-temperature string on the perturbed Mueller landscape.
    Fig4,
}

impl Figure {
    pub fn name(self) -> &'static str {
        match self {
            Figure::Fig1 => "fig1",
            Figure::Fig3 => "fig3",
            Figure::Fig4 => "fig4",
        }
    }

    /// Base configuration of the bundle. The fig1 horizon T = 3·10⁵ at
    /// ε = 0.06 spans about sixteen mean dwell times.
    pub fn preset(self) -> &'static str {
        match self {
            Figure::Fig1 => {
                r#"
[potential]
kind = "double_well_1d"

[dynamics]
kind = "overdamped"
epsilon = 0.06
gamma = 1.0
dt = 0.01
steps = 30000000
output_every = 300
x0 = [-1.0]
"#
            }
            Figure::Fig3 => {
                r#"
[potential]
kind = "double_well_1d"

[dynamics]
kind = "inertial"
epsilon = 0.04
gamma = 1.0
mass = 1.0
dt = 0.001
"#
            }
            Figure::Fig4 => {
                r#"
[potential]
kind = "mueller"

[potential.perturbation]
seed = 7
amplitude = 2.0
bump_count = 200
bump_width = 0.05

[string]
images = 30
dt = 1e-4
tol = 1e-4

[finite_t]
realizations = 32
kt = 2.0
dt = 1e-4
steps = 10000
burn_in = 5000
sampling_steps = 10000
stride = 20
"#
            }
        }
    }
}

/// Step budget of each half of a shot transition path.
const SHOOT_MAX_STEPS: usize = 1_000_000;
const SHOOT_MAX_ATTEMPTS: usize = 1000;

pub fn reproduce(figure: Figure, config: &ExperimentConfig, run: &mut Run) -> Result<(), CliError> {
    let spec = config.potential_spec()?;
    run.record("figure", figure.name());
    match figure {
        Figure::Fig1 => simulate::simulate(config, &spec, run),
        Figure::Fig3 => fig3(config, &spec, run),
        Figure::Fig4 => fstring::fstring(config, &spec, run),
    }
}

fn fig3(config: &ExperimentConfig, spec: &PotentialSpec, run: &mut Run) -> Result<(), CliError> {
    let (mep, report) = mep2_path(config, spec)?;
    write_path(run, "string.csv", &report.path, spec)?;
    write_mep2(run, &mep)?;
    let d = &config.dynamics;
    let radius = d.capture_radius;
    let a = Basin::new(vec![report.path.first()[0], 0.0], radius);
    let b = Basin::new(vec![report.path.last()[0], 0.0], radius);
    let options = ShootingOptions {
        mass: d.mass,
        gamma: d.gamma,
        epsilon: d.epsilon,
        dt: dynamics_dt(config, spec),
        max_steps: SHOOT_MAX_STEPS,
        max_attempts: SHOOT_MAX_ATTEMPTS,
    };
    let saddle = [mep.positions[mep.saddle_index]];
    let path = shoot_reactive_path(
        spec,
        &saddle,
        &a,
        &b,
        &options,
        module_seed(config, "reproduce"),
    )?;
    let points = path.phase_points();
    run.csv(
        "sde_path.csv",
        &[("q", "length"), ("p", "momentum")],
        points.iter().cloned(),
    )?;
    let distance = linalg::hausdorff(&points, &mep.phase_points());
    run.record("epsilon", d.epsilon);
    run.record("hausdorff_to_mep", distance);
    Ok(())
}
