//! Built-in models and Lyapunov bundles addressable from config files.

use mvsde::lyapunov::{
    abs_power_bundle, fourth_moment_bundle, quadratic_interaction_bundle, LyapunovBundle,
};
use mvsde::rng::{split_seed, CounterRng};
use mvsde::{cubic_interaction, landau_linear, mean_field_ou, CoefficientPair, EmpiricalMeasure};

use crate::config::{ResolvedModel, ResolvedSim};
use crate::error::CliError;

pub fn build_model(model: &ResolvedModel) -> Result<CoefficientPair, CliError> {
    match model.preset.as_str() {
        "mean_field_ou" => Ok(mean_field_ou(model.alpha.unwrap_or(f64::NAN))?),
        "cubic" => Ok(cubic_interaction(
            model.l.unwrap_or(f64::NAN),
            model.m.unwrap_or(f64::NAN),
        )?),
        "landau_linear" => Ok(landau_linear(model.alpha.unwrap_or(f64::NAN))),
        // Negative control: drift x^3 violates the growth condition.
        "explosive_cubic" => Ok(CoefficientPair::new(
            1,
            |_t, x, _mu, out: &mut [f64]| out[0] = x[0] * x[0] * x[0],
            |_t, _x, _mu, out: &mut [f64]| out[0] = 0.0,
        )),
        other => Err(CliError::Config(format!("unknown preset `{other}`"))),
    }
}

pub fn build_bundle(name: &str, bundle_alpha: f64, r: f64) -> Result<LyapunovBundle, CliError> {
    match name {
        "example2_V" => Ok(quadratic_interaction_bundle(bundle_alpha)),
        "cubic_V4" => Ok(fourth_moment_bundle()),
        "abs_pow_r" => {
            if r < 2.0 {
                return Err(CliError::Config(format!(
                    "bundle abs_pow_r requires r >= 2, got {r}"
                )));
            }
            Ok(abs_power_bundle(1, r))
        }
        other => Err(CliError::Config(format!(
            "unknown bundle `{other}` (available: example2_V, cubic_V4, abs_pow_r)"
        ))),
    }
}

/// The initial particle cloud described by the `[sim]` section.
pub fn build_init(sim: &ResolvedSim) -> EmpiricalMeasure {
    match sim.init.as_str() {
        "gaussian" => {
            let seed = split_seed(sim.seed, "init");
            let mut rng = CounterRng::new(seed, 0, 0);
            let pts: Vec<f64> = (0..sim.n_particles)
                .map(|_| sim.init_mean + sim.init_std * rng.standard_normal())
                .collect();
            EmpiricalMeasure::from_points_1d(pts)
        }
        _ => EmpiricalMeasure::dirac_zero(sim.n_particles, 1),
    }
}

pub fn preset_listing() -> String {
    let mut out = String::new();
    out.push_str("models:\n");
    out.push_str("  mean_field_ou     alpha            dX = [-alpha X - mean] dt + dW\n");
    out.push_str("  cubic             l, m             dX = [-X^3 - X mean((l \\/ |y|) /\\ m)] dt + (X/2) dW\n");
    out.push_str("  landau_linear     alpha            dX = -2(X + alpha mean) dt + (X + alpha mean) dW\n");
    out.push_str("  explosive_cubic   (none)           dX = X^3 dt   [negative control]\n");
    out.push_str("bundles:\n");
    out.push_str("  example2_V        alpha (from model)   V(x, mu) = (x^2 + alpha mean y^2)^2\n");
    out.push_str("  cubic_V4          (none)               V(mu) = mean y^4\n");
    out.push_str("  abs_pow_r         r                    V(x) = |x|^r\n");
    out
}
