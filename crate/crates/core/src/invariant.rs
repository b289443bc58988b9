//! Long-run diagnostics for the nonlinear semigroup of the dynamics.
//!
//! The flow `mu -> law of X_t started from mu` is nonlinear (the dynamics
//! depend on the law), so invariant measures are probed directly:
//!
//! - [`cauchy_probe`] estimates `W_2` between snapshot clouds at times `t`
//!   and `t + s` of a run started from the Dirac at the origin. Under the
//!   integrated strong monotonicity condition with constant `C_1 > 0` the
//!   distances decay like `e^{-C_1 t}` uniformly in `s`, which is the Cauchy
//!   criterion behind existence of the invariant law.
//! - [`contraction_rate`] fits the decay exponent of `D(t) = mean |X_i -
//!   Y_i|^2` under synchronous coupling (plus the exact `W_2^2` between the
//!   marginal clouds as a cross-check series).
//! - [`stationary_ou`] compares the long-run law of the mean-field OU model
//!   against its closed form: the stationary density `exp(-(alpha x^2 + 2 m
//!   x))/Z` at the self-consistent mean `m* = 0`, which has variance
//!   `1/(2 alpha)` and zero excess kurtosis.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec;
use crate::fmt::float17;
use crate::lyapunov::{fit_log_slope, LyapunovError};
use crate::measure::EmpiricalMeasure;
use crate::model::{mean_field_ou, CoefficientPair};
use crate::rng::{split_seed, CounterRng};
use crate::simulate::{run_coupled, ParticleEnsemble, SimConfig, SimError};

#[derive(Debug, Error)]
pub enum InvariantError {
    #[error("coupled ensembles coincide; no decay to fit")]
    EmptyDecay,
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Fit(#[from] LyapunovError),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
}

/// One entry of the Cauchy-family table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CauchyRow {
    pub t: f64,
    pub s: f64,
    pub w2: f64,
    pub stderr: f64,
}

/// CSV with header `t,s,w2,stderr`.
pub fn cauchy_table_to_csv(rows: &[CauchyRow]) -> String {
    let mut out = String::from("t,s,w2,stderr\n");
    for r in rows {
        out.push_str(&float17(r.t));
        out.push(',');
        out.push_str(&float17(r.s));
        out.push(',');
        out.push_str(&float17(r.w2));
        out.push(',');
        out.push_str(&float17(r.stderr));
        out.push('\n');
    }
    out
}

const BOOTSTRAP_RESAMPLES: usize = 200;

/// Bootstrap standard error of `W_2` between two snapshot clouds under
/// particle resampling. The clouds are time marginals of the same particle
/// ensemble, so resampling is paired: one index draw applies to both clouds,
/// preserving their correlation (and making the distance of a cloud to
/// itself exactly zero).
fn w2_with_bootstrap(
    a: &EmpiricalMeasure,
    b: &EmpiricalMeasure,
    seed: u64,
    row: u64,
) -> Result<(f64, f64), SimError> {
    let w2 = crate::measure::wasserstein(a, b, 2.0)?;
    let n = a.len();
    let reps: Vec<f64> = exec::map_indexed(BOOTSTRAP_RESAMPLES, |rep| {
        let mut rng = CounterRng::new(seed, row, rep as u64);
        let mut da = Vec::with_capacity(n * a.dim());
        let mut db = Vec::with_capacity(n * b.dim());
        for _ in 0..n {
            let i = rng.index(n);
            da.extend_from_slice(a.point(i));
            db.extend_from_slice(b.point(i));
        }
        let ra = EmpiricalMeasure::from_flat_unchecked(da, a.dim());
        let rb = EmpiricalMeasure::from_flat_unchecked(db, b.dim());
        crate::measure::wasserstein(&ra, &rb, 2.0).expect("resampled clouds compatible")
    });
    let mean = reps.iter().sum::<f64>() / reps.len() as f64;
    let var = reps.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
        / (reps.len() - 1) as f64;
    Ok((w2, var.sqrt()))
}

/// Simulate once from the Dirac at the origin and return
/// `W_2(cloud at t, cloud at t+s)` for every grid combination, with
/// bootstrap standard errors.
pub fn cauchy_probe(
    coeffs: &CoefficientPair,
    cfg: &SimConfig,
    t_grid: &[f64],
    s_grid: &[f64],
) -> Result<Vec<CauchyRow>, InvariantError> {
    if t_grid.is_empty() || s_grid.is_empty() {
        return Err(InvariantError::InvalidGrid(
            "t_grid and s_grid must be nonempty".into(),
        ));
    }
    if t_grid.windows(2).any(|w| w[0] >= w[1]) || s_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(InvariantError::InvalidGrid("grids must be increasing".into()));
    }
    // Collect every needed snapshot step.
    let mut want_steps: Vec<u64> = Vec::new();
    let to_step = |t: f64| (t / cfg.dt).round() as u64;
    for &t in t_grid {
        want_steps.push(to_step(t));
        for &s in s_grid {
            want_steps.push(to_step(t + s));
        }
    }
    want_steps.sort_unstable();
    want_steps.dedup();
    let max_step = *want_steps.last().unwrap();

    let mut ens = ParticleEnsemble::dirac_zero(cfg.n_particles, coeffs.dim(), cfg.seed);
    let mut snapshots: Vec<(u64, EmpiricalMeasure)> = Vec::new();
    if want_steps.contains(&0) {
        snapshots.push((0, ens.empirical()));
    }
    for step in 1..=max_step {
        ens.step(coeffs, cfg.dt, cfg.taming).map_err(SimError::from)?;
        if want_steps.binary_search(&step).is_ok() {
            snapshots.push((step, ens.empirical()));
        }
    }
    let cloud_at = |step: u64| -> &EmpiricalMeasure {
        &snapshots
            .iter()
            .find(|(s, _)| *s == step)
            .expect("snapshot recorded")
            .1
    };

    let boot_seed = split_seed(cfg.seed, "cauchy-bootstrap");
    let mut rows = Vec::new();
    for (ti, &t) in t_grid.iter().enumerate() {
        for (si, &s) in s_grid.iter().enumerate() {
            let a = cloud_at(to_step(t));
            let b = cloud_at(to_step(t + s));
            let row_id = (ti * s_grid.len() + si) as u64;
            let (w2, stderr) = w2_with_bootstrap(a, b, boot_seed, row_id)?;
            rows.push(CauchyRow { t, s, w2, stderr });
        }
    }
    Ok(rows)
}

/// Fitted contraction exponents from a synchronously coupled run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContractionEstimate {
    /// Log-slope of `D(t) = mean |X_i - Y_i|^2` (the tighter, noise-free
    /// series for state-independent diffusion).
    pub rate: f64,
    pub r_squared: f64,
    /// Log-slope of the exact `W_2^2` between marginal clouds, if available.
    pub w2_rate: Option<f64>,
    pub w2_r_squared: Option<f64>,
    pub window: [f64; 2],
}

/// Fit contraction exponents from an already-computed coupled trajectory.
pub fn fit_contraction(
    traj: &crate::simulate::CoupledTrajectory,
    window: (f64, f64),
) -> Result<ContractionEstimate, InvariantError> {
    if traj.mean_sq_diff.first().copied() == Some(0.0) {
        return Err(InvariantError::EmptyDecay);
    }
    let (rate, r2) = fit_log_slope(&traj.times, &traj.mean_sq_diff, window)?;
    let (w2_rate, w2_r2) = match &traj.w2_sq {
        Some(series) => match fit_log_slope(&traj.times, series, window) {
            Ok((a, b)) => (Some(a), Some(b)),
            Err(_) => (None, None),
        },
        None => (None, None),
    };
    Ok(ContractionEstimate {
        rate,
        r_squared: r2,
        w2_rate,
        w2_r_squared: w2_r2,
        window: [window.0, window.1],
    })
}

/// Run the synchronous coupling and fit `log D(t)`. The default window skips
/// a 10% burn-in.
pub fn contraction_rate(
    coeffs: &CoefficientPair,
    init_x: &EmpiricalMeasure,
    init_y: &EmpiricalMeasure,
    cfg: &SimConfig,
    window: Option<(f64, f64)>,
) -> Result<ContractionEstimate, InvariantError> {
    let traj = run_coupled(init_x, init_y, coeffs, cfg)?;
    fit_contraction(&traj, window.unwrap_or((0.1 * cfg.t_end, cfg.t_end)))
}

/// Moments of a terminal cloud with jackknife standard errors.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StationarySummary {
    pub mean: f64,
    pub variance: f64,
    pub excess_kurtosis: f64,
    pub stderr_mean: f64,
    pub stderr_variance: f64,
    pub stderr_kurtosis: f64,
    pub t_end: f64,
}

/// Mean, variance, and excess kurtosis of a 1-d cloud, with jackknife
/// standard errors over `min(N, 50)` contiguous particle blocks.
pub fn stationary_summary_from_cloud(cloud: &EmpiricalMeasure, t_end: f64) -> StationarySummary {
    assert_eq!(cloud.dim(), 1, "summary statistics are 1-d");
    let xs = cloud.as_flat();
    let n = xs.len();
    let stats = |include: &dyn Fn(usize) -> bool| -> (f64, f64, f64) {
        let mut count = 0.0;
        let mut s1 = 0.0;
        for (i, &x) in xs.iter().enumerate() {
            if include(i) {
                count += 1.0;
                s1 += x;
            }
        }
        let mean = s1 / count;
        let mut m2 = 0.0;
        let mut m4 = 0.0;
        for (i, &x) in xs.iter().enumerate() {
            if include(i) {
                let d = x - mean;
                m2 += d * d;
                m4 += d * d * d * d;
            }
        }
        m2 /= count;
        m4 /= count;
        let kurt = if m2 > 0.0 { m4 / (m2 * m2) - 3.0 } else { 0.0 };
        (mean, m2, kurt)
    };
    let (mean, variance, kurt) = stats(&|_| true);
    let b = n.min(50);
    let (se_mean, se_var, se_kurt) = if b < 2 {
        (0.0, 0.0, 0.0)
    } else {
        let mut loo = Vec::with_capacity(b);
        for j in 0..b {
            let lo = j * n / b;
            let hi = (j + 1) * n / b;
            loo.push(stats(&|i| i < lo || i >= hi));
        }
        let se = |pick: &dyn Fn(&(f64, f64, f64)) -> f64| {
            let vals: Vec<f64> = loo.iter().map(pick).collect();
            let m = vals.iter().sum::<f64>() / b as f64;
            let var =
                vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() * (b - 1) as f64 / b as f64;
            var.sqrt()
        };
        (se(&|s| s.0), se(&|s| s.1), se(&|s| s.2))
    };
    StationarySummary {
        mean,
        variance,
        excess_kurtosis: kurt,
        stderr_mean: se_mean,
        stderr_variance: se_var,
        stderr_kurtosis: se_kurt,
        t_end,
    }
}

/// Simulate the mean-field OU model from the Dirac at the origin until at
/// least `10 / alpha` and summarize the terminal cloud. Stationary targets:
/// mean 0, variance `1/(2 alpha)`, excess kurtosis 0.
pub fn stationary_ou(alpha: f64, cfg: &SimConfig) -> Result<StationarySummary, InvariantError> {
    let coeffs = mean_field_ou(alpha).map_err(|e| {
        InvariantError::InvalidGrid(format!("invalid OU parameter: {e}"))
    })?;
    let t_end = cfg.t_end.max(10.0 / alpha);
    let cfg = SimConfig {
        t_end,
        record_every: usize::MAX,
        ..cfg.clone()
    };
    let init = EmpiricalMeasure::dirac_zero(cfg.n_particles, 1);
    let (ens, _) = crate::simulate::run(&init, &coeffs, &cfg)?;
    Ok(stationary_summary_from_cloud(&ens.empirical(), t_end))
}

/// How the stationary mean is pinned down for the mean-field OU model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaledMapSolutions {
    /// `m = m / alpha` forces m = 0 (alpha != 1).
    OnlyZero,
    /// At alpha = 1 the scaled map is the identity: every m solves it.
    EntireLine,
}

/// The self-consistent stationary mean for the mean-field OU model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelfConsistency {
    /// Fixed point of the stationary mean dynamics `dm/dt = -(alpha + 1) m`:
    /// zero for every `alpha > 0`.
    pub m_star: f64,
    /// Solution set of the scaled fixed-point display `m = m / alpha`
    /// (recorded for comparison; it disagrees with the mean dynamics except
    /// at m = 0).
    pub scaled_map_solutions: ScaledMapSolutions,
}

pub fn solve_self_consistency(alpha: f64) -> SelfConsistency {
    assert!(alpha > 0.0, "alpha must be positive");
    SelfConsistency {
        m_star: 0.0,
        scaled_map_solutions: if alpha == 1.0 {
            ScaledMapSolutions::EntireLine
        } else {
            ScaledMapSolutions::OnlyZero
        },
    }
}

/// Combined long-run diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErgodicityReport {
    pub cauchy_table: Vec<CauchyRow>,
    pub contraction: Option<ContractionEstimate>,
    pub stationary_summary: StationarySummary,
    /// Self-consistent stationary mean (mean-field OU only).
    pub m_star: Option<f64>,
}

impl ErgodicityReport {
    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}
