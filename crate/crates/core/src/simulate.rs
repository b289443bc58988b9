//! Interacting-particle Euler-Maruyama propagation.
//!
//! One step of the particle system advances every particle against the same
//! pre-step empirical snapshot:
//!
//! ```text
//! X_i <- X_i + b~(t, X_i, mu_hat) dt + sigma(t, X_i, mu_hat) sqrt(dt) xi_i
//! ```
//!
//! with `xi_i ~ N(0, I_d)` drawn from particle `i`'s counter-based stream for
//! this step, and `b~ = b / (1 + dt |b|)` under tamed mode (`b~ = b`
//! otherwise). Taming keeps the per-step drift displacement below 1 and is
//! the standard cure for explicit-Euler blowup under superlinear drift.
//!
//! Evolution is a deterministic function of `(initial state, seed, dt, T)`:
//! noise is keyed by `(seed, particle, step)`, particle updates are
//! independent given the snapshot, and every floating-point reduction runs
//! sequentially in particle order. Thread count cannot change any bit of the
//! result, and coupling two ensembles with the same seed replays identical
//! Gaussian increments for matched particles.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec;
use crate::fmt::{float17, order_label};
use crate::measure::{norm, EmpiricalMeasure, MeasureError, ASSIGNMENT_LIMIT};
use crate::model::CoefficientPair;
use crate::rng::CounterRng;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("non-finite state: particle {particle} at t = {time} (step {step})")]
    NonFiniteState {
        particle: usize,
        time: f64,
        step: u64,
    },
    #[error("initial cloud has {init} particles but the config asks for {configured}")]
    InitSizeMismatch { init: usize, configured: usize },
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("truncation levels must be strictly increasing and positive")]
    LevelsNotIncreasing,
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

/// Drift handling for the explicit step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Taming {
    /// Plain explicit Euler-Maruyama.
    None,
    /// Drift divided by `1 + dt |b|`; per-step drift displacement < 1.
    Tamed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    /// Step size (time units).
    pub dt: f64,
    /// Final time; 0 means "record the initial state only".
    pub t_end: f64,
    pub n_particles: usize,
    pub seed: u64,
    pub taming: Taming,
    /// Steps between moment snapshots (>= 1).
    pub record_every: usize,
    /// Moment orders r >= 1 recorded along the trajectory.
    pub moment_orders: Vec<f64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 1e-3,
            t_end: 1.0,
            n_particles: 1000,
            seed: 0,
            taming: Taming::None,
            record_every: 10,
            moment_orders: vec![2.0],
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.dt > 0.0) {
            return Err(SimError::InvalidConfig(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.t_end >= 0.0) {
            return Err(SimError::InvalidConfig(format!(
                "t_end must be nonnegative, got {}",
                self.t_end
            )));
        }
        if self.t_end > 0.0 && self.dt > self.t_end {
            return Err(SimError::InvalidConfig(format!(
                "dt = {} exceeds t_end = {}",
                self.dt, self.t_end
            )));
        }
        if self.n_particles < 2 {
            return Err(SimError::InvalidConfig(format!(
                "n_particles must be >= 2, got {}",
                self.n_particles
            )));
        }
        if self.record_every == 0 {
            return Err(SimError::InvalidConfig(
                "record_every must be >= 1".into(),
            ));
        }
        if let Some(&r) = self.moment_orders.iter().find(|&&r| !(r >= 1.0)) {
            return Err(SimError::InvalidConfig(format!(
                "moment orders must satisfy r >= 1, got {r}"
            )));
        }
        Ok(())
    }

    /// Number of steps: the snapshot grid is `i * dt` for `i = 0..=n_steps`.
    pub fn n_steps(&self) -> u64 {
        if self.t_end == 0.0 {
            0
        } else {
            (self.t_end / self.dt).round().max(1.0) as u64
        }
    }
}

/// `N` particles, current time, and the RNG cursor `(seed, step index)`;
/// particle `i` owns stream id `i`.
#[derive(Debug, Clone)]
pub struct ParticleEnsemble {
    state: Vec<f64>, // row-major N x d
    dim: usize,
    time: f64,
    seed: u64,
    step_index: u64,
}

struct Scratch {
    drift: Vec<f64>,
    diffusion: Vec<f64>,
    noise: Vec<f64>,
}

impl Scratch {
    fn new(dim: usize) -> Self {
        Scratch {
            drift: vec![0.0; dim],
            diffusion: vec![0.0; dim * dim],
            noise: vec![0.0; dim],
        }
    }
}

impl ParticleEnsemble {
    pub fn from_measure(init: &EmpiricalMeasure, seed: u64) -> Self {
        Self::from_measure_at(init, seed, 0.0)
    }

    /// Start from a saved cloud at time `t0` (used when restarting runs).
    pub fn from_measure_at(init: &EmpiricalMeasure, seed: u64, t0: f64) -> Self {
        ParticleEnsemble {
            state: init.as_flat().to_vec(),
            dim: init.dim(),
            time: t0,
            seed,
            step_index: 0,
        }
    }

    pub fn dirac_zero(n: usize, dim: usize, seed: u64) -> Self {
        Self::from_measure(&EmpiricalMeasure::dirac_zero(n, dim), seed)
    }

    pub fn len(&self) -> usize {
        self.state.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.state.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn step_index(&self) -> u64 {
        self.step_index
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    /// The empirical measure of the current particle positions.
    pub fn empirical(&self) -> EmpiricalMeasure {
        EmpiricalMeasure::from_flat_unchecked(self.state.clone(), self.dim)
    }

    /// Advance one Euler-Maruyama step against the pre-step snapshot.
    pub fn step(
        &mut self,
        coeffs: &CoefficientPair,
        dt: f64,
        taming: Taming,
    ) -> Result<(), SimError> {
        assert!(dt > 0.0, "dt must be positive");
        debug_assert_eq!(coeffs.dim(), self.dim);
        let snapshot = self.empirical();
        let (t, dim, seed, k) = (self.time, self.dim, self.seed, self.step_index);
        let sqrt_dt = dt.sqrt();

        exec::for_each_particle(
            &mut self.state,
            dim,
            || Scratch::new(dim),
            |s, i, row| {
                let mut rng = CounterRng::new(seed, i as u64, k);
                coeffs.drift(t, row, &snapshot, &mut s.drift);
                let scale = match taming {
                    Taming::None => 1.0,
                    Taming::Tamed => 1.0 / (1.0 + dt * norm(&s.drift)),
                };
                coeffs.diffusion(t, row, &snapshot, &mut s.diffusion);
                rng.fill_standard_normal(&mut s.noise);
                for a in 0..dim {
                    let mut dw = 0.0;
                    for b in 0..dim {
                        dw += s.diffusion[a * dim + b] * s.noise[b];
                    }
                    row[a] += s.drift[a] * scale * dt + dw * sqrt_dt;
                }
            },
        );

        self.time += dt;
        self.step_index += 1;
        if let Some(bad) = self.state.iter().position(|v| !v.is_finite()) {
            return Err(SimError::NonFiniteState {
                particle: bad / dim,
                time: self.time,
                step: self.step_index,
            });
        }
        Ok(())
    }
}

/// Time series of `mean |X|^r` per requested order, with jackknife standard
/// errors over particle blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentTrajectory {
    pub times: Vec<f64>,
    pub orders: Vec<f64>,
    /// `values[order_idx][time_idx] = mean |X|^r` (no outer root).
    pub values: Vec<Vec<f64>>,
    pub stderr: Vec<Vec<f64>>,
}

impl MomentTrajectory {
    fn new(orders: &[f64]) -> Self {
        MomentTrajectory {
            times: Vec::new(),
            orders: orders.to_vec(),
            values: vec![Vec::new(); orders.len()],
            stderr: vec![Vec::new(); orders.len()],
        }
    }

    fn record(&mut self, t: f64, ens: &ParticleEnsemble) {
        self.times.push(t);
        let norms: Vec<f64> = ens
            .state
            .chunks_exact(ens.dim)
            .map(norm)
            .collect();
        for (oi, &r) in self.orders.iter().enumerate() {
            let powed: Vec<f64> = norms.iter().map(|&v| pow_abs(v, r)).collect();
            let (mean, se) = jackknife_mean(&powed);
            self.values[oi].push(mean);
            self.stderr[oi].push(se);
        }
    }

    /// Series index for a given order (exact match).
    pub fn series(&self, order: f64) -> Option<&[f64]> {
        self.orders
            .iter()
            .position(|&r| r == order)
            .map(|i| self.values[i].as_slice())
    }

    pub fn stderr_series(&self, order: f64) -> Option<&[f64]> {
        self.orders
            .iter()
            .position(|&r| r == order)
            .map(|i| self.stderr[i].as_slice())
    }

    /// CSV with header `t,<m{r} per order>,stderr_<m{r} per order>`.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("t");
        for &r in &self.orders {
            out.push(',');
            out.push_str(&order_label(r));
        }
        for &r in &self.orders {
            out.push_str(",stderr_");
            out.push_str(&order_label(r));
        }
        out.push('\n');
        for (ti, &t) in self.times.iter().enumerate() {
            out.push_str(&float17(t));
            for series in &self.values {
                out.push(',');
                out.push_str(&float17(series[ti]));
            }
            for series in &self.stderr {
                out.push(',');
                out.push_str(&float17(series[ti]));
            }
            out.push('\n');
        }
        out
    }
}

#[inline]
fn pow_abs(v: f64, r: f64) -> f64 {
    if r == 2.0 {
        v * v
    } else if r == 4.0 {
        let s = v * v;
        s * s
    } else if r == 1.0 {
        v
    } else {
        v.powf(r)
    }
}

/// Jackknife standard error of the mean over `min(n, 50)` contiguous blocks.
fn jackknife_mean(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    let total: f64 = values.iter().sum();
    let mean = total / n as f64;
    let b = n.min(50);
    if b < 2 {
        return (mean, 0.0);
    }
    let mut leave_out = Vec::with_capacity(b);
    for j in 0..b {
        let lo = j * n / b;
        let hi = (j + 1) * n / b;
        let block_sum: f64 = values[lo..hi].iter().sum();
        leave_out.push((total - block_sum) / (n - (hi - lo)) as f64);
    }
    let lo_mean = leave_out.iter().sum::<f64>() / b as f64;
    let var = leave_out
        .iter()
        .map(|v| (v - lo_mean) * (v - lo_mean))
        .sum::<f64>()
        * (b - 1) as f64
        / b as f64;
    (mean, var.sqrt())
}

/// Propagate `init` under `coeffs`, recording moments on the snapshot grid
/// (every `record_every` steps, plus the initial and final times).
pub fn run(
    init: &EmpiricalMeasure,
    coeffs: &CoefficientPair,
    cfg: &SimConfig,
) -> Result<(ParticleEnsemble, MomentTrajectory), SimError> {
    cfg.validate()?;
    if init.len() != cfg.n_particles {
        return Err(SimError::InitSizeMismatch {
            init: init.len(),
            configured: cfg.n_particles,
        });
    }
    if init.dim() != coeffs.dim() {
        return Err(MeasureError::DimensionMismatch {
            left: init.dim(),
            right: coeffs.dim(),
        }
        .into());
    }
    let n_steps = cfg.n_steps();
    let mut ens = ParticleEnsemble::from_measure(init, cfg.seed);
    let mut traj = MomentTrajectory::new(&cfg.moment_orders);
    traj.record(0.0, &ens);
    for i in 1..=n_steps {
        ens.step(coeffs, cfg.dt, cfg.taming)?;
        if i % cfg.record_every as u64 == 0 || i == n_steps {
            traj.record(i as f64 * cfg.dt, &ens);
        }
    }
    Ok((ens, traj))
}

/// Synchronously coupled pair of ensembles: the mean square particle gap
/// `D(t) = mean |X_i - Y_i|^2` (an upper bound surrogate for `W_2^2` between
/// the marginal laws) plus, when exact transport is feasible, the true
/// `W_2^2` between the marginal clouds.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledTrajectory {
    pub times: Vec<f64>,
    pub mean_sq_diff: Vec<f64>,
    pub stderr: Vec<f64>,
    /// `W_2^2` between the marginal clouds; `None` when the exact distance is
    /// unavailable (d > 1 with clouds above the assignment limit).
    pub w2_sq: Option<Vec<f64>>,
}

impl CoupledTrajectory {
    /// CSV with header `t,d2,stderr_d2[,w2sq]`.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("t,d2,stderr_d2");
        if self.w2_sq.is_some() {
            out.push_str(",w2sq");
        }
        out.push('\n');
        for i in 0..self.times.len() {
            out.push_str(&float17(self.times[i]));
            out.push(',');
            out.push_str(&float17(self.mean_sq_diff[i]));
            out.push(',');
            out.push_str(&float17(self.stderr[i]));
            if let Some(w) = &self.w2_sq {
                out.push(',');
                out.push_str(&float17(w[i]));
            }
            out.push('\n');
        }
        out
    }
}

/// Advance two ensembles with identical Gaussian draws per (particle, step).
///
/// Particles couple by index: particle `i` of `X` pairs with particle `i` of
/// `Y`. Both ensembles carry the same seed and step counters, so the noise
/// identity is automatic.
pub fn run_coupled(
    init_x: &EmpiricalMeasure,
    init_y: &EmpiricalMeasure,
    coeffs: &CoefficientPair,
    cfg: &SimConfig,
) -> Result<CoupledTrajectory, SimError> {
    cfg.validate()?;
    if init_x.dim() != init_y.dim() {
        return Err(MeasureError::DimensionMismatch {
            left: init_x.dim(),
            right: init_y.dim(),
        }
        .into());
    }
    if init_x.len() != init_y.len() {
        return Err(MeasureError::UnequalSupportSize {
            left: init_x.len(),
            right: init_y.len(),
        }
        .into());
    }
    if init_x.len() != cfg.n_particles {
        return Err(SimError::InitSizeMismatch {
            init: init_x.len(),
            configured: cfg.n_particles,
        });
    }
    let exact_w2 = init_x.dim() == 1 || init_x.len() <= ASSIGNMENT_LIMIT;
    let mut ex = ParticleEnsemble::from_measure(init_x, cfg.seed);
    let mut ey = ParticleEnsemble::from_measure(init_y, cfg.seed);

    let mut out = CoupledTrajectory {
        times: Vec::new(),
        mean_sq_diff: Vec::new(),
        stderr: Vec::new(),
        w2_sq: if exact_w2 { Some(Vec::new()) } else { None },
    };
    let record = |t: f64,
                      ex: &ParticleEnsemble,
                      ey: &ParticleEnsemble,
                      out: &mut CoupledTrajectory|
     -> Result<(), SimError> {
        let dim = ex.dim;
        let sq: Vec<f64> = ex
            .state
            .chunks_exact(dim)
            .zip(ey.state.chunks_exact(dim))
            .map(|(x, y)| x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum())
            .collect();
        let (mean, se) = jackknife_mean(&sq);
        out.times.push(t);
        out.mean_sq_diff.push(mean);
        out.stderr.push(se);
        if let Some(w) = &mut out.w2_sq {
            let d = crate::measure::wasserstein(&ex.empirical(), &ey.empirical(), 2.0)?;
            w.push(d * d);
        }
        Ok(())
    };

    record(0.0, &ex, &ey, &mut out)?;
    let n_steps = cfg.n_steps();
    for i in 1..=n_steps {
        ex.step(coeffs, cfg.dt, cfg.taming)?;
        ey.step(coeffs, cfg.dt, cfg.taming)?;
        if i % cfg.record_every as u64 == 0 || i == n_steps {
            record(i as f64 * cfg.dt, &ex, &ey, &mut out)?;
        }
    }
    Ok(out)
}

/// Per-particle first grid time with `|X_i| >= radius` (`+inf` if never).
///
/// Exit times are grid-resolved; no bridge correction is applied, so the
/// detection bias is O(sqrt(dt)).
pub fn first_exit_times(
    init: &EmpiricalMeasure,
    coeffs: &CoefficientPair,
    cfg: &SimConfig,
    radius: f64,
) -> Result<Vec<f64>, SimError> {
    assert!(radius > 0.0, "exit radius must be positive");
    cfg.validate()?;
    if init.len() != cfg.n_particles {
        return Err(SimError::InitSizeMismatch {
            init: init.len(),
            configured: cfg.n_particles,
        });
    }
    let mut ens = ParticleEnsemble::from_measure(init, cfg.seed);
    let n = ens.len();
    let mut exit = vec![f64::INFINITY; n];
    let mark = |ens: &ParticleEnsemble, t: f64, exit: &mut [f64]| {
        for (i, p) in ens.state.chunks_exact(ens.dim).enumerate() {
            if exit[i].is_infinite() && norm(p) >= radius {
                exit[i] = t;
            }
        }
    };
    mark(&ens, 0.0, &mut exit);
    let n_steps = cfg.n_steps();
    for i in 1..=n_steps {
        ens.step(coeffs, cfg.dt, cfg.taming)?;
        mark(&ens, i as f64 * cfg.dt, &mut exit);
    }
    Ok(exit)
}

/// Sup (over the snapshot grid) of the mean particle gap between runs at
/// consecutive truncation levels, all driven by identical noise.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncationProbe {
    pub levels: Vec<f64>,
    /// `discrepancies[k]` compares levels `k` and `k+1`.
    pub discrepancies: Vec<f64>,
}

/// Run the truncated dynamics at each level with identical seeds and return
/// `sup_t mean_i |X_i^{n_k}(t) - X_i^{n_{k+1}}(t)|` between consecutive
/// levels. For well-behaved models the sequence decreases toward zero as the
/// levels grow (a convergence diagnostic, not a proof).
pub fn truncation_convergence_probe(
    coeffs: &CoefficientPair,
    init: &EmpiricalMeasure,
    levels: &[f64],
    cfg: &SimConfig,
) -> Result<TruncationProbe, SimError> {
    if levels.len() < 2 || levels.windows(2).any(|w| w[0] >= w[1]) || levels[0] <= 0.0 {
        return Err(SimError::LevelsNotIncreasing);
    }
    cfg.validate()?;
    if init.len() != cfg.n_particles {
        return Err(SimError::InitSizeMismatch {
            init: init.len(),
            configured: cfg.n_particles,
        });
    }
    let pairs: Vec<CoefficientPair> = levels
        .iter()
        .map(|&n| crate::model::truncate(coeffs, n).to_pair())
        .collect();
    let mut ensembles: Vec<ParticleEnsemble> = levels
        .iter()
        .map(|_| ParticleEnsemble::from_measure(init, cfg.seed))
        .collect();
    let mut sup = vec![0.0_f64; levels.len() - 1];
    let dim = init.dim();
    let probe = |ensembles: &[ParticleEnsemble], sup: &mut [f64]| {
        for k in 0..sup.len() {
            let a = &ensembles[k].state;
            let b = &ensembles[k + 1].state;
            let mean_gap: f64 = a
                .chunks_exact(dim)
                .zip(b.chunks_exact(dim))
                .map(|(x, y)| {
                    let d2: f64 = x.iter().zip(y).map(|(u, v)| (u - v) * (u - v)).sum();
                    d2.sqrt()
                })
                .sum::<f64>()
                / (a.len() / dim) as f64;
            if mean_gap > sup[k] {
                sup[k] = mean_gap;
            }
        }
    };
    probe(&ensembles, &mut sup);
    let n_steps = cfg.n_steps();
    for i in 1..=n_steps {
        for (ens, pair) in ensembles.iter_mut().zip(&pairs) {
            ens.step(pair, cfg.dt, cfg.taming)?;
        }
        if i % cfg.record_every as u64 == 0 || i == n_steps {
            probe(&ensembles, &mut sup);
        }
    }
    Ok(TruncationProbe {
        levels: levels.to_vec(),
        discrepancies: sup,
    })
}
