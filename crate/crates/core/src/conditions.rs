//! Sampling-based falsifiers for structural assumptions on coefficients.
//!
//! Each checker sweeps a deterministic sample of states, times, and cloud
//! pairs and reports the extreme value of the relevant ratio together with
//! the witness tuple that achieved it. Checkers are samplers, not provers:
//! the outcome is either "no violation found, empirical constant = c" or a
//! concrete, replayable counterexample. Witnesses replay bit-exactly because
//! every reported value is computed by one of the pure per-sample functions
//! in this module ([`coefficient_gap`], [`lipschitz_ratio`], [`growth_ratio`],
//! [`monotonicity_ratio`]) applied to the stored tuple.
//!
//! The checked conditions, with `gap = |b(t,x,mu)-b(t,y,nu)| +
//! ||sigma(t,x,mu)-sigma(t,y,nu)||_HS`:
//!
//! - local Lipschitz: `gap <= C_N (|x-y| + W_r(mu, nu))` for `|x|,|y| <= N`
//!   (clouds supported in `[-N,N]^d` in the local-support mode, unrestricted
//!   otherwise);
//! - growth: `2<b(t,x,mu), x> + ||sigma||^2 <= K (1 + |x|^2 + ||mu||_r^2)`,
//!   flagged as violated when the fitted `K` keeps growing along the radius
//!   grid;
//! - continuity in measure: coefficient discrepancies vanish along cloud
//!   sequences converging in `W_r`;
//! - local Lipschitz with decaying global term: residual measure dependence
//!   beyond the truncated distance `W_{r,N}` fits under
//!   `C_N K e^(-delta C_N) (W_r /\ 1)`;
//! - integrated strong monotonicity: `mean(<db, x-y> + ||dsigma||_HS^2) <=
//!   -(C_1/2) mean |x-y|^2` over sampled couplings.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec;
use crate::fmt::float17;
use crate::measure::{wasserstein, wasserstein_local, Coupling, EmpiricalMeasure};
use crate::model::CoefficientPair;
use crate::rng::{split_seed, CounterRng};

#[derive(Debug, Error)]
pub enum ConditionsError {
    #[error("assumption {0} is not handled by this checker")]
    WrongAssumption(Assumption),
    #[error("unknown assumption name: {0}")]
    UnknownAssumption(String),
}

/// The structural assumptions a checker can target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Assumption {
    A1,
    A2,
    A3,
    A4,
    B1,
    B2,
    B3,
    H,
}

impl std::fmt::Display for Assumption {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Assumption::A1 => "A1",
            Assumption::A2 => "A2",
            Assumption::A3 => "A3",
            Assumption::A4 => "A4",
            Assumption::B1 => "B1",
            Assumption::B2 => "B2",
            Assumption::B3 => "B3",
            Assumption::H => "H",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Assumption {
    type Err = ConditionsError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A1" => Ok(Assumption::A1),
            "A2" => Ok(Assumption::A2),
            "A3" => Ok(Assumption::A3),
            "A4" => Ok(Assumption::A4),
            "B1" => Ok(Assumption::B1),
            "B2" => Ok(Assumption::B2),
            "B3" => Ok(Assumption::B3),
            "H" => Ok(Assumption::H),
            other => Err(ConditionsError::UnknownAssumption(other.into())),
        }
    }
}

/// Gaussian-mixture cloud generator parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CloudFamily {
    /// Maximum number of mixture components.
    pub components: usize,
    pub mean_range: (f64, f64),
    pub scale_range: (f64, f64),
    pub cloud_size: usize,
}

impl Default for CloudFamily {
    fn default() -> Self {
        CloudFamily {
            components: 3,
            mean_range: (-2.0, 2.0),
            scale_range: (0.05, 1.5),
            cloud_size: 32,
        }
    }
}

/// Sample plan shared by the checkers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleDesign {
    /// Sample tuples per radius level.
    pub n_points: usize,
    /// Increasing radius levels N.
    pub radius_grid: Vec<f64>,
    pub family: CloudFamily,
    pub seed: u64,
    /// Moment order r used in the distances and norms.
    pub r: f64,
    /// Times sampled for the time-dependent conditions.
    pub times: Vec<f64>,
    pub dim: usize,
}

impl Default for SampleDesign {
    fn default() -> Self {
        SampleDesign {
            n_points: 200,
            radius_grid: vec![1.0, 2.0, 4.0, 8.0],
            family: CloudFamily::default(),
            seed: 0,
            r: 2.0,
            times: vec![0.0, 1.0, 10.0],
            dim: 1,
        }
    }
}

/// Draw one cloud. Streams cycle through stress variants: exact Dirac at the
/// origin, near-Dirac, heavy dilation, and general Gaussian mixtures.
pub fn sample_cloud(
    family: &CloudFamily,
    dim: usize,
    seed: u64,
    stream: u64,
) -> EmpiricalMeasure {
    let mut rng = CounterRng::new(seed, stream, 0);
    let n = family.cloud_size;
    let mut data = vec![0.0; n * dim];
    match stream % 12 {
        0 => { /* exact Dirac at the origin */ }
        1 | 7 => {
            // near-Dirac around a random mean
            let mean: Vec<f64> = (0..dim)
                .map(|_| rng.uniform_in(family.mean_range.0, family.mean_range.1))
                .collect();
            for p in data.chunks_mut(dim) {
                for (v, m) in p.iter_mut().zip(&mean) {
                    *v = m + 1e-6 * rng.standard_normal();
                }
            }
        }
        5 => {
            // heavy dilation
            let scale = 8.0 * family.scale_range.1;
            for v in data.iter_mut() {
                *v = scale * rng.standard_normal();
            }
        }
        _ => {
            let k = 1 + rng.index(family.components.max(1));
            let comps: Vec<(Vec<f64>, f64)> = (0..k)
                .map(|_| {
                    let mean: Vec<f64> = (0..dim)
                        .map(|_| rng.uniform_in(family.mean_range.0, family.mean_range.1))
                        .collect();
                    let scale = rng.uniform_in(family.scale_range.0, family.scale_range.1);
                    (mean, scale)
                })
                .collect();
            for p in data.chunks_mut(dim) {
                let (mean, scale) = &comps[rng.index(k)];
                for (v, m) in p.iter_mut().zip(mean) {
                    *v = m + scale * rng.standard_normal();
                }
            }
        }
    }
    EmpiricalMeasure::from_flat(data, dim).expect("sampled cloud is finite and non-empty")
}

fn clamp_cloud_to_cube(mu: &EmpiricalMeasure, half_width: f64) -> EmpiricalMeasure {
    let data: Vec<f64> = mu
        .as_flat()
        .iter()
        .map(|v| v.clamp(-half_width, half_width))
        .collect();
    EmpiricalMeasure::from_flat(data, mu.dim()).expect("clamped cloud is valid")
}

/// The extreme sample of a checker run; replaying the stored tuple through
/// the matching per-sample function reproduces `value` bit-exactly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionWitness {
    pub t: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub mu: EmpiricalMeasure,
    pub nu: Option<EmpiricalMeasure>,
    pub value: f64,
}

/// Outcome of one assumption check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MarginReport {
    pub assumption: Assumption,
    /// Smallest constant consistent with the sample (meaning depends on the
    /// assumption: C_N for Lipschitz, K for growth, C_1 for monotonicity).
    pub best_constant: f64,
    pub violated: bool,
    /// Samples skipped because the denominator was degenerate.
    pub skipped: usize,
    /// (radius, empirical constant) along the radius grid, when applicable.
    pub per_radius: Vec<(f64, f64)>,
    pub witness: Option<ConditionWitness>,
}

impl MarginReport {
    /// JSON with witness clouds referenced as sidecar file names:
    /// `{assumption, best_constant, violated, witness:{t,x,y,mu_file,nu_file}, skipped}`.
    pub fn to_json_value(&self, mu_file: Option<&str>, nu_file: Option<&str>) -> serde_json::Value {
        let witness = self.witness.as_ref().map(|w| {
            serde_json::json!({
                "t": w.t,
                "x": w.x,
                "y": w.y,
                "mu_file": mu_file,
                "nu_file": nu_file,
                "value": w.value,
            })
        });
        serde_json::json!({
            "assumption": self.assumption.to_string(),
            "best_constant": self.best_constant,
            "violated": self.violated,
            "witness": witness,
            "skipped": self.skipped,
            "per_radius": self.per_radius.iter().map(|(r, c)| serde_json::json!([r, c])).collect::<Vec<_>>(),
        })
    }

    /// Human-readable one-line summary.
    pub fn summary_line(&self) -> String {
        format!(
            "{}: best_constant = {}, violated = {}, skipped = {}",
            self.assumption,
            float17(self.best_constant),
            self.violated,
            self.skipped
        )
    }
}

/// `|b(t,x,mu) - b(t,y,nu)| + ||sigma(t,x,mu) - sigma(t,y,nu)||_HS`.
pub fn coefficient_gap(
    coeffs: &CoefficientPair,
    t: f64,
    x: &[f64],
    y: &[f64],
    mu: &EmpiricalMeasure,
    nu: &EmpiricalMeasure,
) -> f64 {
    let bx = coeffs.drift_vec(t, x, mu);
    let by = coeffs.drift_vec(t, y, nu);
    let sx = coeffs.diffusion_mat(t, x, mu);
    let sy = coeffs.diffusion_mat(t, y, nu);
    let db: f64 = bx
        .iter()
        .zip(&by)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let ds: f64 = sx
        .iter()
        .zip(&sy)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    db + ds
}

const DENOM_FLOOR: f64 = 1e-12;

/// Lipschitz ratio `gap / (|x-y| + W_r(mu,nu))`, or `None` when the
/// denominator sits below the degeneracy floor.
pub fn lipschitz_ratio(
    coeffs: &CoefficientPair,
    t: f64,
    x: &[f64],
    y: &[f64],
    mu: &EmpiricalMeasure,
    nu: &EmpiricalMeasure,
    r: f64,
) -> Option<f64> {
    let dx: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let w = wasserstein(mu, nu, r).expect("sampled clouds are compatible");
    let denom = dx + w;
    if denom < DENOM_FLOOR {
        return None;
    }
    Some(coefficient_gap(coeffs, t, x, y, mu, nu) / denom)
}

/// Growth ratio. `A2` mode: `(2<b,x> + ||sigma||^2) / (1 + |x|^2 + ||mu||_r^2)`.
/// `B2` mode follows the split form: the drift part is normalized by
/// `1 + |x|^2 + ||mu||_r` (first power) and the diffusion part by
/// `1 + |x|^2 + ||mu||_r^2`; the larger ratio is returned.
pub fn growth_ratio(
    coeffs: &CoefficientPair,
    t: f64,
    x: &[f64],
    mu: &EmpiricalMeasure,
    r: f64,
    assumption: Assumption,
) -> f64 {
    let b = coeffs.drift_vec(t, x, mu);
    let s = coeffs.diffusion_mat(t, x, mu);
    let bx: f64 = b.iter().zip(x).map(|(bi, xi)| bi * xi).sum();
    let s2: f64 = s.iter().map(|v| v * v).sum();
    let x2: f64 = x.iter().map(|v| v * v).sum();
    let mu_norm = mu.moment(r);
    match assumption {
        Assumption::B2 => {
            let drift_ratio = 2.0 * bx / (1.0 + x2 + mu_norm);
            let diff_ratio = s2 / (1.0 + x2 + mu_norm * mu_norm);
            drift_ratio.max(diff_ratio)
        }
        _ => (2.0 * bx + s2) / (1.0 + x2 + mu_norm * mu_norm),
    }
}

/// Integrated monotonicity ratio under the index coupling of two equally
/// sized clouds: `mean(<db, x-y> + ||dsigma||_HS^2) / mean |x-y|^2`, or
/// `None` when the coupling is degenerate (`mean |x-y|^2 < 1e-24`).
/// Coefficients are evaluated at `t = 0` (the condition is for autonomous
/// coefficients).
pub fn monotonicity_ratio(
    coeffs: &CoefficientPair,
    mu: &EmpiricalMeasure,
    nu: &EmpiricalMeasure,
) -> Option<f64> {
    let n = mu.len();
    assert_eq!(n, nu.len(), "monotonicity requires equal cloud sizes");
    let t = 0.0;
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..n {
        let x = mu.point(i);
        let y = nu.point(i);
        let bx = coeffs.drift_vec(t, x, mu);
        let by = coeffs.drift_vec(t, y, nu);
        let sx = coeffs.diffusion_mat(t, x, mu);
        let sy = coeffs.diffusion_mat(t, y, nu);
        let mut inner = 0.0;
        for k in 0..x.len() {
            inner += (bx[k] - by[k]) * (x[k] - y[k]);
            den += (x[k] - y[k]) * (x[k] - y[k]);
        }
        let ds2: f64 = sx.iter().zip(&sy).map(|(a, b)| (a - b) * (a - b)).sum();
        num += inner + ds2;
    }
    if den / (n as f64) < 1e-24 {
        return None;
    }
    Some(num / den)
}

struct Extreme {
    value: f64,
    witness: Option<ConditionWitness>,
}

impl Extreme {
    fn new() -> Self {
        Extreme {
            value: f64::NEG_INFINITY,
            witness: None,
        }
    }

    fn offer(&mut self, value: f64, witness: impl FnOnce() -> ConditionWitness) {
        if value > self.value {
            self.value = value;
            self.witness = Some(witness());
        }
    }
}

/// Local Lipschitz check (`A1` with clouds supported in the radius cube,
/// `B1` with unrestricted clouds). Reports the empirical `C_N` per radius;
/// `best_constant` is the overall maximum. Never flags `violated`: a finite
/// sample always admits a finite constant, so the per-radius curve is the
/// diagnostic.
pub fn check_local_lipschitz(
    coeffs: &CoefficientPair,
    design: &SampleDesign,
    assumption: Assumption,
) -> MarginReport {
    assert!(
        matches!(assumption, Assumption::A1 | Assumption::B1),
        "check_local_lipschitz handles A1/B1"
    );
    let seed = split_seed(design.seed, "lipschitz");
    let mut per_radius = Vec::new();
    let mut extreme = Extreme::new();
    let mut skipped = 0usize;
    for (ri, &radius) in design.radius_grid.iter().enumerate() {
        struct Sample {
            ratio: Option<f64>,
            t: f64,
            x: Vec<f64>,
            y: Vec<f64>,
            mu: EmpiricalMeasure,
            nu: EmpiricalMeasure,
        }
        let samples: Vec<Sample> = exec::map_indexed(design.n_points, |s| {
            let stream = (ri * design.n_points + s) as u64;
            let mut rng = CounterRng::new(seed, stream, 1);
            let t = design.times[s % design.times.len()];
            let draw_point = |rng: &mut CounterRng| -> Vec<f64> {
                let v: Vec<f64> = (0..design.dim)
                    .map(|_| rng.uniform_in(-radius, radius))
                    .collect();
                crate::measure::radial_clip(&v, radius)
            };
            let x = draw_point(&mut rng);
            let y = draw_point(&mut rng);
            let mut mu = sample_cloud(&design.family, design.dim, seed, 2 * stream);
            let mut nu = sample_cloud(&design.family, design.dim, seed, 2 * stream + 1);
            if assumption == Assumption::A1 {
                mu = clamp_cloud_to_cube(&mu, radius);
                nu = clamp_cloud_to_cube(&nu, radius);
            }
            let ratio = lipschitz_ratio(coeffs, t, &x, &y, &mu, &nu, design.r);
            Sample {
                ratio,
                t,
                x,
                y,
                mu,
                nu,
            }
        });
        let mut radius_max = 0.0_f64;
        for s in samples {
            match s.ratio {
                None => skipped += 1,
                Some(ratio) => {
                    radius_max = radius_max.max(ratio);
                    extreme.offer(ratio, || ConditionWitness {
                        t: s.t,
                        x: s.x.clone(),
                        y: s.y.clone(),
                        mu: s.mu.clone(),
                        nu: Some(s.nu.clone()),
                        value: ratio,
                    });
                }
            }
        }
        per_radius.push((radius, radius_max));
    }
    MarginReport {
        assumption,
        best_constant: extreme.value.max(0.0),
        violated: false,
        skipped,
        per_radius,
        witness: extreme.witness,
    }
}

/// Growth check (`A2` joint form, `B2` split form). `best_constant` is the
/// smallest `K` consistent with the sample; `violated` flags an unbounded
/// fitted `K` along the radius grid (strictly increasing with at least a
/// factor 4 from first to last radius).
pub fn check_growth(
    coeffs: &CoefficientPair,
    design: &SampleDesign,
    assumption: Assumption,
) -> MarginReport {
    assert!(
        matches!(assumption, Assumption::A2 | Assumption::B2),
        "check_growth handles A2/B2"
    );
    let seed = split_seed(design.seed, "growth");
    let mut per_radius = Vec::new();
    let mut extreme = Extreme::new();
    for (ri, &radius) in design.radius_grid.iter().enumerate() {
        struct Sample {
            ratio: f64,
            t: f64,
            x: Vec<f64>,
            mu: EmpiricalMeasure,
        }
        let samples: Vec<Sample> = exec::map_indexed(design.n_points, |s| {
            let stream = (ri * design.n_points + s) as u64;
            let mut rng = CounterRng::new(seed, stream, 2);
            let t = design.times[s % design.times.len()];
            // Anchor the first sample of each radius at the origin against
            // the Dirac cloud (stream 0 of the sampler).
            let (x, mu) = if s == 0 {
                (
                    vec![0.0; design.dim],
                    sample_cloud(&design.family, design.dim, seed, 0),
                )
            } else {
                let v: Vec<f64> = (0..design.dim)
                    .map(|_| rng.uniform_in(-radius, radius))
                    .collect();
                (
                    crate::measure::radial_clip(&v, radius),
                    sample_cloud(&design.family, design.dim, seed, stream),
                )
            };
            let ratio = growth_ratio(coeffs, t, &x, &mu, design.r, assumption);
            Sample { ratio, t, x, mu }
        });
        let mut radius_max = f64::NEG_INFINITY;
        for s in samples {
            radius_max = radius_max.max(s.ratio);
            extreme.offer(s.ratio, || ConditionWitness {
                t: s.t,
                x: s.x.clone(),
                y: Vec::new(),
                mu: s.mu.clone(),
                nu: None,
                value: s.ratio,
            });
        }
        per_radius.push((radius, radius_max));
    }
    let strictly_growing = per_radius.windows(2).all(|w| w[1].1 > w[0].1);
    let first = per_radius.first().map(|&(_, k)| k).unwrap_or(0.0);
    let last = per_radius.last().map(|&(_, k)| k).unwrap_or(0.0);
    let violated = strictly_growing && last > 0.0 && (first <= 0.0 || last >= 4.0 * first);
    MarginReport {
        assumption,
        best_constant: extreme.value,
        violated,
        skipped: 0,
        per_radius,
        witness: extreme.witness,
    }
}

/// Continuity in measure: along cloud sequences `mu^k -> mu` (additive
/// perturbations shrinking by a factor 10 per level), the sup over a state
/// grid of the coefficient discrepancy must fall below `1e-6` times its
/// initial value. `best_constant` is the worst final/initial ratio.
pub fn check_continuity_in_measure(
    coeffs: &CoefficientPair,
    design: &SampleDesign,
) -> MarginReport {
    let seed = split_seed(design.seed, "continuity");
    let levels = 8usize;
    let radius = design.radius_grid.last().copied().unwrap_or(1.0);
    let grid: Vec<Vec<f64>> = (0..9)
        .map(|i| {
            let frac = i as f64 / 8.0;
            vec![-radius + 2.0 * radius * frac; design.dim]
        })
        .collect();
    let n_targets = 5usize.min(design.n_points.max(1));
    let mut extreme = Extreme::new();
    let mut worst_ratio = 0.0_f64;
    let mut violated = false;
    for target in 0..n_targets {
        // Target 0 is the exact Dirac at the origin (sampler stream 0):
        // a deliberate boundary-stress target for indicator-style
        // discontinuities that random clouds would never sit on.
        let stream = if target == 0 { 0 } else { 100 + target as u64 };
        let mu = sample_cloud(&design.family, design.dim, seed, stream);
        let mut rng = CounterRng::new(seed, target as u64, 3);
        let direction: Vec<f64> = (0..mu.as_flat().len())
            .map(|_| rng.standard_normal())
            .collect();
        let mut first = 0.0_f64;
        let mut last = 0.0_f64;
        for level in 0..levels {
            let eps = 10f64.powi(-(level as i32));
            let data: Vec<f64> = mu
                .as_flat()
                .iter()
                .zip(&direction)
                .map(|(v, d)| v + eps * d)
                .collect();
            let mu_k = EmpiricalMeasure::from_flat(data, design.dim).expect("finite");
            let mut disc = 0.0_f64;
            let mut disc_at: Option<(f64, Vec<f64>)> = None;
            for t in &design.times {
                for x in &grid {
                    let gap = coefficient_gap(coeffs, *t, x, x, &mu_k, &mu);
                    if gap > disc {
                        disc = gap;
                        disc_at = Some((*t, x.clone()));
                    }
                }
            }
            if level == 0 {
                first = disc;
            }
            if level == levels - 1 {
                last = disc;
                if let Some((t, x)) = disc_at {
                    extreme.offer(disc, || ConditionWitness {
                        t,
                        x: x.clone(),
                        y: x.clone(),
                        mu: mu_k.clone(),
                        nu: Some(mu.clone()),
                        value: disc,
                    });
                }
            }
        }
        let ratio = if first > 0.0 { last / first } else { 0.0 };
        worst_ratio = worst_ratio.max(ratio);
        if first > 0.0 && last > 1e-6 * first {
            violated = true;
        }
    }
    MarginReport {
        assumption: Assumption::A3,
        best_constant: worst_ratio,
        violated,
        skipped: 0,
        per_radius: Vec::new(),
        witness: extreme.witness,
    }
}

/// Local Lipschitz with decaying global measure term (`A4`/`B3`): using the
/// empirical `C_N` from the plain Lipschitz pass, the residual
/// `(gap - C_N |x-y| - C_N W_{r,N}) / (W_r /\ 1)` must stay below
/// `C_N K e^(-delta C_N)`. `best_constant` is the smallest feasible `K` at
/// the given `delta`.
pub fn check_local_with_decay(
    coeffs: &CoefficientPair,
    design: &SampleDesign,
    decay_k: f64,
    delta: f64,
) -> MarginReport {
    assert!(decay_k > 0.0 && delta > 0.0);
    let seed = split_seed(design.seed, "local-decay");
    let lip = check_local_lipschitz(coeffs, design, Assumption::B1);
    let mut per_radius = Vec::new();
    let mut extreme = Extreme::new();
    let mut skipped = 0usize;
    let mut best_k = 0.0_f64;
    let mut violated = false;
    for (ri, &radius) in design.radius_grid.iter().enumerate() {
        let c_n = lip.per_radius[ri].1.max(DENOM_FLOOR);
        struct Sample {
            residual: Option<f64>,
            t: f64,
            x: Vec<f64>,
            y: Vec<f64>,
            mu: EmpiricalMeasure,
            nu: EmpiricalMeasure,
        }
        let samples: Vec<Sample> = exec::map_indexed(design.n_points, |s| {
            let stream = (ri * design.n_points + s) as u64;
            let mut rng = CounterRng::new(seed, stream, 4);
            let t = design.times[s % design.times.len()];
            let draw_point = |rng: &mut CounterRng| -> Vec<f64> {
                let v: Vec<f64> = (0..design.dim)
                    .map(|_| rng.uniform_in(-radius, radius))
                    .collect();
                crate::measure::radial_clip(&v, radius)
            };
            let x = draw_point(&mut rng);
            let y = draw_point(&mut rng);
            // Clouds straddle the radius ball: means drawn up to 1.5 radius.
            let straddle = CloudFamily {
                mean_range: (-1.5 * radius, 1.5 * radius),
                ..design.family.clone()
            };
            let mu = sample_cloud(&straddle, design.dim, seed, 2 * stream);
            let nu = sample_cloud(&straddle, design.dim, seed, 2 * stream + 1);
            let w_full = wasserstein(&mu, &nu, design.r).expect("compatible clouds");
            let w_cap = w_full.min(1.0);
            if w_cap < DENOM_FLOOR {
                return Sample {
                    residual: None,
                    t,
                    x,
                    y,
                    mu,
                    nu,
                };
            }
            let w_local =
                wasserstein_local(&mu, &nu, design.r, radius).expect("compatible clouds");
            let dx: f64 = x
                .iter()
                .zip(&y)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            let gap = coefficient_gap(coeffs, t, &x, &y, &mu, &nu);
            let residual = (gap - c_n * dx - c_n * w_local) / w_cap;
            Sample {
                residual: Some(residual),
                t,
                x,
                y,
                mu,
                nu,
            }
        });
        let mut radius_max = 0.0_f64;
        for s in samples {
            match s.residual {
                None => skipped += 1,
                Some(res) => {
                    radius_max = radius_max.max(res);
                    extreme.offer(res, || ConditionWitness {
                        t: s.t,
                        x: s.x.clone(),
                        y: s.y.clone(),
                        mu: s.mu.clone(),
                        nu: Some(s.nu.clone()),
                        value: res,
                    });
                }
            }
        }
        per_radius.push((radius, radius_max));
        let budget = c_n * decay_k * (-delta * c_n).exp();
        if radius_max > budget {
            violated = true;
        }
        let feasible_k = radius_max.max(0.0) * (delta * c_n).exp() / c_n;
        best_k = best_k.max(feasible_k);
    }
    MarginReport {
        assumption: Assumption::A4,
        best_constant: best_k,
        violated,
        skipped,
        per_radius,
        witness: extreme.witness,
    }
}

/// Integrated strong monotonicity. Couplings sampled per cloud pair: the
/// index coupling, the `W_2`-optimal coupling, random permutations, plus
/// designed mean-zero and constant displacement pairs (the extremes of the
/// ratio). `best_constant` is the largest `C_1` consistent with the sample
/// (`-2 x` the worst ratio); `violated` when no strictly positive `C_1`
/// fits. The reported witness clouds are stored in coupling order, so the
/// index coupling on them replays the margin.
pub fn check_strong_monotonicity(
    coeffs: &CoefficientPair,
    design: &SampleDesign,
) -> MarginReport {
    let seed = split_seed(design.seed, "monotonicity");
    let n_pairs = design.n_points.max(1);
    struct PairResult {
        max_ratio: f64,
        witness: Option<(EmpiricalMeasure, EmpiricalMeasure, f64)>,
        skipped: usize,
    }
    let results: Vec<PairResult> = exec::map_indexed(n_pairs, |s| {
        let stream = s as u64;
        let mut rng = CounterRng::new(seed, stream, 5);
        let mu = sample_cloud(&design.family, design.dim, seed, 3 * stream);
        let nu = sample_cloud(&design.family, design.dim, seed, 3 * stream + 1);
        let n = mu.len();
        let mut couplings: Vec<Coupling> = vec![Coupling::identity(n)];
        if let Ok(opt) = Coupling::optimal(&mu, &nu, 2.0) {
            couplings.push(opt);
        }
        for _ in 0..2 {
            let mut perm: Vec<usize> = (0..n).collect();
            // Fisher-Yates from the sample's own stream.
            for i in (1..n).rev() {
                let j = rng.index(i + 1);
                perm.swap(i, j);
            }
            if let Ok(c) = Coupling::from_permutation(&perm) {
                couplings.push(c);
            }
        }
        let mut best = PairResult {
            max_ratio: f64::NEG_INFINITY,
            witness: None,
            skipped: 0,
        };
        let offer =
            |mu_o: &EmpiricalMeasure, nu_o: &EmpiricalMeasure, best: &mut PairResult| match monotonicity_ratio(coeffs, mu_o, nu_o) {
                None => best.skipped += 1,
                Some(ratio) => {
                    if ratio > best.max_ratio {
                        best.max_ratio = ratio;
                        best.witness = Some((mu_o.clone(), nu_o.clone(), ratio));
                    }
                }
            };
        for c in &couplings {
            // Reorder both clouds by the coupling so the index pairing on the
            // stored clouds replays the exact ratio.
            let mut mu_data = Vec::with_capacity(n * design.dim);
            let mut nu_data = Vec::with_capacity(n * design.dim);
            for &(i, j) in c.pairs() {
                mu_data.extend_from_slice(mu.point(i));
                nu_data.extend_from_slice(nu.point(j));
            }
            let mu_o = EmpiricalMeasure::from_flat(mu_data, design.dim).expect("finite");
            let nu_o = EmpiricalMeasure::from_flat(nu_data, design.dim).expect("finite");
            offer(&mu_o, &nu_o, &mut best);
        }
        // Mean-zero displacement of mu (alternating signs) and a constant
        // displacement: the two extremes of the mean-difference term.
        let scale = rng.uniform_in(0.1, 2.0);
        let displaced: Vec<f64> = mu
            .as_flat()
            .iter()
            .enumerate()
            .map(|(k, v)| {
                let sign = if (k / design.dim) % 2 == 0 { 1.0 } else { -1.0 };
                v + sign * scale
            })
            .collect();
        let nu_zero_mean =
            EmpiricalMeasure::from_flat(displaced, design.dim).expect("finite");
        offer(&mu, &nu_zero_mean, &mut best);
        let shifted: Vec<f64> = mu.as_flat().iter().map(|v| v + scale).collect();
        let nu_shift = EmpiricalMeasure::from_flat(shifted, design.dim).expect("finite");
        offer(&mu, &nu_shift, &mut best);
        best
    });

    let mut extreme = Extreme::new();
    let mut skipped = 0usize;
    for res in results {
        skipped += res.skipped;
        if let Some((mu, nu, ratio)) = res.witness {
            extreme.offer(ratio, || ConditionWitness {
                t: 0.0,
                x: Vec::new(),
                y: Vec::new(),
                mu: mu.clone(),
                nu: Some(nu.clone()),
                value: ratio,
            });
        }
    }
    let max_ratio = extreme.value;
    MarginReport {
        assumption: Assumption::H,
        best_constant: -2.0 * max_ratio,
        violated: !(max_ratio < 0.0),
        skipped,
        per_radius: Vec::new(),
        witness: extreme.witness,
    }
}
