//! Measure-dependent Lyapunov functions and the generator `L^mu`.
//!
//! A [`LyapunovBundle`] carries `V(t, x, mu)` together with its analytic
//! derivatives: time derivative, state gradient and Hessian, the measure
//! derivative `d_mu V(t, x, mu)(y)` (the derivative along mass transport,
//! evaluated at cloud points), and its `y`-derivative. Derivatives are
//! supplied, never computed symbolically; [`validate_bundle`] checks a bundle
//! against finite differences, including an empirical probe of the measure
//! derivative (shift one cloud point by `h`, scale the response by `N/h`).
//!
//! The generator combines them as
//!
//! ```text
//! (L^mu V)(t,x,mu) = dV/dt + <b, grad_x V> + 1/2 tr(sigma sigma^T hess_x V)
//!     + mean_y [ <b(t,y,mu), d_mu V(t,x,mu)(y)>
//!                + 1/2 tr(sigma sigma^T(t,y,mu) d_y d_mu V(t,x,mu)(y)) ]
//! ```
//!
//! with the `mu(dy)` integral realized as the empirical average over the
//! cloud itself. Integrating `L^mu V` against `mu` and testing
//! `integral <= -gamma integral V` gives the drift inequality behind moment
//! exponential decay; the checkers here are falsifiers over sampled clouds,
//! reporting margins and witnesses, never proofs.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec;
use crate::measure::{norm, EmpiricalMeasure};
use crate::model::CoefficientPair;
use crate::simulate::MomentTrajectory;

#[derive(Debug, Error)]
pub enum LyapunovError {
    #[error("window [{lo}, {hi}] contains {found} snapshots; need at least 5")]
    EmptyWindow { lo: f64, hi: f64, found: usize },
    #[error("nonpositive moment value {value} at t = {t}; cannot take logs")]
    NonpositiveMoment { t: f64, value: f64 },
    #[error("moment order {0} was not recorded in the trajectory")]
    OrderNotRecorded(f64),
    #[error("claimed decay requires a positive rate, got gamma = {0}")]
    NonpositiveGamma(f64),
}

type ScalarFn = dyn Fn(f64, &[f64], &EmpiricalMeasure) -> f64 + Send + Sync;
type VectorFn = dyn Fn(f64, &[f64], &EmpiricalMeasure, &mut [f64]) + Send + Sync;
type MeasureVecFn = dyn Fn(f64, &[f64], &EmpiricalMeasure, &[f64], &mut [f64]) + Send + Sync;

/// Structural shape of a bundle; lets evaluation skip identically-zero parts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BundleKind {
    /// General V(t, x, mu).
    Full,
    /// No measure dependence: `d_mu V` and `d_y d_mu V` vanish identically.
    StateOnly,
    /// No (t, x) dependence: state derivatives vanish identically.
    MeasureOnly,
}

/// `V` with its six analytic derivatives. All callables must be total and
/// deterministic; vector/matrix callables write into zeroed buffers.
#[derive(Clone)]
pub struct LyapunovBundle {
    dim: usize,
    kind: BundleKind,
    v: Arc<ScalarFn>,
    dv_dt: Arc<ScalarFn>,
    grad_x: Arc<VectorFn>,
    hess_x: Arc<VectorFn>,
    dmu: Arc<MeasureVecFn>,
    dy_dmu: Arc<MeasureVecFn>,
}

impl std::fmt::Debug for LyapunovBundle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LyapunovBundle")
            .field("dim", &self.dim)
            .field("kind", &self.kind)
            .finish()
    }
}

#[allow(clippy::too_many_arguments)]
impl LyapunovBundle {
    pub fn new<V, T, G, H, M, Y>(
        dim: usize,
        v: V,
        dv_dt: T,
        grad_x: G,
        hess_x: H,
        dmu: M,
        dy_dmu: Y,
    ) -> Self
    where
        V: Fn(f64, &[f64], &EmpiricalMeasure) -> f64 + Send + Sync + 'static,
        T: Fn(f64, &[f64], &EmpiricalMeasure) -> f64 + Send + Sync + 'static,
        G: Fn(f64, &[f64], &EmpiricalMeasure, &mut [f64]) + Send + Sync + 'static,
        H: Fn(f64, &[f64], &EmpiricalMeasure, &mut [f64]) + Send + Sync + 'static,
        M: Fn(f64, &[f64], &EmpiricalMeasure, &[f64], &mut [f64]) + Send + Sync + 'static,
        Y: Fn(f64, &[f64], &EmpiricalMeasure, &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        assert!(dim >= 1);
        LyapunovBundle {
            dim,
            kind: BundleKind::Full,
            v: Arc::new(v),
            dv_dt: Arc::new(dv_dt),
            grad_x: Arc::new(grad_x),
            hess_x: Arc::new(hess_x),
            dmu: Arc::new(dmu),
            dy_dmu: Arc::new(dy_dmu),
        }
    }

    /// Measure-independent V: the measure derivatives are identically zero.
    pub fn state_only<V, T, G, H>(dim: usize, v: V, dv_dt: T, grad_x: G, hess_x: H) -> Self
    where
        V: Fn(f64, &[f64], &EmpiricalMeasure) -> f64 + Send + Sync + 'static,
        T: Fn(f64, &[f64], &EmpiricalMeasure) -> f64 + Send + Sync + 'static,
        G: Fn(f64, &[f64], &EmpiricalMeasure, &mut [f64]) + Send + Sync + 'static,
        H: Fn(f64, &[f64], &EmpiricalMeasure, &mut [f64]) + Send + Sync + 'static,
    {
        let mut b = Self::new(
            dim,
            v,
            dv_dt,
            grad_x,
            hess_x,
            |_, _, _, _, _: &mut [f64]| {},
            |_, _, _, _, _: &mut [f64]| {},
        );
        b.kind = BundleKind::StateOnly;
        b
    }

    /// V depending on the measure only (no (t, x) dependence).
    pub fn measure_only<V, M, Y>(dim: usize, v: V, dmu: M, dy_dmu: Y) -> Self
    where
        V: Fn(f64, &[f64], &EmpiricalMeasure) -> f64 + Send + Sync + 'static,
        M: Fn(f64, &[f64], &EmpiricalMeasure, &[f64], &mut [f64]) + Send + Sync + 'static,
        Y: Fn(f64, &[f64], &EmpiricalMeasure, &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        let mut b = Self::new(
            dim,
            v,
            |_, _, _| 0.0,
            |_, _, _, _: &mut [f64]| {},
            |_, _, _, _: &mut [f64]| {},
            dmu,
            dy_dmu,
        );
        b.kind = BundleKind::MeasureOnly;
        b
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> BundleKind {
        self.kind
    }

    pub fn v(&self, t: f64, x: &[f64], mu: &EmpiricalMeasure) -> f64 {
        (self.v)(t, x, mu)
    }

    pub fn dv_dt(&self, t: f64, x: &[f64], mu: &EmpiricalMeasure) -> f64 {
        (self.dv_dt)(t, x, mu)
    }

    pub fn grad_x(&self, t: f64, x: &[f64], mu: &EmpiricalMeasure, out: &mut [f64]) {
        out.fill(0.0);
        (self.grad_x)(t, x, mu, out);
    }

    pub fn hess_x(&self, t: f64, x: &[f64], mu: &EmpiricalMeasure, out: &mut [f64]) {
        out.fill(0.0);
        (self.hess_x)(t, x, mu, out);
    }

    pub fn dmu(&self, t: f64, x: &[f64], mu: &EmpiricalMeasure, y: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        (self.dmu)(t, x, mu, y, out);
    }

    pub fn dy_dmu(&self, t: f64, x: &[f64], mu: &EmpiricalMeasure, y: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        (self.dy_dmu)(t, x, mu, y, out);
    }
}

/// `V(x, mu) = (x^2 + alpha * mean y^2)^2` with its derivative bundle (1-d).
///
/// The natural Lyapunov function for the linear Landau-type model.
pub fn quadratic_interaction_bundle(alpha: f64) -> LyapunovBundle {
    let u = move |x: f64, mu: &EmpiricalMeasure| x * x + alpha * mu.raw_moment_1d(2);
    LyapunovBundle::new(
        1,
        move |_t, x, mu| {
            let s = u(x[0], mu);
            s * s
        },
        |_t, _x, _mu| 0.0,
        move |_t, x, mu, out| out[0] = 4.0 * x[0] * u(x[0], mu),
        move |_t, x, mu, out| out[0] = 4.0 * u(x[0], mu) + 8.0 * x[0] * x[0],
        move |_t, x, mu, y, out| out[0] = 4.0 * alpha * y[0] * u(x[0], mu),
        move |_t, x, mu, _y, out| out[0] = 4.0 * alpha * u(x[0], mu),
    )
}

/// `V(mu) = mean y^4`, measure-only (1-d). Pairs with the cubic-drift model.
pub fn fourth_moment_bundle() -> LyapunovBundle {
    LyapunovBundle::measure_only(
        1,
        |_t, _x, mu| mu.raw_moment_1d(4),
        |_t, _x, _mu, y, out| out[0] = 4.0 * y[0] * y[0] * y[0],
        |_t, _x, _mu, y, out| out[0] = 12.0 * y[0] * y[0],
    )
}

/// `V(x) = |x|^r`, measure-independent; requires `r >= 2` for a bounded
/// Hessian at the origin.
pub fn abs_power_bundle(dim: usize, r: f64) -> LyapunovBundle {
    assert!(r >= 2.0, "abs_power_bundle requires r >= 2");
    LyapunovBundle::state_only(
        dim,
        move |_t, x, _mu| norm(x).powf(r),
        |_t, _x, _mu| 0.0,
        move |_t, x, _mu, out| {
            let n = norm(x);
            if n > 0.0 {
                let c = r * n.powf(r - 2.0);
                for (o, xi) in out.iter_mut().zip(x) {
                    *o = c * xi;
                }
            }
        },
        move |_t, x, _mu, out| {
            let d = x.len();
            let n = norm(x);
            if n > 0.0 {
                let c1 = r * n.powf(r - 2.0);
                let c2 = r * (r - 2.0) * n.powf(r - 4.0);
                for a in 0..d {
                    for b in 0..d {
                        out[a * d + b] = c2 * x[a] * x[b];
                    }
                    out[a * d + a] += c1;
                }
            } else if r == 2.0 {
                for a in 0..d {
                    out[a * d + a] = 2.0;
                }
            }
        },
    )
}

/// `1/2 tr(sigma sigma^T H)` for row-major `sigma`, `H` of size d x d.
fn half_trace_term(sigma: &[f64], hess: &[f64], d: usize) -> f64 {
    let mut acc = 0.0;
    for a in 0..d {
        for c in 0..d {
            // (sigma sigma^T)_{a c}
            let mut s = 0.0;
            for b in 0..d {
                s += sigma[a * d + b] * sigma[c * d + b];
            }
            acc += s * hess[c * d + a];
        }
    }
    0.5 * acc
}

/// Evaluate `(L^mu V)(t, x, mu)` for the given coefficient pair.
///
/// The measure integral runs over the cloud's own points (empirical average).
pub fn generator(
    bundle: &LyapunovBundle,
    coeffs: &CoefficientPair,
    t: f64,
    x: &[f64],
    mu: &EmpiricalMeasure,
) -> f64 {
    let d = bundle.dim();
    debug_assert_eq!(coeffs.dim(), d);
    debug_assert_eq!(mu.dim(), d);

    let mut acc = 0.0;
    if bundle.kind() != BundleKind::MeasureOnly {
        let mut grad = vec![0.0; d];
        let mut hess = vec![0.0; d * d];
        let mut b = vec![0.0; d];
        let mut sigma = vec![0.0; d * d];
        bundle.grad_x(t, x, mu, &mut grad);
        bundle.hess_x(t, x, mu, &mut hess);
        coeffs.drift(t, x, mu, &mut b);
        coeffs.diffusion(t, x, mu, &mut sigma);
        acc += bundle.dv_dt(t, x, mu);
        acc += b.iter().zip(&grad).map(|(bi, gi)| bi * gi).sum::<f64>();
        acc += half_trace_term(&sigma, &hess, d);
    }
    if bundle.kind() != BundleKind::StateOnly {
        let n = mu.len() as f64;
        let mut b = vec![0.0; d];
        let mut sigma = vec![0.0; d * d];
        let mut dmu = vec![0.0; d];
        let mut dy = vec![0.0; d * d];
        let mut total = 0.0;
        for y in mu.points() {
            coeffs.drift(t, y, mu, &mut b);
            bundle.dmu(t, x, mu, y, &mut dmu);
            total += b.iter().zip(&dmu).map(|(bi, mi)| bi * mi).sum::<f64>();
            coeffs.diffusion(t, y, mu, &mut sigma);
            bundle.dy_dmu(t, x, mu, y, &mut dy);
            total += half_trace_term(&sigma, &dy, d);
        }
        acc += total / n;
    }
    acc
}

/// `mean_i (L^mu V)(t, x_i, mu)`: the generator integrated against the cloud.
pub fn integrated_generator(
    bundle: &LyapunovBundle,
    coeffs: &CoefficientPair,
    t: f64,
    mu: &EmpiricalMeasure,
) -> f64 {
    if bundle.kind() == BundleKind::MeasureOnly {
        // No x dependence: one evaluation suffices.
        return generator(bundle, coeffs, t, mu.point(0), mu);
    }
    let n = mu.len();
    let vals = exec::map_indexed(n, |i| generator(bundle, coeffs, t, mu.point(i), mu));
    vals.iter().sum::<f64>() / n as f64
}

/// Margins of the integrated drift inequality over a cloud family, plus the
/// smallest growth constant making `|L^mu V + gamma V| <= C3 (|x|^r +
/// mean|x|^r)` hold on the sampled points.
#[derive(Debug, Clone, Serialize)]
pub struct DriftInequalityReport {
    /// `max over clouds of (integral L^mu V + gamma * integral V)`;
    /// nonpositive means no violation found.
    pub max_margin: f64,
    pub worst_cloud: usize,
    pub per_cloud: Vec<f64>,
    pub growth_c3: f64,
}

pub fn check_drift_inequality(
    bundle: &LyapunovBundle,
    coeffs: &CoefficientPair,
    clouds: &[EmpiricalMeasure],
    gamma: f64,
    t: f64,
    r: f64,
) -> DriftInequalityReport {
    assert!(gamma > 0.0, "drift inequality requires gamma > 0");
    assert!(!clouds.is_empty());
    let per_cloud: Vec<f64> = exec::map_indexed(clouds.len(), |ci| {
        let mu = &clouds[ci];
        let ig = integrated_generator(bundle, coeffs, t, mu);
        let vbar = mu
            .points()
            .map(|x| bundle.v(t, x, mu))
            .sum::<f64>()
            / mu.len() as f64;
        ig + gamma * vbar
    });
    let mut worst = 0;
    for (i, &m) in per_cloud.iter().enumerate() {
        if m > per_cloud[worst] {
            worst = i;
        }
    }
    let mut c3 = 0.0_f64;
    for mu in clouds {
        let scale = mu.abs_moment_pow(r);
        for x in mu.points() {
            let denom = norm(x).powf(r) + scale;
            if denom < 1e-12 {
                continue;
            }
            let lhs = (generator(bundle, coeffs, t, x, mu) + gamma * bundle.v(t, x, mu)).abs();
            c3 = c3.max(lhs / denom);
        }
    }
    DriftInequalityReport {
        max_margin: per_cloud[worst],
        worst_cloud: worst,
        per_cloud,
        growth_c3: c3,
    }
}

/// Worst violations of `C1 |x|^r <= V <= C2 |x|^r + C2' mean |x|^r` over the
/// sampled (point, cloud) pairs. For measure-only bundles the integrated form
/// `C1 mean|x|^r <= mean V <= (C2 + C2') mean|x|^r` is tested per cloud.
#[derive(Debug, Clone, Serialize)]
pub struct SandwichReport {
    pub lower_violation: f64,
    pub upper_violation: f64,
    /// (cloud index, point index, point) of the worst lower-side violation.
    pub lower_witness: Option<(usize, usize, Vec<f64>)>,
    pub upper_witness: Option<(usize, usize, Vec<f64>)>,
}

pub fn sandwich_check(
    bundle: &LyapunovBundle,
    clouds: &[EmpiricalMeasure],
    r: f64,
    c1: f64,
    c2: f64,
    c2p: f64,
) -> SandwichReport {
    assert!(c1 > 0.0, "lower sandwich constant must be positive");
    let t = 0.0;
    let mut lower = 0.0_f64;
    let mut upper = 0.0_f64;
    let mut lower_witness = None;
    let mut upper_witness = None;
    for (ci, mu) in clouds.iter().enumerate() {
        let scale = mu.abs_moment_pow(r);
        if bundle.kind() == BundleKind::MeasureOnly {
            let vbar = mu.points().map(|x| bundle.v(t, x, mu)).sum::<f64>() / mu.len() as f64;
            let lo = c1 * scale - vbar;
            let hi = vbar - (c2 + c2p) * scale;
            if lo > lower {
                lower = lo;
                lower_witness = Some((ci, 0, mu.point(0).to_vec()));
            }
            if hi > upper {
                upper = hi;
                upper_witness = Some((ci, 0, mu.point(0).to_vec()));
            }
            continue;
        }
        for (pi, x) in mu.points().enumerate() {
            let v = bundle.v(t, x, mu);
            let xr = norm(x).powf(r);
            let lo = c1 * xr - v;
            let hi = v - c2 * xr - c2p * scale;
            if lo > lower {
                lower = lo;
                lower_witness = Some((ci, pi, x.to_vec()));
            }
            if hi > upper {
                upper = hi;
                upper_witness = Some((ci, pi, x.to_vec()));
            }
        }
    }
    SandwichReport {
        lower_violation: lower,
        upper_violation: upper,
        lower_witness,
        upper_witness,
    }
}

/// Least-squares slope of `log(values)` against `t` restricted to a window.
/// Returns `(slope, r_squared)`.
pub fn fit_log_slope(
    times: &[f64],
    values: &[f64],
    window: (f64, f64),
) -> Result<(f64, f64), LyapunovError> {
    let (lo, hi) = window;
    let mut ts = Vec::new();
    let mut ys = Vec::new();
    for (&t, &v) in times.iter().zip(values) {
        if t < lo || t > hi {
            continue;
        }
        if !(v > 0.0) {
            return Err(LyapunovError::NonpositiveMoment { t, value: v });
        }
        ts.push(t);
        ys.push(v.ln());
    }
    if ts.len() < 5 {
        return Err(LyapunovError::EmptyWindow {
            lo,
            hi,
            found: ts.len(),
        });
    }
    let n = ts.len() as f64;
    let tbar = ts.iter().sum::<f64>() / n;
    let ybar = ys.iter().sum::<f64>() / n;
    let sxy: f64 = ts.iter().zip(&ys).map(|(t, y)| (t - tbar) * (y - ybar)).sum();
    let sxx: f64 = ts.iter().map(|t| (t - tbar) * (t - tbar)).sum();
    let slope = sxy / sxx;
    let sst: f64 = ys.iter().map(|y| (y - ybar) * (y - ybar)).sum();
    let ssr: f64 = ts
        .iter()
        .zip(&ys)
        .map(|(t, y)| {
            let fit = ybar + slope * (t - tbar);
            (y - fit) * (y - fit)
        })
        .sum();
    let r2 = if sst > 0.0 { 1.0 - ssr / sst } else { 1.0 };
    Ok((slope, r2))
}

/// Fit the decay rate of `mean |X|^r` over a time window.
///
/// Returns `(gamma_hat, r_squared)` where `gamma_hat` is the fitted exponent
/// (negative for decaying moments).
pub fn fit_decay_rate(
    traj: &MomentTrajectory,
    order: f64,
    window: (f64, f64),
) -> Result<(f64, f64), LyapunovError> {
    let series = traj
        .series(order)
        .ok_or(LyapunovError::OrderNotRecorded(order))?;
    fit_log_slope(&traj.times, series, window)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityMargins {
    /// Worst sandwich violation (max of lower and upper sides).
    pub sandwich: f64,
    /// Worst integrated drift margin `integral L^mu V + gamma integral V`.
    pub drift: f64,
    /// Smallest feasible growth constant C3 on the sample.
    pub growth_c3: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityWitness {
    pub check: String,
    pub cloud: usize,
    pub point: Option<usize>,
    pub x: Option<Vec<f64>>,
    pub value: f64,
}

/// Fitted decay rate plus condition margins, serialized as
/// `{gamma_hat, gamma_claimed, r, window, margins, witnesses}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityReport {
    pub gamma_hat: f64,
    pub gamma_claimed: f64,
    pub r: f64,
    pub window: [f64; 2],
    pub margins: StabilityMargins,
    pub witnesses: Vec<StabilityWitness>,
}

impl StabilityReport {
    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}

/// Assemble a stability report: fit the decay rate of the `r`-th moment over
/// `window` and evaluate condition margins on the supplied cloud family.
/// `gamma_claimed` is the claimed exponent (negative for decay); the drift
/// inequality is checked with `gamma = -gamma_claimed`.
#[allow(clippy::too_many_arguments)]
pub fn stability_report(
    bundle: &LyapunovBundle,
    coeffs: &CoefficientPair,
    traj: &MomentTrajectory,
    r: f64,
    window: (f64, f64),
    gamma_claimed: f64,
    clouds: &[EmpiricalMeasure],
    sandwich_constants: (f64, f64, f64),
) -> Result<StabilityReport, LyapunovError> {
    if -gamma_claimed <= 0.0 {
        return Err(LyapunovError::NonpositiveGamma(-gamma_claimed));
    }
    let (gamma_hat, _r2) = fit_decay_rate(traj, r, window)?;
    let gamma = -gamma_claimed;
    let (c1, c2, c2p) = sandwich_constants;
    let sandwich = sandwich_check(bundle, clouds, r, c1, c2, c2p);
    let drift = check_drift_inequality(bundle, coeffs, clouds, gamma, 0.0, r);
    let mut witnesses = Vec::new();
    for (label, violation, witness) in [
        ("sandwich_lower", sandwich.lower_violation, &sandwich.lower_witness),
        ("sandwich_upper", sandwich.upper_violation, &sandwich.upper_witness),
    ] {
        if violation > 0.0 {
            if let Some((ci, pi, x)) = witness {
                witnesses.push(StabilityWitness {
                    check: label.into(),
                    cloud: *ci,
                    point: Some(*pi),
                    x: Some(x.clone()),
                    value: violation,
                });
            }
        }
    }
    if drift.max_margin > 0.0 {
        witnesses.push(StabilityWitness {
            check: "drift".into(),
            cloud: drift.worst_cloud,
            point: None,
            x: None,
            value: drift.max_margin,
        });
    }
    Ok(StabilityReport {
        gamma_hat,
        gamma_claimed,
        r,
        window: [window.0, window.1],
        margins: StabilityMargins {
            sandwich: sandwich.lower_violation.max(sandwich.upper_violation),
            drift: drift.max_margin,
            growth_c3: drift.growth_c3,
        },
        witnesses,
    })
}

/// Max absolute finite-difference residuals for each derivative of a bundle.
///
/// State derivatives are compared against central differences (O(h^2)); the
/// measure derivative against the empirical transport probe
/// `(V(mu with y_j shifted by h e) - V(mu)) * N / h` (O(h)); and
/// `d_y d_mu V` against central differences of `d_mu V` in `y` (O(h^2)).
#[derive(Debug, Clone, Serialize)]
pub struct BundleCheck {
    pub dt_err: f64,
    pub grad_err: f64,
    pub hess_err: f64,
    pub dmu_err: f64,
    pub dy_dmu_err: f64,
}

pub fn validate_bundle(
    bundle: &LyapunovBundle,
    t: f64,
    x: &[f64],
    mu: &EmpiricalMeasure,
    h: f64,
) -> BundleCheck {
    let d = bundle.dim();
    let v0 = bundle.v(t, x, mu);

    let dt_fd = (bundle.v(t + h, x, mu) - bundle.v(t - h, x, mu)) / (2.0 * h);
    let dt_err = (bundle.dv_dt(t, x, mu) - dt_fd).abs();

    let mut xp = x.to_vec();
    let mut grad = vec![0.0; d];
    bundle.grad_x(t, x, mu, &mut grad);
    let mut grad_err = 0.0_f64;
    for k in 0..d {
        xp.copy_from_slice(x);
        xp[k] = x[k] + h;
        let vp = bundle.v(t, &xp, mu);
        xp[k] = x[k] - h;
        let vm = bundle.v(t, &xp, mu);
        grad_err = grad_err.max((grad[k] - (vp - vm) / (2.0 * h)).abs());
    }

    let mut hess = vec![0.0; d * d];
    bundle.hess_x(t, x, mu, &mut hess);
    let mut hess_err = 0.0_f64;
    for k in 0..d {
        for l in 0..d {
            let fd = if k == l {
                xp.copy_from_slice(x);
                xp[k] = x[k] + h;
                let vp = bundle.v(t, &xp, mu);
                xp[k] = x[k] - h;
                let vm = bundle.v(t, &xp, mu);
                (vp - 2.0 * v0 + vm) / (h * h)
            } else {
                let mut eval = |sk: f64, sl: f64| {
                    xp.copy_from_slice(x);
                    xp[k] = x[k] + sk * h;
                    xp[l] = x[l] + sl * h;
                    bundle.v(t, &xp, mu)
                };
                (eval(1.0, 1.0) - eval(1.0, -1.0) - eval(-1.0, 1.0) + eval(-1.0, -1.0))
                    / (4.0 * h * h)
            };
            hess_err = hess_err.max((hess[k * d + l] - fd).abs());
        }
    }

    // Empirical transport probe of the measure derivative: move one cloud
    // point by h along a coordinate; the response scales as (1/N) h dmu.
    let n = mu.len();
    let probes = n.min(5);
    let mut dmu_err = 0.0_f64;
    let mut dy_dmu_err = 0.0_f64;
    let mut dmu_val = vec![0.0; d];
    let mut dmu_p = vec![0.0; d];
    let mut dmu_m = vec![0.0; d];
    let mut dy = vec![0.0; d * d];
    for j in (0..n).step_by(n.div_ceil(probes).max(1)) {
        let yj = mu.point(j).to_vec();
        bundle.dmu(t, x, mu, &yj, &mut dmu_val);
        for e in 0..d {
            let mut shifted = mu.as_flat().to_vec();
            shifted[j * d + e] += h;
            let mu_h = EmpiricalMeasure::from_flat(shifted, d).expect("finite shift");
            let probe = (bundle.v(t, x, &mu_h) - v0) * n as f64 / h;
            dmu_err = dmu_err.max((dmu_val[e] - probe).abs());
        }
        bundle.dy_dmu(t, x, mu, &yj, &mut dy);
        let mut yp = yj.clone();
        for l in 0..d {
            yp.copy_from_slice(&yj);
            yp[l] = yj[l] + h;
            bundle.dmu(t, x, mu, &yp, &mut dmu_p);
            yp[l] = yj[l] - h;
            bundle.dmu(t, x, mu, &yp, &mut dmu_m);
            for k in 0..d {
                let fd = (dmu_p[k] - dmu_m[k]) / (2.0 * h);
                dy_dmu_err = dy_dmu_err.max((dy[k * d + l] - fd).abs());
            }
        }
    }

    BundleCheck {
        dt_err,
        grad_err,
        hess_err,
        dmu_err,
        dy_dmu_err,
    }
}
