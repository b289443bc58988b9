//! Drift/diffusion coefficient pairs `(b, sigma)` and built-in models.
//!
//! A coefficient pair evaluates
//!
//! ```text
//! b: (t, x, mu) -> R^d        sigma: (t, x, mu) -> R^{d x d}
//! ```
//!
//! where `mu` is the empirical measure of the current ensemble. Evaluations
//! must be deterministic and re-entrant: coefficients receive the per-step
//! measure snapshot by shared reference and must not mutate it, which lets
//! all particles of a step evaluate in parallel against the same snapshot.
//! The time argument is threaded through even though the built-in models are
//! autonomous, so user models may be time-dependent.
//!
//! Truncation replaces a pair by its radially clipped version: state clipped
//! to the ball of radius `n`, measure replaced by its clipped pushforward.

use std::sync::Arc;

use thiserror::Error;

use crate::measure::{radial_clip_into, EmpiricalMeasure};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("parameter {name} must be positive, got {value}")]
    NonpositiveParameter { name: &'static str, value: f64 },
    #[error("clip window is empty: requires L <= M, got L = {lo}, M = {hi}")]
    BadClipWindow { lo: f64, hi: f64 },
}

/// Writes the drift vector (length `d`) into `out`.
pub type DriftFn = dyn Fn(f64, &[f64], &EmpiricalMeasure, &mut [f64]) + Send + Sync;
/// Writes the d x d diffusion matrix (row-major, length `d*d`) into `out`.
pub type DiffusionFn = dyn Fn(f64, &[f64], &EmpiricalMeasure, &mut [f64]) + Send + Sync;

/// An immutable, shareable drift/diffusion pair.
#[derive(Clone)]
pub struct CoefficientPair {
    dim: usize,
    drift: Arc<DriftFn>,
    diffusion: Arc<DiffusionFn>,
}

impl std::fmt::Debug for CoefficientPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CoefficientPair")
            .field("dim", &self.dim)
            .finish()
    }
}

impl CoefficientPair {
    pub fn new<B, S>(dim: usize, drift: B, diffusion: S) -> Self
    where
        B: Fn(f64, &[f64], &EmpiricalMeasure, &mut [f64]) + Send + Sync + 'static,
        S: Fn(f64, &[f64], &EmpiricalMeasure, &mut [f64]) + Send + Sync + 'static,
    {
        assert!(dim >= 1);
        CoefficientPair {
            dim,
            drift: Arc::new(drift),
            diffusion: Arc::new(diffusion),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Evaluate the drift into `out` (length `d`). `out` is zeroed first, so
    /// closures may write sparsely.
    #[inline]
    pub fn drift(&self, t: f64, x: &[f64], mu: &EmpiricalMeasure, out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(out.len(), self.dim);
        out.fill(0.0);
        (self.drift)(t, x, mu, out);
    }

    /// Evaluate the diffusion matrix into `out` (row-major, length `d*d`).
    #[inline]
    pub fn diffusion(&self, t: f64, x: &[f64], mu: &EmpiricalMeasure, out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(out.len(), self.dim * self.dim);
        out.fill(0.0);
        (self.diffusion)(t, x, mu, out);
    }

    pub fn drift_vec(&self, t: f64, x: &[f64], mu: &EmpiricalMeasure) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.drift(t, x, mu, &mut out);
        out
    }

    pub fn diffusion_mat(&self, t: f64, x: &[f64], mu: &EmpiricalMeasure) -> Vec<f64> {
        let mut out = vec![0.0; self.dim * self.dim];
        self.diffusion(t, x, mu, &mut out);
        out
    }
}

/// A coefficient pair with state and measure radially clipped at `level`:
/// `b^n(t, x, mu) = b(t, clip(x), clip # mu)` and likewise for the diffusion.
#[derive(Clone, Debug)]
pub struct TruncatedCoefficients {
    inner: CoefficientPair,
    level: f64,
}

impl TruncatedCoefficients {
    pub fn inner(&self) -> &CoefficientPair {
        &self.inner
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    /// Wrap as an ordinary pair for the integrator. The clipped measure is
    /// memoized on the snapshot, so per-particle cost stays O(d).
    pub fn to_pair(&self) -> CoefficientPair {
        let level = self.level;
        let dim = self.inner.dim();
        let (inner_b, inner_s) = (self.inner.clone(), self.inner.clone());
        CoefficientPair::new(
            dim,
            move |t, x, mu, out: &mut [f64]| {
                let clipped_mu = mu.radial_clip_shared(level);
                let mut cx = vec![0.0; x.len()];
                radial_clip_into(x, level, &mut cx);
                inner_b.drift(t, &cx, &clipped_mu, out);
            },
            move |t, x, mu, out: &mut [f64]| {
                let clipped_mu = mu.radial_clip_shared(level);
                let mut cx = vec![0.0; x.len()];
                radial_clip_into(x, level, &mut cx);
                inner_s.diffusion(t, &cx, &clipped_mu, out);
            },
        )
    }

    pub fn drift(&self, t: f64, x: &[f64], mu: &EmpiricalMeasure, out: &mut [f64]) {
        let clipped_mu = mu.radial_clip_shared(self.level);
        let mut cx = vec![0.0; x.len()];
        radial_clip_into(x, self.level, &mut cx);
        self.inner.drift(t, &cx, &clipped_mu, out);
    }

    pub fn diffusion(&self, t: f64, x: &[f64], mu: &EmpiricalMeasure, out: &mut [f64]) {
        let clipped_mu = mu.radial_clip_shared(self.level);
        let mut cx = vec![0.0; x.len()];
        radial_clip_into(x, self.level, &mut cx);
        self.inner.diffusion(t, &cx, &clipped_mu, out);
    }
}

/// Radially truncate a coefficient pair at `level > 0`.
pub fn truncate(coeffs: &CoefficientPair, level: f64) -> TruncatedCoefficients {
    assert!(level > 0.0, "truncation level must be positive");
    TruncatedCoefficients {
        inner: coeffs.clone(),
        level,
    }
}

/// Mean-field Ornstein-Uhlenbeck (1-d):
/// `dX_t = [-alpha X_t - E X_t] dt + dW_t`.
pub fn mean_field_ou(alpha: f64) -> Result<CoefficientPair, ModelError> {
    if alpha <= 0.0 {
        return Err(ModelError::NonpositiveParameter {
            name: "alpha",
            value: alpha,
        });
    }
    Ok(CoefficientPair::new(
        1,
        move |_t, x, mu, out: &mut [f64]| {
            out[0] = -alpha * x[0] - mu.mean_1d();
        },
        |_t, _x, _mu, out: &mut [f64]| {
            out[0] = 1.0;
        },
    ))
}

/// Cubic drift with clipped measure interaction (1-d):
/// `dX_t = [-X_t^3 - X_t * mean((L \/ |y|) /\ M)] dt + (X_t / 2) dW_t`.
///
/// The drift is superlinear; use tamed stepping (see `simulate::Taming`).
/// Requires `0 < L <= M` so the clip window is nonempty.
pub fn cubic_interaction(lo: f64, hi: f64) -> Result<CoefficientPair, ModelError> {
    if lo <= 0.0 {
        return Err(ModelError::NonpositiveParameter {
            name: "L",
            value: lo,
        });
    }
    if hi < lo {
        return Err(ModelError::BadClipWindow { lo, hi });
    }
    Ok(CoefficientPair::new(
        1,
        move |_t, x, mu, out: &mut [f64]| {
            let c = mu.clipped_abs_mean(lo, hi);
            out[0] = -x[0] * x[0] * x[0] - x[0] * c;
        },
        |_t, x, _mu, out: &mut [f64]| {
            out[0] = 0.5 * x[0];
        },
    ))
}

/// Landau-type linear model (1-d):
/// `dX_t = -2 (X_t + alpha E X_t) dt + (X_t + alpha E X_t) dW_t`.
///
/// Stability claims hold for `alpha` in (0, 1/2); the constructor accepts any
/// real `alpha`.
pub fn landau_linear(alpha: f64) -> CoefficientPair {
    CoefficientPair::new(
        1,
        move |_t, x, mu, out: &mut [f64]| {
            out[0] = -2.0 * (x[0] + alpha * mu.mean_1d());
        },
        move |_t, x, mu, out: &mut [f64]| {
            out[0] = x[0] + alpha * mu.mean_1d();
        },
    )
}

/// Landau-type convolution model: coefficients are empirical convolutions
/// `b(x, mu) = mean_z b0(x - alpha z)` and likewise for `sigma0`.
///
/// Evaluation is O(N) per call by construction (a true convolution against
/// the cloud), so large-ensemble propagation costs O(N^2) per step.
pub fn landau_convolution<B, S>(
    dim: usize,
    b0: B,
    sigma0: S,
    alpha: f64,
) -> CoefficientPair
where
    B: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    S: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
{
    let b0 = Arc::new(b0);
    let s0 = Arc::new(sigma0);
    CoefficientPair::new(
        dim,
        move |_t, x, mu, out: &mut [f64]| {
            let n = mu.len() as f64;
            let mut shifted = vec![0.0; x.len()];
            let mut val = vec![0.0; x.len()];
            for z in mu.points() {
                for ((sh, xi), zi) in shifted.iter_mut().zip(x).zip(z) {
                    *sh = xi - alpha * zi;
                }
                val.fill(0.0);
                b0(&shifted, &mut val);
                for (o, v) in out.iter_mut().zip(&val) {
                    *o += v / n;
                }
            }
        },
        move |_t, x, mu, out: &mut [f64]| {
            let n = mu.len() as f64;
            let d = x.len();
            let mut shifted = vec![0.0; d];
            let mut val = vec![0.0; d * d];
            for z in mu.points() {
                for ((sh, xi), zi) in shifted.iter_mut().zip(x).zip(z) {
                    *sh = xi - alpha * zi;
                }
                val.fill(0.0);
                s0(&shifted, &mut val);
                for (o, v) in out.iter_mut().zip(&val) {
                    *o += v / n;
                }
            }
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud(points: &[f64]) -> EmpiricalMeasure {
        EmpiricalMeasure::from_points_1d(points.to_vec())
    }

    #[test]
    fn ou_examples() {
        let ou = mean_field_ou(1.0).unwrap();
        assert_eq!(ou.drift_vec(0.0, &[0.0], &cloud(&[0.0])), vec![0.0]);
        assert_eq!(
            ou.drift_vec(0.0, &[2.0], &cloud(&[1.0, 3.0])),
            vec![-4.0]
        );
        assert_eq!(ou.diffusion_mat(7.0, &[5.0], &cloud(&[1.0])), vec![1.0]);
        assert!(matches!(
            mean_field_ou(0.0),
            Err(ModelError::NonpositiveParameter { .. })
        ));
    }

    #[test]
    fn cubic_examples() {
        let c = cubic_interaction(1.0, 2.0).unwrap();
        assert_eq!(c.drift_vec(0.0, &[0.0], &cloud(&[5.0])), vec![0.0]);
        assert_eq!(c.diffusion_mat(0.0, &[0.0], &cloud(&[5.0])), vec![0.0]);
        // clip(0) = 1, clip(3) = 2, mean = 1.5
        let d = c.drift_vec(0.0, &[1.0], &cloud(&[0.0, 3.0]));
        assert!((d[0] + 2.5).abs() < 1e-15);
        assert_eq!(c.diffusion_mat(0.0, &[2.0], &cloud(&[9.0])), vec![1.0]);
        assert!(matches!(
            cubic_interaction(2.0, 1.0),
            Err(ModelError::BadClipWindow { .. })
        ));
    }

    #[test]
    fn landau_linear_examples() {
        let m = landau_linear(0.25);
        assert_eq!(m.drift_vec(0.0, &[0.0], &cloud(&[0.0])), vec![0.0]);
        assert_eq!(m.diffusion_mat(0.0, &[0.0], &cloud(&[0.0])), vec![0.0]);
        let mu = cloud(&[2.0, 2.0]);
        assert_eq!(m.drift_vec(0.0, &[1.0], &mu), vec![-3.0]);
        assert_eq!(m.diffusion_mat(0.0, &[1.0], &mu), vec![1.5]);
        // alpha = 0 reduces to the geometric model.
        let g = landau_linear(0.0);
        assert_eq!(g.drift_vec(0.0, &[1.5], &mu), vec![-3.0]);
        assert_eq!(g.diffusion_mat(0.0, &[1.5], &mu), vec![1.5]);
    }

    #[test]
    fn landau_convolution_examples() {
        let m = landau_convolution(
            1,
            |u, out| out[0] = -u[0],
            |u, out| out[0] = u[0],
            0.0,
        );
        // alpha = 0: convolution with a point mass, b = b0(x).
        assert_eq!(m.drift_vec(0.0, &[1.3], &cloud(&[9.0, -2.0])), vec![-1.3]);

        let m = landau_convolution(
            1,
            |u, out| out[0] = -u[0],
            |u, out| out[0] = u[0],
            1.0,
        );
        let d = m.drift_vec(0.0, &[0.0], &cloud(&[1.0, -1.0]));
        assert!(d[0].abs() < 1e-15);
    }

    #[test]
    fn landau_convolution_matches_linear_model() {
        // b0(u) = -2u, sigma0(u) = u: the convolution mean of b0(x - alpha z)
        // is -2(x - alpha mean z), i.e. the linear model at -alpha.
        let mut rng = crate::rng::CounterRng::new(21, 0, 0);
        for _ in 0..30 {
            let alpha = rng.uniform_in(-1.0, 1.0);
            let conv = landau_convolution(
                1,
                |u, out| out[0] = -2.0 * u[0],
                |u, out| out[0] = u[0],
                alpha,
            );
            let lin = landau_linear(-alpha);
            let pts: Vec<f64> = (0..7).map(|_| rng.uniform_in(-4.0, 4.0)).collect();
            let mu = cloud(&pts);
            let x = [rng.uniform_in(-4.0, 4.0)];
            let (db, ds) = (
                conv.drift_vec(0.0, &x, &mu)[0] - lin.drift_vec(0.0, &x, &mu)[0],
                conv.diffusion_mat(0.0, &x, &mu)[0] - lin.diffusion_mat(0.0, &x, &mu)[0],
            );
            assert!(db.abs() < 1e-14 && ds.abs() < 1e-14);
        }
    }

    #[test]
    fn truncation_examples() {
        // drift -x truncated at 1, queried at 5: clip(5) = 1 -> drift -1.
        let base = CoefficientPair::new(
            1,
            |_t, x, _mu, out: &mut [f64]| out[0] = -x[0],
            |_t, _x, _mu, out: &mut [f64]| out[0] = 1.0,
        );
        let trunc = truncate(&base, 1.0);
        let mu = cloud(&[0.2]);
        let mut out = [0.0];
        trunc.drift(0.0, &[5.0], &mu, &mut out);
        assert_eq!(out[0], -1.0);

        // OU truncated at 2 with mu = {10}: mean clipped to 2.
        let ou = mean_field_ou(3.0).unwrap();
        let trunc = truncate(&ou, 2.0);
        trunc.drift(0.0, &[0.0], &cloud(&[10.0]), &mut out);
        assert_eq!(out[0], -2.0);
    }

    #[test]
    fn truncation_inactive_inside_ball() {
        let ou = mean_field_ou(1.5).unwrap();
        let trunc = truncate(&ou, 4.0).to_pair();
        let mut rng = crate::rng::CounterRng::new(33, 0, 0);
        for _ in 0..30 {
            let pts: Vec<f64> = (0..5).map(|_| rng.uniform_in(-3.9, 3.9)).collect();
            let mu = cloud(&pts);
            let x = [rng.uniform_in(-3.9, 3.9)];
            assert_eq!(trunc.drift_vec(1.0, &x, &mu), ou.drift_vec(1.0, &x, &mu));
            assert_eq!(
                trunc.diffusion_mat(1.0, &x, &mu),
                ou.diffusion_mat(1.0, &x, &mu)
            );
        }
    }
}
