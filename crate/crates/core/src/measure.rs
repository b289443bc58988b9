//! Empirical probability measures and transport distances between them.
//!
//! An [`EmpiricalMeasure`] is an equally weighted cloud of `N >= 1` points in
//! `R^d` standing in for a probability measure with finite moments. Distances:
//!
//! ```text
//! W_r(mu, nu)   = inf over couplings of ( mean |x - y|^r )^(1/r),   r >= 1
//! W_{r,R}(mu, nu) = the same cost measured after clipping both arguments
//!                   radially to the ball of radius R
//! ```
//!
//! For equal-size uniform clouds the infimum over couplings is attained at a
//! permutation pairing, so the distance is computed exactly: by sorting in
//! one dimension (the monotone coupling is optimal on the line) and by a
//! minimum-cost assignment otherwise. There is no approximate fallback; clouds
//! larger than [`ASSIGNMENT_LIMIT`] in dimension `d > 1` are rejected so that
//! every value returned as `W_r` is exact.
//!
//! The truncation map is the radial projection `x -> R x / (R \/ |x|)` onto
//! the closed ball of radius `R`; pushing a cloud through it gives the
//! truncated measure used by the local distance and by coefficient truncation.

use std::sync::{Arc, OnceLock, RwLock};

use serde::de::{SeqAccess, Visitor};
use serde::ser::SerializeSeq;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::assignment::solve_min_cost;
use crate::fmt::float17;

/// Largest cloud size for which the multi-dimensional (assignment-based)
/// distance is computed. The solver is O(N^3); beyond this, callers get an
/// error and may subsample rather than receive a non-exact number.
pub const ASSIGNMENT_LIMIT: usize = 512;

#[derive(Debug, Error)]
pub enum MeasureError {
    #[error("empirical measure must contain at least one point")]
    EmptyCloud,
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("unequal support sizes: {left} vs {right}")]
    UnequalSupportSize { left: usize, right: usize },
    #[error("assignment too large: N = {n} exceeds limit {limit} in dimension > 1")]
    AssignmentTooLarge { n: usize, limit: usize },
    #[error("point data length {len} is not a multiple of dimension {dim}")]
    RaggedData { len: usize, dim: usize },
    #[error("non-finite coordinate at point {index}")]
    NonFinite { index: usize },
    #[error("invalid permutation for coupling")]
    InvalidPermutation,
    #[error("parse error: {0}")]
    Parse(String),
}

#[derive(PartialEq, Clone, Copy)]
enum StatKey {
    AbsMomentPow(u64),
    Raw1d(u32),
    ClippedAbsMean(u64, u64),
}

/// An equally weighted particle cloud in `R^d`.
///
/// Point data is immutable after construction. Commonly used statistics
/// (mean, raw moments, clipped means, the clipped cloud itself) are memoized
/// on first use; memoization is deterministic (the cached value is a pure
/// function of the points) and thread-safe, so clouds can be shared across
/// worker threads as per-step snapshots.
pub struct EmpiricalMeasure {
    data: Vec<f64>, // row-major, len = n * dim
    dim: usize,
    mean: OnceLock<Vec<f64>>,
    stats: RwLock<Vec<(StatKey, f64)>>,
    clipped: RwLock<Vec<(u64, Arc<EmpiricalMeasure>)>>,
}

impl Clone for EmpiricalMeasure {
    fn clone(&self) -> Self {
        Self::from_flat_unchecked(self.data.clone(), self.dim)
    }
}

impl PartialEq for EmpiricalMeasure {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.data == other.data
    }
}

impl std::fmt::Debug for EmpiricalMeasure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EmpiricalMeasure")
            .field("n", &self.len())
            .field("dim", &self.dim)
            .finish()
    }
}

impl EmpiricalMeasure {
    pub(crate) fn from_flat_unchecked(data: Vec<f64>, dim: usize) -> Self {
        EmpiricalMeasure {
            data,
            dim,
            mean: OnceLock::new(),
            stats: RwLock::new(Vec::new()),
            clipped: RwLock::new(Vec::new()),
        }
    }

    /// Build from row-major flat data (`n * dim` values).
    pub fn from_flat(data: Vec<f64>, dim: usize) -> Result<Self, MeasureError> {
        if dim == 0 {
            return Err(MeasureError::DimensionMismatch { left: 0, right: 0 });
        }
        if data.is_empty() {
            return Err(MeasureError::EmptyCloud);
        }
        if data.len() % dim != 0 {
            return Err(MeasureError::RaggedData {
                len: data.len(),
                dim,
            });
        }
        if let Some(bad) = data.iter().position(|v| !v.is_finite()) {
            return Err(MeasureError::NonFinite { index: bad / dim });
        }
        Ok(Self::from_flat_unchecked(data, dim))
    }

    /// Build from one point per row; all rows must share a dimension.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, MeasureError> {
        let dim = rows.first().map(Vec::len).ok_or(MeasureError::EmptyCloud)?;
        if dim == 0 {
            return Err(MeasureError::DimensionMismatch { left: 0, right: 0 });
        }
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in &rows {
            if row.len() != dim {
                return Err(MeasureError::DimensionMismatch {
                    left: dim,
                    right: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::from_flat(data, dim)
    }

    /// Convenience constructor for scalar clouds. Panics on empty input.
    pub fn from_points_1d(points: Vec<f64>) -> Self {
        Self::from_flat(points, 1).expect("1-d cloud must be non-empty and finite")
    }

    /// The Dirac-at-origin cloud: `n` particles all at zero.
    pub fn dirac_zero(n: usize, dim: usize) -> Self {
        assert!(n >= 1 && dim >= 1);
        Self::from_flat_unchecked(vec![0.0; n * dim], dim)
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        false // N >= 1 holds by construction
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// `( mean |x|^r )^(1/r)`, the r-th moment norm. Requires `r >= 1`.
    pub fn moment(&self, r: f64) -> f64 {
        assert!(r >= 1.0, "moment order must satisfy r >= 1");
        self.abs_moment_pow(r).powf(1.0 / r)
    }

    /// `mean |x|^r` without the outer root (the quantity usually integrated).
    pub fn abs_moment_pow(&self, r: f64) -> f64 {
        self.cached(StatKey::AbsMomentPow(r.to_bits()), || {
            let sum: f64 = self.points().map(|p| norm(p).powf(r)).sum();
            sum / self.len() as f64
        })
    }

    /// Coordinate-wise mean of the cloud (memoized).
    pub fn mean(&self) -> &[f64] {
        self.mean.get_or_init(|| {
            let n = self.len() as f64;
            let mut m = vec![0.0; self.dim];
            for p in self.points() {
                for (mi, xi) in m.iter_mut().zip(p) {
                    *mi += xi;
                }
            }
            for mi in &mut m {
                *mi /= n;
            }
            m
        })
    }

    /// Scalar mean; only meaningful for 1-d clouds.
    pub fn mean_1d(&self) -> f64 {
        debug_assert_eq!(self.dim, 1);
        self.mean()[0]
    }

    /// Raw signed moment `mean x^k` of a 1-d cloud (memoized).
    pub fn raw_moment_1d(&self, k: u32) -> f64 {
        assert_eq!(self.dim, 1, "raw_moment_1d requires a 1-d cloud");
        self.cached(StatKey::Raw1d(k), || {
            let sum: f64 = self.data.iter().map(|&x| x.powi(k as i32)).sum();
            sum / self.len() as f64
        })
    }

    /// `mean ((lo \/ |x|) /\ hi)`: the clipped-magnitude statistic (memoized).
    pub fn clipped_abs_mean(&self, lo: f64, hi: f64) -> f64 {
        self.cached(StatKey::ClippedAbsMean(lo.to_bits(), hi.to_bits()), || {
            let sum: f64 = self.points().map(|p| norm(p).max(lo).min(hi)).sum();
            sum / self.len() as f64
        })
    }

    fn cached(&self, key: StatKey, compute: impl FnOnce() -> f64) -> f64 {
        if let Some(&(_, v)) = self
            .stats
            .read()
            .expect("stat cache poisoned")
            .iter()
            .find(|(k, _)| *k == key)
        {
            return v;
        }
        let v = compute();
        let mut w = self.stats.write().expect("stat cache poisoned");
        if !w.iter().any(|(k, _)| *k == key) {
            w.push((key, v));
        }
        v
    }

    /// Pushforward through the radial truncation map: every point clipped to
    /// the closed ball of radius `radius`. Cloud size is unchanged.
    pub fn radial_clip(&self, radius: f64) -> EmpiricalMeasure {
        assert!(radius > 0.0, "truncation radius must be positive");
        let mut data = Vec::with_capacity(self.data.len());
        for p in self.points() {
            clip_extend(p, radius, &mut data);
        }
        Self::from_flat_unchecked(data, self.dim)
    }

    /// Memoized shared variant of [`radial_clip`](Self::radial_clip), for hot
    /// paths that clip the same snapshot once per step.
    pub fn radial_clip_shared(&self, radius: f64) -> Arc<EmpiricalMeasure> {
        let key = radius.to_bits();
        if let Some((_, m)) = self
            .clipped
            .read()
            .expect("clip cache poisoned")
            .iter()
            .find(|(k, _)| *k == key)
        {
            return Arc::clone(m);
        }
        let m = Arc::new(self.radial_clip(radius));
        let mut w = self.clipped.write().expect("clip cache poisoned");
        if let Some((_, existing)) = w.iter().find(|(k, _)| *k == key) {
            return Arc::clone(existing);
        }
        w.push((key, Arc::clone(&m)));
        m
    }

    /// One point per row, `d` columns, no header; 17-significant-digit floats.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        for p in self.points() {
            let mut first = true;
            for &x in p {
                if !first {
                    out.push(',');
                }
                out.push_str(&float17(x));
                first = false;
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv_str(s: &str) -> Result<Self, MeasureError> {
        let mut rows = Vec::new();
        for (lineno, line) in s.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let row: Result<Vec<f64>, _> = line.split(',').map(|t| t.trim().parse()).collect();
            let row =
                row.map_err(|e| MeasureError::Parse(format!("line {}: {e}", lineno + 1)))?;
            rows.push(row);
        }
        Self::from_rows(rows)
    }

    pub fn write_csv(&self, path: &std::path::Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_csv_string())
    }

    pub fn read_csv(path: &std::path::Path) -> Result<Self, MeasureError> {
        let s = std::fs::read_to_string(path)
            .map_err(|e| MeasureError::Parse(format!("{}: {e}", path.display())))?;
        Self::from_csv_str(&s)
    }

    /// JSON array-of-arrays form.
    pub fn to_json_string(&self) -> String {
        serde_json::to_string(self).expect("cloud serialization cannot fail")
    }

    pub fn from_json_str(s: &str) -> Result<Self, MeasureError> {
        serde_json::from_str(s).map_err(|e| MeasureError::Parse(e.to_string()))
    }
}

impl Serialize for EmpiricalMeasure {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.len()))?;
        for p in self.points() {
            seq.serialize_element(p)?;
        }
        seq.end()
    }
}

impl<'de> Deserialize<'de> for EmpiricalMeasure {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct RowsVisitor;
        impl<'de> Visitor<'de> for RowsVisitor {
            type Value = EmpiricalMeasure;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("an array of equal-length point arrays")
            }
            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Self::Value, A::Error> {
                let mut rows: Vec<Vec<f64>> = Vec::new();
                while let Some(row) = seq.next_element::<Vec<f64>>()? {
                    rows.push(row);
                }
                EmpiricalMeasure::from_rows(rows).map_err(serde::de::Error::custom)
            }
        }
        deserializer.deserialize_seq(RowsVisitor)
    }
}

#[inline]
pub(crate) fn norm(x: &[f64]) -> f64 {
    match x.len() {
        1 => x[0].abs(),
        _ => x.iter().map(|v| v * v).sum::<f64>().sqrt(),
    }
}

#[inline]
fn clip_extend(x: &[f64], radius: f64, out: &mut Vec<f64>) {
    let n = norm(x);
    if n <= radius {
        out.extend_from_slice(x);
    } else {
        let scale = radius / n;
        out.extend(x.iter().map(|v| v * scale));
    }
}

/// Radial projection onto the closed ball of radius `radius`:
/// `x` unchanged if `|x| <= radius`, else `radius * x / |x|`. Maps 0 to 0.
pub fn radial_clip(x: &[f64], radius: f64) -> Vec<f64> {
    assert!(radius > 0.0, "truncation radius must be positive");
    let mut out = Vec::with_capacity(x.len());
    clip_extend(x, radius, &mut out);
    out
}

/// In-place variant used on hot paths.
pub(crate) fn radial_clip_into(x: &[f64], radius: f64, out: &mut [f64]) {
    let n = norm(x);
    if n <= radius {
        out.copy_from_slice(x);
    } else {
        let scale = radius / n;
        for (o, v) in out.iter_mut().zip(x) {
            *o = v * scale;
        }
    }
}

#[inline]
fn pow_cost(d: f64, r: f64) -> f64 {
    if r == 2.0 {
        d * d
    } else if r == 1.0 {
        d
    } else {
        d.powf(r)
    }
}

fn check_compatible(
    mu: &EmpiricalMeasure,
    nu: &EmpiricalMeasure,
) -> Result<(), MeasureError> {
    if mu.dim() != nu.dim() {
        return Err(MeasureError::DimensionMismatch {
            left: mu.dim(),
            right: nu.dim(),
        });
    }
    if mu.len() != nu.len() {
        return Err(MeasureError::UnequalSupportSize {
            left: mu.len(),
            right: nu.len(),
        });
    }
    Ok(())
}

fn sorted_1d(mu: &EmpiricalMeasure) -> Vec<f64> {
    let mut v = mu.as_flat().to_vec();
    // Stable sort; ties cost zero under any order, so tie-breaking is
    // observationally irrelevant.
    v.sort_by(f64::total_cmp);
    v
}

/// Exact Wasserstein distance `W_r` between equal-size uniform clouds.
///
/// 1-d clouds use the monotone (sorted) coupling, which is optimal on the
/// line; higher dimensions solve the N x N minimum-cost assignment with cost
/// `|x_i - y_j|^r`. The returned value is `(min mean cost)^(1/r)`.
pub fn wasserstein(
    mu: &EmpiricalMeasure,
    nu: &EmpiricalMeasure,
    r: f64,
) -> Result<f64, MeasureError> {
    assert!(r >= 1.0, "wasserstein order must satisfy r >= 1");
    check_compatible(mu, nu)?;
    let n = mu.len();
    if mu.dim() == 1 {
        let a = sorted_1d(mu);
        let b = sorted_1d(nu);
        let cost: f64 = a
            .iter()
            .zip(&b)
            .map(|(x, y)| pow_cost((x - y).abs(), r))
            .sum();
        return Ok((cost / n as f64).powf(1.0 / r));
    }
    if n > ASSIGNMENT_LIMIT {
        return Err(MeasureError::AssignmentTooLarge {
            n,
            limit: ASSIGNMENT_LIMIT,
        });
    }
    let mut cost = vec![0.0; n * n];
    for (i, x) in mu.points().enumerate() {
        for (j, y) in nu.points().enumerate() {
            let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
            cost[i * n + j] = pow_cost(d2.sqrt(), r);
        }
    }
    let (_, total) = solve_min_cost(&cost, n);
    Ok((total / n as f64).powf(1.0 / r))
}

/// Truncated (local) Wasserstein distance `W_{r,R}`: the transport cost of
/// the radially clipped clouds, with the same `1/r` root applied as for
/// `W_r`. Never exceeds `2 R`; equals `W_r` once `R` dominates every norm in
/// both clouds. Clipping is monotone in 1-d, so the clipped sorted pairing
/// attains the infimum there; in higher dimensions the assignment is solved
/// directly on clipped costs.
pub fn wasserstein_local(
    mu: &EmpiricalMeasure,
    nu: &EmpiricalMeasure,
    r: f64,
    radius: f64,
) -> Result<f64, MeasureError> {
    assert!(radius > 0.0, "truncation radius must be positive");
    check_compatible(mu, nu)?;
    wasserstein(&mu.radial_clip(radius), &nu.radial_clip(radius), r)
}

/// A permutation coupling of two equal-size uniform clouds: pair `i` of the
/// coupling matches `mu.point(pairs[i].0)` with `nu.point(pairs[i].1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    pairs: Vec<(usize, usize)>,
}

impl Coupling {
    /// The index coupling: particle `i` of `mu` with particle `i` of `nu`.
    pub fn identity(n: usize) -> Self {
        Coupling {
            pairs: (0..n).map(|i| (i, i)).collect(),
        }
    }

    /// Couple `mu.point(i)` with `nu.point(perm[i])`.
    pub fn from_permutation(perm: &[usize]) -> Result<Self, MeasureError> {
        let n = perm.len();
        let mut seen = vec![false; n];
        for &j in perm {
            if j >= n || seen[j] {
                return Err(MeasureError::InvalidPermutation);
            }
            seen[j] = true;
        }
        Ok(Coupling {
            pairs: perm.iter().copied().enumerate().collect(),
        })
    }

    /// The cost-optimal coupling for exponent `r` (sorted pairing in 1-d,
    /// assignment otherwise).
    pub fn optimal(
        mu: &EmpiricalMeasure,
        nu: &EmpiricalMeasure,
        r: f64,
    ) -> Result<Self, MeasureError> {
        check_compatible(mu, nu)?;
        let n = mu.len();
        if mu.dim() == 1 {
            let argsort = |m: &EmpiricalMeasure| {
                let mut idx: Vec<usize> = (0..n).collect();
                idx.sort_by(|&a, &b| m.as_flat()[a].total_cmp(&m.as_flat()[b]));
                idx
            };
            let ix = argsort(mu);
            let iy = argsort(nu);
            return Ok(Coupling {
                pairs: ix.into_iter().zip(iy).collect(),
            });
        }
        if n > ASSIGNMENT_LIMIT {
            return Err(MeasureError::AssignmentTooLarge {
                n,
                limit: ASSIGNMENT_LIMIT,
            });
        }
        let mut cost = vec![0.0; n * n];
        for (i, x) in mu.points().enumerate() {
            for (j, y) in nu.points().enumerate() {
                let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                cost[i * n + j] = pow_cost(d2.sqrt(), r);
            }
        }
        let (assign, _) = solve_min_cost(&cost, n);
        Ok(Coupling {
            pairs: assign.into_iter().enumerate().collect(),
        })
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Mean transport cost `(1/N) sum |x_i - y_j|^r` under this coupling
    /// (no outer root).
    pub fn cost(
        &self,
        mu: &EmpiricalMeasure,
        nu: &EmpiricalMeasure,
        r: f64,
    ) -> Result<f64, MeasureError> {
        check_compatible(mu, nu)?;
        let mut total = 0.0;
        for &(i, j) in &self.pairs {
            let d2: f64 = mu
                .point(i)
                .iter()
                .zip(nu.point(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            total += pow_cost(d2.sqrt(), r);
        }
        Ok(total / self.pairs.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CounterRng;

    fn cloud(points: &[f64]) -> EmpiricalMeasure {
        EmpiricalMeasure::from_points_1d(points.to_vec())
    }

    #[test]
    fn moment_examples() {
        assert_eq!(cloud(&[0.0]).moment(2.0), 0.0);
        assert_eq!(cloud(&[-1.0, 1.0]).moment(4.0), 1.0);
        let m = cloud(&[1.0, 2.0, 3.0]).moment(2.0);
        assert!((m - (14.0_f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn moment_scaling() {
        let mut rng = CounterRng::new(3, 0, 0);
        for _ in 0..20 {
            let pts: Vec<f64> = (0..9).map(|_| rng.uniform_in(-5.0, 5.0)).collect();
            let c = rng.uniform_in(0.1, 4.0);
            let mu = cloud(&pts);
            let scaled = cloud(&pts.iter().map(|x| c * x).collect::<Vec<_>>());
            for r in [1.0, 2.0, 3.5] {
                assert!((scaled.moment(r) - c * mu.moment(r)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn radial_clip_examples() {
        assert_eq!(radial_clip(&[3.0], 2.0), vec![2.0]);
        assert_eq!(radial_clip(&[3.0, 4.0], 10.0), vec![3.0, 4.0]);
        let clipped = radial_clip(&[3.0, 4.0], 1.0);
        assert!((clipped[0] - 0.6).abs() < 1e-15);
        assert!((clipped[1] - 0.8).abs() < 1e-15);
        assert_eq!(radial_clip(&[0.0, 0.0], 1.0), vec![0.0, 0.0]);
    }

    #[test]
    fn pushforward_examples_and_idempotence() {
        assert_eq!(cloud(&[0.5]).radial_clip(1.0), cloud(&[0.5]));
        assert_eq!(cloud(&[-5.0, 5.0]).radial_clip(2.0), cloud(&[-2.0, 2.0]));
        assert_eq!(
            cloud(&[1.0, 3.0, -4.0]).radial_clip(2.0),
            cloud(&[1.0, 2.0, -2.0])
        );
        let mu = cloud(&[1.0, 3.0, -4.0, 0.2]);
        let once = mu.radial_clip(2.0);
        let twice = once.radial_clip(2.0);
        assert_eq!(once, twice);
    }

    #[test]
    fn wasserstein_examples() {
        assert_eq!(wasserstein(&cloud(&[0.0]), &cloud(&[1.0]), 1.0).unwrap(), 1.0);
        let w = wasserstein(&cloud(&[0.0, 2.0]), &cloud(&[1.0, 3.0]), 2.0).unwrap();
        assert!((w - 1.0).abs() < 1e-15);
        let same = cloud(&[0.3, -1.7, 4.0]);
        for r in [1.0, 2.0, 4.0] {
            assert_eq!(wasserstein(&same, &same.clone(), r).unwrap(), 0.0);
        }
    }

    #[test]
    fn wasserstein_rejects_bad_inputs() {
        let a = cloud(&[0.0, 1.0]);
        let b = cloud(&[0.0]);
        assert!(matches!(
            wasserstein(&a, &b, 2.0),
            Err(MeasureError::UnequalSupportSize { .. })
        ));
        let c = EmpiricalMeasure::from_rows(vec![vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap();
        assert!(matches!(
            wasserstein(&a, &c, 2.0),
            Err(MeasureError::DimensionMismatch { .. })
        ));
        let big =
            EmpiricalMeasure::from_flat(vec![0.0; (ASSIGNMENT_LIMIT + 1) * 2], 2).unwrap();
        assert!(matches!(
            wasserstein(&big, &big.clone(), 2.0),
            Err(MeasureError::AssignmentTooLarge { .. })
        ));
    }

    #[test]
    fn wasserstein_local_examples() {
        let w = wasserstein_local(&cloud(&[0.0]), &cloud(&[5.0]), 1.0, 2.0).unwrap();
        assert_eq!(w, 2.0);
        let w = wasserstein_local(&cloud(&[0.1]), &cloud(&[0.9]), 2.0, 1.0).unwrap();
        assert!((w - 0.8).abs() < 1e-15);
        let w = wasserstein_local(&cloud(&[10.0]), &cloud(&[20.0]), 1.0, 1.0).unwrap();
        assert_eq!(w, 0.0);
    }

    #[test]
    fn local_distance_is_monotone_in_radius_and_converges() {
        let mut rng = CounterRng::new(11, 0, 0);
        for _ in 0..25 {
            let a: Vec<f64> = (0..8).map(|_| rng.uniform_in(-6.0, 6.0)).collect();
            let b: Vec<f64> = (0..8).map(|_| rng.uniform_in(-6.0, 6.0)).collect();
            let (mu, nu) = (cloud(&a), cloud(&b));
            let r = 2.0;
            let full = wasserstein(&mu, &nu, r).unwrap();
            let mut prev = 0.0;
            for radius in [0.5, 1.0, 2.0, 4.0, 8.0] {
                let w = wasserstein_local(&mu, &nu, r, radius).unwrap();
                assert!(w + 1e-12 >= prev, "not monotone at radius {radius}");
                assert!(w <= 2.0 * radius + 1e-12);
                prev = w;
            }
            // Radius beyond every norm: exact equality.
            let w = wasserstein_local(&mu, &nu, r, 7.0).unwrap();
            assert_eq!(w, full);
        }
    }

    #[test]
    fn metric_axioms_on_random_clouds() {
        let mut rng = CounterRng::new(5, 0, 0);
        for case in 0..40 {
            let n = 2 + case % 5;
            let draw = |rng: &mut CounterRng| -> EmpiricalMeasure {
                cloud(
                    &(0..n)
                        .map(|_| rng.uniform_in(-3.0, 3.0))
                        .collect::<Vec<_>>(),
                )
            };
            let (a, b, c) = (draw(&mut rng), draw(&mut rng), draw(&mut rng));
            for r in [1.0, 2.0] {
                let ab = wasserstein(&a, &b, r).unwrap();
                let ba = wasserstein(&b, &a, r).unwrap();
                assert_eq!(ab, ba, "symmetry");
                let ac = wasserstein(&a, &c, r).unwrap();
                let cb = wasserstein(&c, &b, r).unwrap();
                assert!(ab <= ac + cb + 1e-9, "triangle inequality");
            }
            assert_eq!(wasserstein(&a, &a.clone(), 2.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn csv_and_json_round_trip_bit_exactly() {
        let mu = EmpiricalMeasure::from_rows(vec![
            vec![std::f64::consts::PI, -1.0e-17],
            vec![2.0 / 3.0, 1.0e300],
        ])
        .unwrap();
        let back = EmpiricalMeasure::from_csv_str(&mu.to_csv_string()).unwrap();
        assert_eq!(mu, back);
        let back = EmpiricalMeasure::from_json_str(&mu.to_json_string()).unwrap();
        assert_eq!(mu, back);
    }

    #[test]
    fn constructors_reject_invalid() {
        assert!(matches!(
            EmpiricalMeasure::from_flat(vec![], 1),
            Err(MeasureError::EmptyCloud)
        ));
        assert!(matches!(
            EmpiricalMeasure::from_flat(vec![1.0, 2.0, 3.0], 2),
            Err(MeasureError::RaggedData { .. })
        ));
        assert!(matches!(
            EmpiricalMeasure::from_flat(vec![1.0, f64::NAN], 1),
            Err(MeasureError::NonFinite { index: 1 })
        ));
        assert!(matches!(
            EmpiricalMeasure::from_rows(vec![vec![1.0], vec![1.0, 2.0]]),
            Err(MeasureError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn coupling_identity_and_optimal_cost() {
        let mu = cloud(&[0.0, 2.0]);
        let nu = cloud(&[3.0, 1.0]);
        let id = Coupling::identity(2);
        // |0-3| + |2-1| vs optimal |0-1| + |2-3|
        assert_eq!(id.cost(&mu, &nu, 1.0).unwrap(), 2.0);
        let opt = Coupling::optimal(&mu, &nu, 2.0).unwrap();
        assert_eq!(opt.cost(&mu, &nu, 2.0).unwrap(), 1.0);
        assert!(matches!(
            Coupling::from_permutation(&[0, 0]),
            Err(MeasureError::InvalidPermutation)
        ));
    }

    #[test]
    fn cached_statistics_match_direct_computation() {
        let mu = cloud(&[1.0, -2.0, 3.5]);
        assert_eq!(mu.mean_1d(), (1.0 - 2.0 + 3.5) / 3.0);
        assert_eq!(mu.raw_moment_1d(3), (1.0 - 8.0 + 42.875) / 3.0);
        let c = mu.clipped_abs_mean(1.0, 2.0);
        assert!((c - (1.0 + 2.0 + 2.0) / 3.0).abs() < 1e-15);
        // Second call hits the cache and returns the identical value.
        assert_eq!(c, mu.clipped_abs_mean(1.0, 2.0));
        let shared = mu.radial_clip_shared(2.0);
        assert_eq!(*shared, mu.radial_clip(2.0));
        assert!(Arc::ptr_eq(&shared, &mu.radial_clip_shared(2.0)));
    }
}
