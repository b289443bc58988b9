//! Exact minimum-cost assignment (Jonker-Volgenant shortest augmenting path).
//!
//! O(n^3) with dual potentials; deterministic: ties are broken by the lowest
//! column index, and no floating-point reduction depends on thread order.
//! Used by the multi-dimensional Wasserstein distance, where `cost[i][j] =
//! |x_i - y_j|^r` and the optimum over permutations is the transport optimum
//! for equal-size uniform clouds.

/// Solve the square assignment problem for the row-major `cost` matrix.
///
/// Returns `(assignment, total_cost)` where `assignment[row] = col`.
/// `cost` must have `n * n` finite entries.
pub(crate) fn solve_min_cost(cost: &[f64], n: usize) -> (Vec<usize>, f64) {
    assert_eq!(cost.len(), n * n, "cost matrix must be n*n");
    assert!(n > 0);

    // Potentials u (rows), v (cols); way[j] = previous column on the
    // augmenting path; 1-based sentinel slot 0 holds the current row.
    let mut u = vec![0.0_f64; n + 1];
    let mut v = vec![0.0_f64; n + 1];
    let mut match_col = vec![0_usize; n + 1]; // col -> row (1-based, 0 = free)
    let mut way = vec![0_usize; n + 1];

    for row in 1..=n {
        match_col[0] = row;
        let mut j0 = 0_usize;
        let mut min_v = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = match_col[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0_usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if cur < min_v[j] {
                    min_v[j] = cur;
                    way[j] = j0;
                }
                if min_v[j] < delta {
                    delta = min_v[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[match_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_v[j] -= delta;
                }
            }
            j0 = j1;
            if match_col[j0] == 0 {
                break;
            }
        }
        // Augment along the alternating path.
        loop {
            let j1 = way[j0];
            match_col[j0] = match_col[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![0_usize; n];
    for j in 1..=n {
        if match_col[j] > 0 {
            assignment[match_col[j] - 1] = j - 1;
        }
    }
    // Total from the original matrix, summed in row order for determinism.
    let total = assignment
        .iter()
        .enumerate()
        .map(|(i, &j)| cost[i * n + j])
        .sum();
    (assignment, total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CounterRng;

    fn brute_force(cost: &[f64], n: usize) -> f64 {
        fn rec(cost: &[f64], n: usize, row: usize, used: &mut [bool], acc: f64, best: &mut f64) {
            if row == n {
                if acc < *best {
                    *best = acc;
                }
                return;
            }
            for j in 0..n {
                if !used[j] {
                    used[j] = true;
                    rec(cost, n, row + 1, used, acc + cost[row * n + j], best);
                    used[j] = false;
                }
            }
        }
        let mut best = f64::INFINITY;
        rec(cost, n, 0, &mut vec![false; n], 0.0, &mut best);
        best
    }

    #[test]
    fn matches_brute_force_on_random_matrices() {
        let mut rng = CounterRng::new(7, 0, 0);
        for case in 0..300 {
            let n = 1 + (case % 7);
            let cost: Vec<f64> = (0..n * n).map(|_| rng.uniform_in(0.0, 10.0)).collect();
            let (perm, total) = solve_min_cost(&cost, n);
            // perm is a permutation
            let mut seen = vec![false; n];
            for &j in &perm {
                assert!(!seen[j]);
                seen[j] = true;
            }
            let expect = brute_force(&cost, n);
            assert!(
                (total - expect).abs() <= 1e-9 * (1.0 + expect.abs()),
                "n={n} got {total} want {expect}"
            );
        }
    }

    #[test]
    fn identity_is_optimal_on_diagonal_zero() {
        let n = 5;
        let mut cost = vec![1.0; n * n];
        for i in 0..n {
            cost[i * n + i] = 0.0;
        }
        let (_, total) = solve_min_cost(&cost, n);
        assert_eq!(total, 0.0);
    }

    #[test]
    fn single_entry() {
        let (perm, total) = solve_min_cost(&[3.5], 1);
        assert_eq!(perm, vec![0]);
        assert_eq!(total, 3.5);
    }
}
