//! Scratch calibration runs for pinning acceptance fixtures. Not shipped.

use std::time::Instant;

use mvsde::invariant::{cauchy_probe, fit_contraction, stationary_summary_from_cloud};
use mvsde::lyapunov::fit_decay_rate;
use mvsde::rng::CounterRng;
use mvsde::{
    cubic_interaction, landau_linear, mean_field_ou, run, run_coupled,
    truncation_convergence_probe, EmpiricalMeasure, SimConfig, Taming,
};

fn gaussian_cloud(n: usize, std: f64, seed: u64) -> EmpiricalMeasure {
    let mut rng = CounterRng::new(seed, 0, 0);
    EmpiricalMeasure::from_points_1d((0..n).map(|_| std * rng.standard_normal()).collect())
}

fn main() {
    let which = std::env::args().nth(1).unwrap_or_else(|| "all".into());

    if which == "c5" || which == "all" {
        // Criterion 5: landau_linear alpha=0.25, 4th moment rate.
        for seed in [1u64, 2, 3, 4, 5] {
            let t0 = Instant::now();
            let cfg = SimConfig {
                dt: 1e-3,
                t_end: 2.0,
                n_particles: 100_000,
                seed,
                taming: Taming::None,
                record_every: 10,
                moment_orders: vec![4.0],
            };
            let init = gaussian_cloud(cfg.n_particles, 1.0, seed * 1000 + 7);
            let (_, traj) = run(&init, &landau_linear(0.25), &cfg).unwrap();
            print!("c5 seed={seed} ({:.1}s):", t0.elapsed().as_secs_f64());
            for w in [(0.05, 0.5), (0.05, 0.4), (0.0, 0.5), (0.1, 0.6)] {
                let (rate, r2) = fit_decay_rate(&traj, 4.0, w).unwrap();
                print!("  [{},{}] -> {rate:.4} (r2={r2:.4})", w.0, w.1);
            }
            println!();
        }
    }

    if which == "c6" || which == "all" {
        // Criterion 6: cubic L=1 M=2 tamed, 4th moment rate.
        for seed in [1u64, 2, 3] {
            let t0 = Instant::now();
            let cfg = SimConfig {
                dt: 1e-3,
                t_end: 2.0,
                n_particles: 100_000,
                seed,
                taming: Taming::Tamed,
                record_every: 10,
                moment_orders: vec![4.0],
            };
            let init = gaussian_cloud(cfg.n_particles, 1.0, seed * 1000 + 11);
            let (_, traj) = run(&init, &cubic_interaction(1.0, 2.0).unwrap(), &cfg).unwrap();
            print!("c6 seed={seed} ({:.1}s):", t0.elapsed().as_secs_f64());
            for w in [(0.2, 2.0), (0.5, 2.0), (1.0, 2.0)] {
                let (rate, r2) = fit_decay_rate(&traj, 4.0, w).unwrap();
                print!("  [{},{}] -> {rate:.4} (r2={r2:.4})", w.0, w.1);
            }
            println!();
        }
    }

    if which == "c7" || which == "all" {
        // Criterion 7: coupled contraction rates.
        for seed in [1u64, 2] {
            let t0 = Instant::now();
            let n = 20_000;
            let cfg = SimConfig {
                dt: 1e-3,
                t_end: 2.0,
                n_particles: n,
                seed,
                taming: Taming::None,
                record_every: 10,
                moment_orders: vec![2.0],
            };
            let init_x = gaussian_cloud(n, 1.0, seed * 1000 + 13);
            let ys: Vec<f64> = init_x
                .as_flat()
                .iter()
                .enumerate()
                .map(|(i, v)| v + if i % 2 == 0 { 1.0 } else { -1.0 })
                .collect();
            let init_y = EmpiricalMeasure::from_points_1d(ys);
            let ou_traj = run_coupled(&init_x, &init_y, &mean_field_ou(1.0).unwrap(), &cfg).unwrap();
            let ou = fit_contraction(&ou_traj, (0.2, 2.0)).unwrap();
            let ll_traj = run_coupled(&init_x, &init_y, &landau_linear(0.25), &cfg).unwrap();
            let ll = fit_contraction(&ll_traj, (0.2, 2.0)).unwrap();
            println!(
                "c7 seed={seed} ({:.1}s): OU rate {:.5} (w2 {:?})  landau rate {:.5} (w2 {:?})",
                t0.elapsed().as_secs_f64(),
                ou.rate,
                ou.w2_rate,
                ll.rate,
                ll.w2_rate
            );
        }
    }

    if which == "c8" || which == "all" {
        // Criterion 8: stationary OU summaries.
        for (alpha, seed) in [(0.5f64, 1u64), (1.0, 1), (1.0, 2)] {
            let t0 = Instant::now();
            let cfg = SimConfig {
                dt: 1e-3,
                t_end: 10.0,
                n_particles: 100_000,
                seed,
                taming: Taming::None,
                record_every: usize::MAX,
                moment_orders: vec![2.0],
            };
            let init = EmpiricalMeasure::dirac_zero(cfg.n_particles, 1);
            let (ens, _) = run(&init, &mean_field_ou(alpha).unwrap(), &cfg).unwrap();
            let s = stationary_summary_from_cloud(&ens.empirical(), cfg.t_end);
            println!(
                "c8 alpha={alpha} seed={seed} ({:.1}s): mean {:.5} +- {:.5}, var {:.5} (target {:.5}, rel {:.4}), kurt {:.5} +- {:.5}",
                t0.elapsed().as_secs_f64(),
                s.mean,
                s.stderr_mean,
                s.variance,
                1.0 / (2.0 * alpha),
                (s.variance - 1.0 / (2.0 * alpha)).abs() / (1.0 / (2.0 * alpha)),
                s.excess_kurtosis,
                s.stderr_kurtosis,
            );
        }
    }

    if which == "c9" || which == "all" {
        let t0 = Instant::now();
        let cfg = SimConfig {
            dt: 1e-3,
            t_end: 3.0,
            n_particles: 100_000,
            seed: 1,
            taming: Taming::None,
            record_every: 10,
            moment_orders: vec![2.0],
        };
        let rows = cauchy_probe(&mean_field_ou(1.0).unwrap(), &cfg, &[0.5, 1.0, 2.0], &[1.0])
            .unwrap();
        println!("c9 ({:.1}s):", t0.elapsed().as_secs_f64());
        let a = rows[0].w2 / (-2.0_f64 * 0.5).exp();
        for r in &rows {
            let envelope = a * (-2.0 * r.t).exp();
            println!(
                "  t={} s={} w2={:.6} +- {:.6}; envelope {:.6}; w2 - env = {:.6} ({} stderr)",
                r.t,
                r.s,
                r.w2,
                r.stderr,
                envelope,
                r.w2 - envelope,
                (r.w2 - envelope) / r.stderr
            );
        }
    }

    if which == "c11" || which == "all" {
        let t0 = Instant::now();
        let cfg = SimConfig {
            dt: 1e-3,
            t_end: 1.0,
            n_particles: 10_000,
            seed: 1,
            taming: Taming::None,
            record_every: 10,
            moment_orders: vec![2.0],
        };
        let init = EmpiricalMeasure::dirac_zero(cfg.n_particles, 1);
        let probe = truncation_convergence_probe(
            &mean_field_ou(1.0).unwrap(),
            &init,
            &[1.0, 2.0, 4.0, 8.0],
            &cfg,
        )
        .unwrap();
        println!(
            "c11 ({:.1}s): discrepancies {:?}",
            t0.elapsed().as_secs_f64(),
            probe.discrepancies
        );
    }
}
