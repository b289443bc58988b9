//! Task implementations. Every task writes `config.resolved` (the full
//! resolved configuration, a valid config file itself) plus task-specific
//! machine-readable outputs; wall-clock timestamps go only to `run.log` so
//! reruns with the same config are byte-identical elsewhere.

use std::fs;
use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use mvsde::conditions::{
    check_continuity_in_measure, check_growth, check_local_lipschitz, check_local_with_decay,
    check_strong_monotonicity, sample_cloud, Assumption, CloudFamily, MarginReport, SampleDesign,
};
use mvsde::invariant::{
    cauchy_table_to_csv, cauchy_probe, fit_contraction, solve_self_consistency,
    stationary_summary_from_cloud, ErgodicityReport,
};
use mvsde::lyapunov::stability_report;
use mvsde::rng::split_seed;
use mvsde::{run, run_coupled, EmpiricalMeasure, SimConfig, Taming};

use crate::config::{ExperimentConfig, ResolvedSim, Task};
use crate::error::CliError;
use crate::registry::{build_bundle, build_init, build_model};

fn sim_config(sim: &ResolvedSim) -> SimConfig {
    SimConfig {
        dt: sim.dt,
        t_end: sim.t_end,
        n_particles: sim.n_particles,
        seed: sim.seed,
        taming: if sim.taming == "tamed" {
            Taming::Tamed
        } else {
            Taming::None
        },
        record_every: sim.record_every,
        moment_orders: sim.moment_orders.clone(),
    }
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents)?;
    Ok(())
}

pub fn run_task(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let out_dir = cfg.output_dir();
    fs::create_dir_all(&out_dir)?;
    write(&out_dir.join("config.resolved"), &cfg.to_resolved_toml())?;

    let started = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let clock = Instant::now();

    match cfg.task() {
        Task::Simulate => cmd_simulate(cfg, &out_dir)?,
        Task::Stability => cmd_stability(cfg, &out_dir)?,
        Task::Contraction => cmd_contraction(cfg, &out_dir)?,
        Task::Invariant => cmd_invariant(cfg, &out_dir)?,
        Task::Check => cmd_check(cfg, &out_dir)?,
    }

    // Timestamps live only here; every other output is deterministic.
    let log = format!(
        "task={}\nstarted_unix={}\nduration_s={:.3}\n",
        cfg.task,
        started,
        clock.elapsed().as_secs_f64()
    );
    write(&out_dir.join("run.log"), &log)?;
    Ok(())
}

fn cmd_simulate(cfg: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    let model = build_model(&cfg.model)?;
    let init = build_init(&cfg.sim);
    let sim_cfg = sim_config(&cfg.sim);
    let (ens, traj) = run(&init, &model, &sim_cfg)?;
    write(&out.join("moments.csv"), &traj.to_csv_string())?;
    write(&out.join("terminal_cloud.csv"), &ens.empirical().to_csv_string())?;
    Ok(())
}

fn with_order(orders: &[f64], r: f64) -> Vec<f64> {
    let mut v = orders.to_vec();
    if !v.contains(&r) {
        v.push(r);
    }
    v
}

fn cmd_stability(cfg: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    let st = cfg.stability.as_ref().expect("stability section resolved");
    let model = build_model(&cfg.model)?;
    let bundle = build_bundle(&st.bundle, st.bundle_alpha, st.r)?;
    let init = build_init(&cfg.sim);
    let mut sim_cfg = sim_config(&cfg.sim);
    sim_cfg.moment_orders = with_order(&sim_cfg.moment_orders, st.r);
    let (ens, traj) = run(&init, &model, &sim_cfg)?;
    write(&out.join("moments.csv"), &traj.to_csv_string())?;
    write(&out.join("terminal_cloud.csv"), &ens.empirical().to_csv_string())?;

    // Condition margins are evaluated on a sampled cloud family.
    let clouds: Vec<EmpiricalMeasure> = {
        let seed = split_seed(cfg.sim.seed, "stability-clouds");
        let family = CloudFamily::default();
        (0..st.n_clouds)
            .map(|i| sample_cloud(&family, 1, seed, i as u64))
            .collect()
    };
    // Optional stationary-floor subtraction before the log fit.
    let fit_traj = if st.floor != 0.0 {
        let mut t = traj.clone();
        for series in &mut t.values {
            for v in series.iter_mut() {
                *v -= st.floor;
            }
        }
        t
    } else {
        traj
    };
    let report = stability_report(
        &bundle,
        &model,
        &fit_traj,
        st.r,
        (st.window[0], st.window[1]),
        st.gamma_claimed,
        &clouds,
        (st.c1, st.c2, st.c2p),
    )?;
    write(&out.join("stability_report.json"), &report.to_json_string())?;
    println!(
        "stability: gamma_hat = {:.6} (claimed {:.6}), drift margin {:.3e}, sandwich {:.3e}",
        report.gamma_hat,
        report.gamma_claimed,
        report.margins.drift,
        report.margins.sandwich
    );
    Ok(())
}

fn displaced(init: &EmpiricalMeasure, offset: f64, kind: &str) -> EmpiricalMeasure {
    let data: Vec<f64> = init
        .as_flat()
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let s = if kind == "alternating" && i % 2 == 1 {
                -1.0
            } else {
                1.0
            };
            v + s * offset
        })
        .collect();
    EmpiricalMeasure::from_flat(data, init.dim()).expect("displaced cloud is finite")
}

fn cmd_contraction(cfg: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    let ct = cfg
        .contraction
        .as_ref()
        .expect("contraction section resolved");
    let model = build_model(&cfg.model)?;
    let init_x = build_init(&cfg.sim);
    let init_y = displaced(&init_x, ct.offset, &ct.offset_kind);
    let sim_cfg = sim_config(&cfg.sim);
    let traj = run_coupled(&init_x, &init_y, &model, &sim_cfg)?;
    write(&out.join("coupling.csv"), &traj.to_csv_string())?;
    let est = fit_contraction(&traj, (ct.window[0], ct.window[1]))?;
    write(
        &out.join("contraction.json"),
        &serde_json::to_string_pretty(&est).expect("estimate serializes"),
    )?;
    println!(
        "contraction: rate = {:.6} (r^2 = {:.4})",
        est.rate, est.r_squared
    );
    Ok(())
}

fn cmd_invariant(cfg: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    let inv = cfg.invariant.as_ref().expect("invariant section resolved");
    let model = build_model(&cfg.model)?;
    let sim_cfg = sim_config(&cfg.sim);

    let cauchy = cauchy_probe(&model, &sim_cfg, &inv.t_grid, &inv.s_grid)?;
    write(&out.join("cauchy_table.csv"), &cauchy_table_to_csv(&cauchy))?;

    // Stationarity run: from the Dirac at the origin, out to at least
    // 10/alpha for the OU model.
    let alpha = cfg.model.alpha;
    let t_end = match (cfg.model.preset.as_str(), alpha) {
        ("mean_field_ou", Some(a)) => cfg.sim.t_end.max(10.0 / a),
        _ => cfg.sim.t_end,
    };
    let stat_cfg = SimConfig {
        t_end,
        record_every: usize::MAX,
        ..sim_cfg.clone()
    };
    let init = EmpiricalMeasure::dirac_zero(stat_cfg.n_particles, 1);
    let (ens, _) = run(&init, &model, &stat_cfg)?;
    let terminal = ens.empirical();
    write(&out.join("terminal_cloud.csv"), &terminal.to_csv_string())?;
    let stationary_summary = stationary_summary_from_cloud(&terminal, t_end);

    // Contraction probe: Dirac vs mean-zero displaced start, same noise.
    let init_y = displaced(&init, inv.contraction_offset, "alternating");
    let coupled = run_coupled(&init, &init_y, &model, &sim_cfg)?;
    let contraction = fit_contraction(&coupled, (0.1 * sim_cfg.t_end, sim_cfg.t_end)).ok();

    let m_star = match cfg.model.preset.as_str() {
        "mean_field_ou" => Some(solve_self_consistency(alpha.unwrap_or(1.0)).m_star),
        _ => None,
    };
    let report = ErgodicityReport {
        cauchy_table: cauchy,
        contraction,
        stationary_summary,
        m_star,
    };
    write(&out.join("ergodicity_report.json"), &report.to_json_string())?;
    println!(
        "invariant: stationary mean = {:.6}, variance = {:.6}, excess kurtosis = {:.6}",
        report.stationary_summary.mean,
        report.stationary_summary.variance,
        report.stationary_summary.excess_kurtosis
    );
    Ok(())
}

fn run_checker(
    assumption: Assumption,
    model: &mvsde::CoefficientPair,
    design: &SampleDesign,
    decay_k: f64,
    decay_delta: f64,
) -> MarginReport {
    match assumption {
        Assumption::A1 | Assumption::B1 => check_local_lipschitz(model, design, assumption),
        Assumption::A2 | Assumption::B2 => check_growth(model, design, assumption),
        Assumption::A3 => check_continuity_in_measure(model, design),
        Assumption::A4 | Assumption::B3 => {
            check_local_with_decay(model, design, decay_k, decay_delta)
        }
        Assumption::H => check_strong_monotonicity(model, design),
    }
}

fn cmd_check(cfg: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    let ck = cfg.check.as_ref().expect("check section resolved");
    let model = build_model(&cfg.model)?;
    let design = SampleDesign {
        n_points: ck.n_points,
        radius_grid: ck.radius_grid.clone(),
        family: CloudFamily {
            components: ck.components,
            mean_range: (ck.mean_range[0], ck.mean_range[1]),
            scale_range: (ck.scale_range[0], ck.scale_range[1]),
            cloud_size: ck.cloud_size,
        },
        seed: cfg.sim.seed,
        r: ck.r,
        times: ck.times.clone(),
        dim: 1,
    };
    println!("assumption checks ({} samples per radius):", ck.n_points);
    for name in &ck.assumptions {
        let assumption: Assumption = name
            .parse()
            .map_err(|e| CliError::Config(format!("{e}")))?;
        let report = run_checker(assumption, &model, &design, ck.decay_k, ck.decay_delta);
        let (mu_file, nu_file) = if let Some(w) = &report.witness {
            let mu_name = format!("check_{assumption}_witness_mu.csv");
            w.mu.write_csv(&out.join(&mu_name))?;
            let nu_name = w.nu.as_ref().map(|nu| {
                let name = format!("check_{assumption}_witness_nu.csv");
                nu.write_csv(&out.join(&name)).map(|_| name)
            });
            match nu_name {
                Some(Ok(name)) => (Some(mu_name), Some(name)),
                Some(Err(e)) => return Err(e.into()),
                None => (Some(mu_name), None),
            }
        } else {
            (None, None)
        };
        let json = report.to_json_value(mu_file.as_deref(), nu_file.as_deref());
        write(
            &out.join(format!("check_{assumption}.json")),
            &serde_json::to_string_pretty(&json).expect("report serializes"),
        )?;
        println!("  {}", report.summary_line());
    }
    Ok(())
}
