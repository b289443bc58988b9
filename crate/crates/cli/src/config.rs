//! Experiment configuration: a TOML file with nested sections and key=value
//! leaves. Unknown keys are a hard error (no silent typo tolerance), missing
//! required keys are reported with their full path (`sim.dt`), and the fully
//! resolved config (defaults materialized) is echoed to
//! `<output>/config.resolved`, which re-feeds as a valid input and reproduces
//! the run exactly.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::Value;

use crate::error::CliError;

fn cfg_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Simulate,
    Stability,
    Contraction,
    Invariant,
    Check,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Simulate => "simulate",
            Task::Stability => "stability",
            Task::Contraction => "contraction",
            Task::Invariant => "invariant",
            Task::Check => "check",
        }
    }

    fn from_name(s: &str) -> Result<Self, CliError> {
        match s {
            "simulate" => Ok(Task::Simulate),
            "stability" => Ok(Task::Stability),
            "contraction" => Ok(Task::Contraction),
            "invariant" => Ok(Task::Invariant),
            "check" => Ok(Task::Check),
            other => Err(cfg_err(format!(
                "key `task` must be one of simulate|stability|contraction|invariant|check, got `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResolvedModel {
    pub preset: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResolvedSim {
    pub dt: f64,
    pub t_end: f64,
    pub n_particles: usize,
    pub seed: u64,
    pub taming: String,
    pub record_every: usize,
    pub moment_orders: Vec<f64>,
    pub init: String,
    pub init_mean: f64,
    pub init_std: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResolvedOutput {
    pub dir: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResolvedStability {
    pub bundle: String,
    pub r: f64,
    pub window: [f64; 2],
    pub gamma_claimed: f64,
    pub bundle_alpha: f64,
    pub c1: f64,
    pub c2: f64,
    pub c2p: f64,
    pub n_clouds: usize,
    /// Constant subtracted from the moment series before the log fit (for
    /// dynamics relaxing to a nonzero stationary level).
    pub floor: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResolvedContraction {
    pub offset: f64,
    pub offset_kind: String,
    pub window: [f64; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResolvedInvariant {
    pub t_grid: Vec<f64>,
    pub s_grid: Vec<f64>,
    pub contraction_offset: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResolvedCheck {
    pub assumptions: Vec<String>,
    pub n_points: usize,
    pub radius_grid: Vec<f64>,
    pub cloud_size: usize,
    pub components: usize,
    pub mean_range: [f64; 2],
    pub scale_range: [f64; 2],
    pub r: f64,
    pub times: Vec<f64>,
    pub decay_k: f64,
    pub decay_delta: f64,
}

/// Fully resolved experiment configuration; serializes back to valid TOML.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub task: String,
    pub model: ResolvedModel,
    pub sim: ResolvedSim,
    pub output: ResolvedOutput,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stability: Option<ResolvedStability>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contraction: Option<ResolvedContraction>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub invariant: Option<ResolvedInvariant>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub check: Option<ResolvedCheck>,
}

impl ExperimentConfig {
    pub fn task(&self) -> Task {
        Task::from_name(&self.task).expect("resolved task is valid")
    }

    pub fn to_resolved_toml(&self) -> String {
        toml::to_string_pretty(self).expect("resolved config serializes")
    }

    pub fn output_dir(&self) -> PathBuf {
        PathBuf::from(&self.output.dir)
    }
}

struct Section<'a> {
    name: &'static str,
    table: Option<&'a toml::map::Map<String, Value>>,
}

impl<'a> Section<'a> {
    fn get(&self, key: &str) -> Option<&'a Value> {
        self.table.and_then(|t| t.get(key))
    }

    fn path(&self, key: &str) -> String {
        if self.name.is_empty() {
            key.to_string()
        } else {
            format!("{}.{}", self.name, key)
        }
    }

    fn check_keys(&self, allowed: &[&str]) -> Result<(), CliError> {
        if let Some(t) = self.table {
            let allowed: BTreeSet<&str> = allowed.iter().copied().collect();
            for k in t.keys() {
                if !allowed.contains(k.as_str()) {
                    return Err(cfg_err(format!("unknown key `{}`", self.path(k))));
                }
            }
        }
        Ok(())
    }

    fn req_f64(&self, key: &str) -> Result<f64, CliError> {
        self.opt_f64(key)?
            .ok_or_else(|| cfg_err(format!("missing required key `{}`", self.path(key))))
    }

    fn opt_f64(&self, key: &str) -> Result<Option<f64>, CliError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Float(f)) => Ok(Some(*f)),
            Some(Value::Integer(i)) => Ok(Some(*i as f64)),
            Some(_) => Err(cfg_err(format!("key `{}` must be a number", self.path(key)))),
        }
    }

    fn opt_usize(&self, key: &str) -> Result<Option<usize>, CliError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Integer(i)) if *i >= 0 => Ok(Some(*i as usize)),
            Some(_) => Err(cfg_err(format!(
                "key `{}` must be a nonnegative integer",
                self.path(key)
            ))),
        }
    }

    fn req_usize(&self, key: &str) -> Result<usize, CliError> {
        self.opt_usize(key)?
            .ok_or_else(|| cfg_err(format!("missing required key `{}`", self.path(key))))
    }

    fn opt_u64(&self, key: &str) -> Result<Option<u64>, CliError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Integer(i)) if *i >= 0 => Ok(Some(*i as u64)),
            Some(_) => Err(cfg_err(format!(
                "key `{}` must be a nonnegative integer",
                self.path(key)
            ))),
        }
    }

    fn opt_str(&self, key: &str) -> Result<Option<String>, CliError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(_) => Err(cfg_err(format!("key `{}` must be a string", self.path(key)))),
        }
    }

    fn req_str(&self, key: &str) -> Result<String, CliError> {
        self.opt_str(key)?
            .ok_or_else(|| cfg_err(format!("missing required key `{}`", self.path(key))))
    }

    fn opt_f64_array(&self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Array(arr)) => {
                let mut out = Vec::with_capacity(arr.len());
                for v in arr {
                    match v {
                        Value::Float(f) => out.push(*f),
                        Value::Integer(i) => out.push(*i as f64),
                        _ => {
                            return Err(cfg_err(format!(
                                "key `{}` must be an array of numbers",
                                self.path(key)
                            )))
                        }
                    }
                }
                Ok(Some(out))
            }
            Some(_) => Err(cfg_err(format!(
                "key `{}` must be an array of numbers",
                self.path(key)
            ))),
        }
    }

    fn req_f64_array(&self, key: &str) -> Result<Vec<f64>, CliError> {
        self.opt_f64_array(key)?
            .ok_or_else(|| cfg_err(format!("missing required key `{}`", self.path(key))))
    }

    fn opt_str_array(&self, key: &str) -> Result<Option<Vec<String>>, CliError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Array(arr)) => {
                let mut out = Vec::with_capacity(arr.len());
                for v in arr {
                    match v {
                        Value::String(s) => out.push(s.clone()),
                        _ => {
                            return Err(cfg_err(format!(
                                "key `{}` must be an array of strings",
                                self.path(key)
                            )))
                        }
                    }
                }
                Ok(Some(out))
            }
            Some(_) => Err(cfg_err(format!(
                "key `{}` must be an array of strings",
                self.path(key)
            ))),
        }
    }

    fn opt_pair(&self, key: &str) -> Result<Option<[f64; 2]>, CliError> {
        match self.opt_f64_array(key)? {
            None => Ok(None),
            Some(v) if v.len() == 2 => Ok(Some([v[0], v[1]])),
            Some(_) => Err(cfg_err(format!(
                "key `{}` must be a two-element array [lo, hi]",
                self.path(key)
            ))),
        }
    }
}

/// Overrides applied after parsing: command-line flags beat the OUTPUT_DIR
/// environment variable, which beats the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
}

pub fn load_config(path: &Path, expected_task: Task, ov: &Overrides) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| cfg_err(format!("cannot read config {}: {e}", path.display())))?;
    parse_config(&text, expected_task, ov)
}

pub fn parse_config(
    text: &str,
    expected_task: Task,
    ov: &Overrides,
) -> Result<ExperimentConfig, CliError> {
    let root: Value = text
        .parse()
        .map_err(|e| cfg_err(format!("invalid TOML: {e}")))?;
    let root = root.as_table().ok_or_else(|| cfg_err("config must be a table"))?;

    // Top-level structure.
    for (k, v) in root {
        match k.as_str() {
            "task" => {
                if !v.is_str() {
                    return Err(cfg_err("key `task` must be a string"));
                }
            }
            "model" | "sim" | "output" | "stability" | "contraction" | "invariant" | "check" => {
                if !v.is_table() {
                    return Err(cfg_err(format!("key `{k}` must be a section (table)")));
                }
            }
            other => return Err(cfg_err(format!("unknown key `{other}`"))),
        }
    }
    let task_name = root
        .get("task")
        .and_then(Value::as_str)
        .ok_or_else(|| cfg_err("missing required key `task`"))?;
    let task = Task::from_name(task_name)?;
    if task != expected_task {
        return Err(cfg_err(format!(
            "config task is `{}` but the `{}` subcommand was invoked",
            task.name(),
            expected_task.name()
        )));
    }

    let section = |name: &'static str| Section {
        name,
        table: root.get(name).and_then(Value::as_table),
    };

    // Task sections other than the active one are rejected (typo safety).
    for other in ["stability", "contraction", "invariant", "check"] {
        if root.contains_key(other) && other != task.name() {
            return Err(cfg_err(format!(
                "section `{other}` is not allowed when task = `{}`",
                task.name()
            )));
        }
    }

    // [model]
    let model_sec = section("model");
    if model_sec.table.is_none() {
        return Err(cfg_err("missing required section `model`"));
    }
    model_sec.check_keys(&["preset", "alpha", "l", "m"])?;
    let preset = model_sec.req_str("preset")?;
    let model = match preset.as_str() {
        "mean_field_ou" | "landau_linear" => {
            if model_sec.get("l").is_some() || model_sec.get("m").is_some() {
                return Err(cfg_err(format!(
                    "preset `{preset}` takes only `model.alpha`"
                )));
            }
            ResolvedModel {
                preset: preset.clone(),
                alpha: Some(model_sec.req_f64("alpha")?),
                l: None,
                m: None,
            }
        }
        "cubic" => {
            if model_sec.get("alpha").is_some() {
                return Err(cfg_err("preset `cubic` takes `model.l` and `model.m`"));
            }
            ResolvedModel {
                preset: preset.clone(),
                alpha: None,
                l: Some(model_sec.req_f64("l")?),
                m: Some(model_sec.req_f64("m")?),
            }
        }
        "explosive_cubic" => ResolvedModel {
            preset: preset.clone(),
            alpha: None,
            l: None,
            m: None,
        },
        other => {
            return Err(cfg_err(format!(
                "unknown preset `{other}` (available: mean_field_ou, cubic, landau_linear, explosive_cubic)"
            )))
        }
    };

    // [sim]
    let sim_sec = section("sim");
    if sim_sec.table.is_none() {
        return Err(cfg_err("missing required section `sim`"));
    }
    sim_sec.check_keys(&[
        "dt",
        "t_end",
        "n_particles",
        "seed",
        "taming",
        "record_every",
        "moment_orders",
        "init",
        "init_mean",
        "init_std",
    ])?;
    let taming_default = if preset == "cubic" { "tamed" } else { "none" };
    let taming = sim_sec
        .opt_str("taming")?
        .unwrap_or_else(|| taming_default.to_string());
    if taming != "none" && taming != "tamed" {
        return Err(cfg_err(format!(
            "key `sim.taming` must be \"none\" or \"tamed\", got `{taming}`"
        )));
    }
    let init = sim_sec
        .opt_str("init")?
        .unwrap_or_else(|| "dirac_zero".to_string());
    if init != "dirac_zero" && init != "gaussian" {
        return Err(cfg_err(format!(
            "key `sim.init` must be \"dirac_zero\" or \"gaussian\", got `{init}`"
        )));
    }
    let sim = ResolvedSim {
        dt: sim_sec.req_f64("dt")?,
        t_end: sim_sec.req_f64("t_end")?,
        n_particles: sim_sec.req_usize("n_particles")?,
        seed: ov
            .seed
            .map(Ok)
            .unwrap_or_else(|| {
                sim_sec.opt_u64("seed")?.ok_or_else(|| {
                    cfg_err("missing required key `sim.seed`")
                })
            })?,
        taming,
        record_every: sim_sec.opt_usize("record_every")?.unwrap_or(10),
        moment_orders: sim_sec.opt_f64_array("moment_orders")?.unwrap_or_else(|| vec![2.0]),
        init,
        init_mean: sim_sec.opt_f64("init_mean")?.unwrap_or(0.0),
        init_std: sim_sec.opt_f64("init_std")?.unwrap_or(1.0),
    };

    // [output]
    let out_sec = section("output");
    out_sec.check_keys(&["dir"])?;
    let dir = if let Some(p) = &ov.output {
        p.display().to_string()
    } else if let Ok(env_dir) = std::env::var("OUTPUT_DIR") {
        env_dir
    } else {
        out_sec.opt_str("dir")?.unwrap_or_else(|| "out".to_string())
    };
    let output = ResolvedOutput { dir };

    let model_alpha = model.alpha;
    let model_l = model.l;

    // Task section.
    let mut cfg = ExperimentConfig {
        task: task.name().to_string(),
        model,
        sim,
        output,
        stability: None,
        contraction: None,
        invariant: None,
        check: None,
    };

    let default_window = [0.1 * cfg.sim.t_end, cfg.sim.t_end];
    match task {
        Task::Simulate => {}
        Task::Stability => {
            let sec = section("stability");
            if sec.table.is_none() {
                return Err(cfg_err("missing required section `stability`"));
            }
            sec.check_keys(&[
                "bundle",
                "r",
                "window",
                "gamma_claimed",
                "bundle_alpha",
                "c1",
                "c2",
                "c2p",
                "n_clouds",
                "floor",
            ])?;
            let bundle = sec.req_str("bundle")?;
            let bundle_alpha = match sec.opt_f64("bundle_alpha")? {
                Some(a) => a,
                None => model_alpha.unwrap_or(0.0),
            };
            let r = sec.opt_f64("r")?.unwrap_or(match bundle.as_str() {
                "example2_V" | "cubic_V4" => 4.0,
                _ => 2.0,
            });
            let gamma_claimed = match sec.opt_f64("gamma_claimed")? {
                Some(g) => g,
                None => default_gamma_claimed(&cfg.model, &bundle, r, model_alpha, model_l)
                    .ok_or_else(|| {
                        cfg_err(
                            "missing required key `stability.gamma_claimed` (no default for this model/bundle pair)",
                        )
                    })?,
            };
            let (c1_d, c2_d, c2p_d) = default_sandwich(&bundle, bundle_alpha);
            let floor_default = if cfg.model.preset == "mean_field_ou"
                && bundle == "abs_pow_r"
                && r == 2.0
            {
                // The second moment relaxes to 1/(2 alpha); fit the excess.
                1.0 / (2.0 * model_alpha.unwrap_or(1.0))
            } else {
                0.0
            };
            cfg.stability = Some(ResolvedStability {
                bundle,
                r,
                window: sec.opt_pair("window")?.unwrap_or(default_window),
                gamma_claimed,
                bundle_alpha,
                c1: sec.opt_f64("c1")?.unwrap_or(c1_d),
                c2: sec.opt_f64("c2")?.unwrap_or(c2_d),
                c2p: sec.opt_f64("c2p")?.unwrap_or(c2p_d),
                n_clouds: sec.opt_usize("n_clouds")?.unwrap_or(50),
                floor: sec.opt_f64("floor")?.unwrap_or(floor_default),
            });
        }
        Task::Contraction => {
            let sec = section("contraction");
            sec.check_keys(&["offset", "offset_kind", "window"])?;
            let offset_kind = sec
                .opt_str("offset_kind")?
                .unwrap_or_else(|| "alternating".to_string());
            if offset_kind != "alternating" && offset_kind != "constant" {
                return Err(cfg_err(format!(
                    "key `contraction.offset_kind` must be \"alternating\" or \"constant\", got `{offset_kind}`"
                )));
            }
            cfg.contraction = Some(ResolvedContraction {
                offset: sec.opt_f64("offset")?.unwrap_or(1.0),
                offset_kind,
                window: sec.opt_pair("window")?.unwrap_or(default_window),
            });
        }
        Task::Invariant => {
            let sec = section("invariant");
            if sec.table.is_none() {
                return Err(cfg_err("missing required section `invariant`"));
            }
            sec.check_keys(&["t_grid", "s_grid", "contraction_offset"])?;
            let t_grid = sec.req_f64_array("t_grid")?;
            let s_grid = sec.req_f64_array("s_grid")?;
            if t_grid.is_empty() {
                return Err(cfg_err("key `invariant.t_grid` must be nonempty"));
            }
            if s_grid.is_empty() {
                return Err(cfg_err("key `invariant.s_grid` must be nonempty"));
            }
            cfg.invariant = Some(ResolvedInvariant {
                t_grid,
                s_grid,
                contraction_offset: sec.opt_f64("contraction_offset")?.unwrap_or(1.0),
            });
        }
        Task::Check => {
            let sec = section("check");
            if sec.table.is_none() {
                return Err(cfg_err("missing required section `check`"));
            }
            sec.check_keys(&[
                "assumptions",
                "n_points",
                "radius_grid",
                "cloud_size",
                "components",
                "mean_range",
                "scale_range",
                "r",
                "times",
                "decay_k",
                "decay_delta",
            ])?;
            let assumptions = sec
                .opt_str_array("assumptions")?
                .ok_or_else(|| cfg_err("missing required key `check.assumptions`"))?;
            if assumptions.is_empty() {
                return Err(cfg_err("key `check.assumptions` must be nonempty"));
            }
            for a in &assumptions {
                a.parse::<mvsde::conditions::Assumption>()
                    .map_err(|_| cfg_err(format!("unknown assumption `{a}` in `check.assumptions`")))?;
            }
            cfg.check = Some(ResolvedCheck {
                assumptions,
                n_points: sec.opt_usize("n_points")?.unwrap_or(200),
                radius_grid: sec
                    .opt_f64_array("radius_grid")?
                    .unwrap_or_else(|| vec![1.0, 2.0, 4.0, 8.0]),
                cloud_size: sec.opt_usize("cloud_size")?.unwrap_or(32),
                components: sec.opt_usize("components")?.unwrap_or(3),
                mean_range: sec.opt_pair("mean_range")?.unwrap_or([-2.0, 2.0]),
                scale_range: sec.opt_pair("scale_range")?.unwrap_or([0.05, 1.5]),
                r: sec.opt_f64("r")?.unwrap_or(2.0),
                times: sec
                    .opt_f64_array("times")?
                    .unwrap_or_else(|| vec![0.0, 1.0, 10.0]),
                decay_k: sec.opt_f64("decay_k")?.unwrap_or(1.0),
                decay_delta: sec.opt_f64("decay_delta")?.unwrap_or(1.0),
            });
        }
    }

    Ok(cfg)
}

/// Claimed decay exponents for the canonical model/bundle pairings.
fn default_gamma_claimed(
    model: &ResolvedModel,
    bundle: &str,
    r: f64,
    alpha: Option<f64>,
    l: Option<f64>,
) -> Option<f64> {
    match (model.preset.as_str(), bundle) {
        ("landau_linear", "example2_V") => alpha.map(|a| -(2.0 - 4.0 * a)),
        ("cubic", "cubic_V4") => l.map(|l| -4.0 * (l - 3.0 / 8.0)),
        ("mean_field_ou", "abs_pow_r") => alpha.map(|a| -r * a),
        _ => None,
    }
}

fn default_sandwich(bundle: &str, bundle_alpha: f64) -> (f64, f64, f64) {
    match bundle {
        "example2_V" => (1.0, 2.0, 2.0 * bundle_alpha * bundle_alpha),
        _ => (1.0, 1.0, 0.0),
    }
}
