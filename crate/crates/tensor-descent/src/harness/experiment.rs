//! Experiment configuration, dispatch, and trace persistence.
//!
//! A config names a problem instance, an algorithm, and its parameters.
//! The seed fully determines the run: identical configs produce
//! byte-identical trace CSV output.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{HResult, HarnessError};
use crate::catd::{run_catd, Reference};
use crate::combination::{run_combination, CombinationConfig, CombinationMode};
use crate::config::CatdConfig;
use crate::multicomposite::{run_multicomposite, MultiCompositeSpec};
use crate::oracle::Oracle;
use crate::problems::{instance_by_key, ProblemInstance};
use crate::restarts::{run_catd_restarts, RestartSchedule};
use crate::trace::{RunSummary, RunTrace};

/// Environment variable overriding the output directory.
pub const OUT_DIR_ENV: &str = "TENSOR_DESCENT_OUT";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Catd,
    CatdRestarts,
    Combination,
    Multicomposite,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Catd => "catd",
            Algorithm::CatdRestarts => "catd-restarts",
            Algorithm::Combination => "combination",
            Algorithm::Multicomposite => "multicomposite",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "catd" => Ok(Algorithm::Catd),
            "catd-restarts" => Ok(Algorithm::CatdRestarts),
            "combination" => Ok(Algorithm::Combination),
            "multicomposite" => Ok(Algorithm::Multicomposite),
            other => Err(format!("unknown algorithm `{other}`")),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub problem: String,
    pub algo: Algorithm,
    pub p: usize,
    pub q: usize,
    pub iters: u64,
    pub restarts: usize,
    /// Regularization coefficient override; defaults to the declared L_p.
    pub h: Option<f64>,
    pub h_qf: Option<f64>,
    pub h_pg: Option<f64>,
    pub eps: f64,
    /// Initial distance bound override; defaults to the distance from the
    /// instance start to its known minimizer.
    pub r0: Option<f64>,
    /// Forces the plain envelope outer loop in combination runs.
    pub convex_mode: bool,
    pub seed: u64,
    pub name: Option<String>,
    pub out_dir: Option<PathBuf>,
    /// Sweep values substituted for `{kappa}` in the problem key.
    pub kappa_list: Vec<u64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            problem: "quad-n10".into(),
            algo: Algorithm::Catd,
            p: 2,
            q: 1,
            iters: 50,
            restarts: 4,
            h: None,
            h_qf: None,
            h_pg: None,
            eps: 1e-6,
            r0: None,
            convex_mode: false,
            seed: 0,
            name: None,
            out_dir: None,
            kappa_list: Vec::new(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> HResult<Self> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn from_toml_file(path: &Path) -> HResult<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn run_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| {
            format!(
                "{}-{}-p{}-s{}",
                self.problem,
                self.algo.name(),
                self.p,
                self.seed
            )
        })
    }

    pub fn output_dir(&self) -> PathBuf {
        if let Some(dir) = &self.out_dir {
            return dir.clone();
        }
        if let Ok(dir) = std::env::var(OUT_DIR_ENV) {
            return PathBuf::from(dir);
        }
        PathBuf::from("runs")
    }
}

fn reference_of(inst: &ProblemInstance) -> Reference {
    Reference {
        x_star: inst.known_minimizer.clone(),
        f_star: inst.known_min_value,
    }
}

fn h_for(cfg: &ExperimentConfig, inst: &ProblemInstance, p: usize) -> HResult<f64> {
    if let Some(h) = cfg.h {
        return Ok(h);
    }
    match inst.f.lipschitz(p) {
        Some(l) if l > 0.0 => Ok(l),
        _ => Err(HarnessError::Config(format!(
            "problem `{}` declares no positive order-{p} constant; pass an explicit H",
            inst.key
        ))),
    }
}

fn r0_for(cfg: &ExperimentConfig, inst: &ProblemInstance) -> HResult<f64> {
    if let Some(r0) = cfg.r0 {
        return Ok(r0);
    }
    inst.known_minimizer
        .as_ref()
        .map(|xs| (xs - &inst.start).norm())
        .ok_or_else(|| {
            HarnessError::Config(format!(
                "problem `{}` has no known minimizer; pass an explicit R0",
                inst.key
            ))
        })
}

fn base_summary(cfg: &ExperimentConfig, inst: &ProblemInstance) -> RunSummary {
    RunSummary {
        name: cfg.run_name(),
        problem: inst.key.clone(),
        algorithm: cfg.algo.name().into(),
        p: cfg.p,
        q: (cfg.algo == Algorithm::Multicomposite).then_some(cfg.q),
        iterations: 0,
        final_value: f64::NAN,
        final_gap: None,
        final_grad_norm: f64::NAN,
        n_f: 0,
        n_g: 0,
        outer_iters: None,
        total_inner_iters: None,
        wall_time_s: 0.0,
        seed: cfg.seed,
    }
}

/// Runs one experiment and returns its trace.
pub fn run_experiment(cfg: &ExperimentConfig) -> HResult<RunTrace> {
    let inst = instance_by_key(&cfg.problem, cfg.seed)?;
    inst.reset_counters();
    let reference = reference_of(&inst);
    let start = Instant::now();
    let mut summary = base_summary(cfg, &inst);

    let records = match cfg.algo {
        Algorithm::Catd => {
            let h = h_for(cfg, &inst, cfg.p)?;
            let composite = inst.composite_for_solver();
            let catd_cfg = CatdConfig::new(cfg.p, h);
            let out = run_catd(
                &*inst.f,
                &composite,
                &inst.start,
                cfg.iters,
                &catd_cfg,
                Some(&reference),
            )?;
            out.records
        }
        Algorithm::CatdRestarts => {
            let h = h_for(cfg, &inst, cfg.p)?;
            let (r, sigma_r) = inst.uniform_convexity.ok_or_else(|| {
                HarnessError::Config(format!(
                    "problem `{}` declares no uniform convexity",
                    inst.key
                ))
            })?;
            let sched = RestartSchedule {
                r0: r0_for(cfg, &inst)?,
                r,
                sigma_r,
                l_const: h,
                p: cfg.p,
            };
            let composite = inst.composite_for_solver();
            let catd_cfg = CatdConfig::new(cfg.p, h);
            let out = run_catd_restarts(
                &*inst.f,
                &composite,
                &inst.start,
                &sched,
                cfg.restarts,
                &catd_cfg,
                Some(&reference),
                (cfg.eps > 0.0).then_some(cfg.eps),
            )?;
            summary.outer_iters = Some(out.total_steps);
            out.records
        }
        Algorithm::Combination => {
            let g = inst
                .smooth_g()
                .ok_or_else(|| {
                    HarnessError::Config(format!(
                        "problem `{}` has no smooth g term for the combination framework",
                        inst.key
                    ))
                })?
                .clone();
            let l_pf = inst.f.lipschitz(cfg.p).unwrap_or(0.0);
            let l_pg = g.lipschitz(cfg.p).unwrap_or(0.0);
            let r0 = r0_for(cfg, &inst)?;
            let mode = match inst.uniform_convexity {
                Some((r, sigma_r)) if !cfg.convex_mode => CombinationMode::UniformlyConvex {
                    r,
                    sigma_r,
                    r0,
                    restarts: cfg.restarts,
                },
                _ => CombinationMode::Convex { eps: cfg.eps, r0 },
            };
            let comb_cfg = CombinationConfig::new(cfg.p, l_pf, l_pg, mode)?;
            let out = run_combination(&inst.f, &g, &comb_cfg, &inst.start, Some(&reference))?;
            summary.outer_iters = Some(out.outer_iters);
            summary.total_inner_iters = Some(out.inner_iters_total);
            out.records
        }
        Algorithm::Multicomposite => {
            let g = inst.smooth_g().ok_or_else(|| {
                HarnessError::Config(format!(
                    "problem `{}` has no smooth g term for the mixed-order method",
                    inst.key
                ))
            })?;
            let h_qf = cfg
                .h_qf
                .or_else(|| inst.f.lipschitz(cfg.q).map(|l| cfg.q as f64 * l))
                .ok_or_else(|| HarnessError::Config("pass an explicit H_qf".into()))?;
            let h_pg = cfg
                .h_pg
                .or_else(|| g.lipschitz(cfg.p).map(|l| cfg.p as f64 * l))
                .ok_or_else(|| HarnessError::Config("pass an explicit H_pg".into()))?;
            let spec = MultiCompositeSpec::new(&*inst.f, &**g, cfg.q, cfg.p, h_qf, h_pg)?;
            let h_part = inst
                .h
                .clone()
                .unwrap_or(crate::composite::CompositePart::Zero);
            let out = run_multicomposite(
                &*inst.f,
                &**g,
                &spec,
                &h_part,
                &inst.start,
                cfg.iters,
                &crate::config::SolverConfig::default(),
                inst.known_min_value,
            )?;
            out.records
        }
    };

    summary.wall_time_s = start.elapsed().as_secs_f64();
    summary.iterations = records.len() as u64;
    if let Some(last) = records.last() {
        summary.final_value = last.value;
        summary.final_gap = last.gap;
        summary.final_grad_norm = last.grad_norm;
        summary.n_f = last.n_f;
        summary.n_g = last.n_g;
    }
    let trace = RunTrace { records, summary };
    trace.check_consistency()?;
    Ok(trace)
}

/// Runs an experiment and persists `<name>.trace.csv` and
/// `<name>.summary.json` under the configured output directory.
pub fn run_and_persist(cfg: &ExperimentConfig) -> HResult<(RunTrace, PathBuf, PathBuf)> {
    let trace = run_experiment(cfg)?;
    let dir = cfg.output_dir();
    std::fs::create_dir_all(&dir)?;
    let csv_path = dir.join(format!("{}.trace.csv", cfg.run_name()));
    let json_path = dir.join(format!("{}.summary.json", cfg.run_name()));
    trace.write_csv(&csv_path)?;
    trace.write_summary(&json_path)?;
    Ok((trace, csv_path, json_path))
}

/// Expands `{kappa}` in the problem key over `kappa_list` and runs each.
pub fn run_sweep(cfg: &ExperimentConfig) -> HResult<Vec<(RunTrace, PathBuf, PathBuf)>> {
    if cfg.kappa_list.is_empty() {
        return Err(HarnessError::Config(
            "sweep requires a non-empty kappa_list".into(),
        ));
    }
    if !cfg.problem.contains("{kappa}") {
        return Err(HarnessError::Config(
            "sweep problems must contain a `{kappa}` placeholder".into(),
        ));
    }
    let mut out = Vec::new();
    for kappa in &cfg.kappa_list {
        let mut one = cfg.clone();
        one.problem = cfg.problem.replace("{kappa}", &kappa.to_string());
        one.name = Some(format!("{}-k{kappa}", cfg.run_name()));
        one.kappa_list = Vec::new();
        out.push(run_and_persist(&one)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip_and_defaults() {
        let cfg = ExperimentConfig::from_toml_str(
            r#"
problem = "power4-n10"
algo = "catd"
p = 3
iters = 12
"#,
        )
        .unwrap();
        assert_eq!(cfg.problem, "power4-n10");
        assert_eq!(cfg.p, 3);
        assert_eq!(cfg.iters, 12);
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.algo, Algorithm::Catd);
    }

    #[test]
    fn catd_run_produces_expected_record_count() {
        let cfg = ExperimentConfig {
            problem: "power4-n10".into(),
            algo: Algorithm::Catd,
            p: 3,
            iters: 10,
            ..ExperimentConfig::default()
        };
        let trace = run_experiment(&cfg).unwrap();
        assert_eq!(trace.records.len(), 10);
        assert_eq!(trace.summary.iterations, 10);
    }

    #[test]
    fn determinism_byte_identical_csv() {
        let cfg = ExperimentConfig {
            problem: "quad-n6".into(),
            algo: Algorithm::Catd,
            p: 2,
            h: Some(1.0),
            iters: 15,
            seed: 42,
            ..ExperimentConfig::default()
        };
        let t1 = run_experiment(&cfg).unwrap();
        let t2 = run_experiment(&cfg).unwrap();
        assert_eq!(t1.csv_string(), t2.csv_string());
    }

    #[test]
    fn persisted_outputs_exist_and_parse() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig {
            problem: "quad-n6".into(),
            algo: Algorithm::Catd,
            p: 1,
            iters: 5,
            out_dir: Some(dir.path().to_path_buf()),
            ..ExperimentConfig::default()
        };
        let (_, csv_path, json_path) = run_and_persist(&cfg).unwrap();
        let csv = std::fs::read_to_string(csv_path).unwrap();
        assert!(csv.starts_with(crate::trace::CSV_HEADER));
        let json = std::fs::read_to_string(json_path).unwrap();
        let summary: crate::trace::RunSummary = serde_json::from_str(&json).unwrap();
        assert_eq!(summary.problem, "quad-n6");
        assert!(json.contains("\"n_f\""));
        assert!(json.contains("\"n_g\""));
    }
}
