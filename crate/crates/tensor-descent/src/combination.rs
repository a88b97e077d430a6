//! Two-level framework separating the order-p oracle calls of `f` and `g`.
//!
//! The outer loop runs the envelope (restarted in the uniformly convex mode,
//! plain otherwise) on `f` with `g` as a composite term and coefficient
//! `H = 2 L_{p,f}`. Every tensor subproblem
//! `Omega_p(f, x~; y) + (H/p!)||y - x~||^{p+1} + g(y)` is itself a smooth
//! `(p+1)`-uniformly convex function whose only live oracle is `g`, and is
//! solved by an inner restarted run. The split `H = H_1 + H_2` with
//! `H_1 = H_2 = L_{p,f}` convexifies the model and supplies the inner
//! uniform convexity `sigma_{p+1} = H_2 (p+1) 2^{2-p} / p!`.
//!
//! As a result `f`'s order-p counter grows only with outer model
//! constructions, and `g`'s only inside inner solves.

use std::sync::Arc;

use crate::catd::{c_p, run_catd_opts, IterDebug, Reference, RunOpts};
use crate::composite::CompositePart;
use crate::config::{CatdConfig, InnerEngine, SolverConfig};
use crate::error::{Result, SolverError};
use crate::oracle::{factorial, CallSite, Oracle, SmoothOracle, Vector};
use crate::restarts::{run_catd_restarts_opts, RestartOpts, RestartSchedule};
use crate::trace::TraceRecord;

#[derive(Clone, Debug)]
pub enum CombinationMode {
    UniformlyConvex {
        r: u32,
        sigma_r: f64,
        r0: f64,
        restarts: usize,
    },
    Convex {
        eps: f64,
        r0: f64,
    },
}

#[derive(Clone, Debug)]
pub struct CombinationConfig {
    pub p: usize,
    pub l_pf: f64,
    pub l_pg: f64,
    /// Outer regularization coefficient, `2 L_{p,f}`.
    pub h_outer: f64,
    /// Convexifying share of the split.
    pub h1: f64,
    /// Uniform-convexity share of the split.
    pub h2: f64,
    pub mode: CombinationMode,
    pub solver: SolverConfig,
    pub max_outer_steps: u64,
}

impl CombinationConfig {
    pub fn new(p: usize, l_pf: f64, l_pg: f64, mode: CombinationMode) -> Result<Self> {
        if !(1..=3).contains(&p) {
            return Err(SolverError::InvalidArgument(format!(
                "combination supports orders 1..=3, got {p}"
            )));
        }
        if l_pf.is_nan() || l_pf <= 0.0 {
            return Err(SolverError::InvalidArgument(
                "L_{p,f} must be positive".into(),
            ));
        }
        if l_pg != 0.0 && l_pg <= l_pf {
            return Err(SolverError::InvalidArgument(format!(
                "the framework assumes L_{{p,f}} < L_{{p,g}}, got {l_pf} vs {l_pg}"
            )));
        }
        Ok(Self {
            p,
            l_pf,
            l_pg,
            h_outer: 2.0 * l_pf,
            h1: l_pf,
            h2: l_pf,
            mode,
            solver: SolverConfig::default(),
            max_outer_steps: 2_000,
        })
    }

    /// `sigma_{p+1} = H_2 (p+1) 2^{2-p} / p!` of the inner subproblems.
    pub fn sigma_inner(&self) -> f64 {
        self.h2 * (self.p as f64 + 1.0) * 2f64.powi(2 - self.p as i32) / factorial(self.p)
    }

    /// Smoothness constant assigned to the inner subproblems,
    /// `2 L_{p,f} + L_{p,g}`.
    pub fn l_inner(&self) -> f64 {
        2.0 * self.l_pf + self.l_pg
    }

    fn engine(&self) -> InnerEngine {
        InnerEngine::Tensor {
            l_inner: self.l_inner(),
            sigma_inner: self.sigma_inner(),
            h_inner: self.l_inner(),
        }
    }
}

pub struct CombinationOutcome {
    pub records: Vec<TraceRecord>,
    pub debug: Vec<IterDebug>,
    pub final_point: Vector,
    pub outer_iters: u64,
    pub probes_total: u64,
    pub inner_iters_total: u64,
    /// Order-p calls of f (all at outer model constructions).
    pub n_f: u64,
    /// Order-p calls of g (all inside inner solves).
    pub n_g: u64,
}

/// Runs the combination framework from `x0`.
///
/// Counters of both oracles are reset; on return `f`'s order-p count equals
/// the total number of lambda probes, and `g`'s order-p calls are all tagged
/// with the inner-solve site.
pub fn run_combination(
    f: &SmoothOracle,
    g: &Arc<SmoothOracle>,
    cfg: &CombinationConfig,
    x0: &Vector,
    reference: Option<&Reference>,
) -> Result<CombinationOutcome> {
    let p = cfg.p;
    if f.order() < p {
        return Err(SolverError::UnsupportedOrder {
            requested: p,
            max: f.order(),
        });
    }
    if !g.is_zero() && g.order() < p {
        return Err(SolverError::UnsupportedOrder {
            requested: p,
            max: g.order(),
        });
    }
    f.counters().reset();
    g.counters().reset();
    f.counters().set_site(CallSite::OuterModel);
    let composite = CompositePart::Smooth(g.clone());
    let catd_cfg = CatdConfig {
        p,
        h_coeff: cfg.h_outer,
        engine: cfg.engine(),
        solver: cfg.solver.clone(),
    };

    let (mut records, debug, final_point) = match &cfg.mode {
        CombinationMode::UniformlyConvex {
            r,
            sigma_r,
            r0,
            restarts,
        } => {
            let sched = RestartSchedule {
                r0: *r0,
                r: *r,
                sigma_r: *sigma_r,
                l_const: cfg.h_outer,
                p,
            };
            let out = run_catd_restarts_opts(
                f,
                &composite,
                x0,
                &sched,
                *restarts,
                &catd_cfg,
                reference,
                RestartOpts {
                    max_total_steps: cfg.max_outer_steps,
                    ..RestartOpts::default()
                },
            )?;
            (out.records, out.debug, out.final_point)
        }
        CombinationMode::Convex { eps, r0 } => {
            // Iteration count from inverting the envelope rate bound at eps.
            let need = (c_p(p) * cfg.h_outer * r0.powi(p as i32 + 1) / eps)
                .powf(2.0 / (3.0 * p as f64 + 1.0));
            let iters = (need.ceil() as u64).clamp(1, cfg.max_outer_steps);
            let out = run_catd_opts(
                f,
                &composite,
                x0,
                iters,
                &catd_cfg,
                &RunOpts {
                    reference,
                    ..RunOpts::default()
                },
            )?;
            (out.records, out.debug, out.state.y)
        }
    };
    f.counters().set_site(CallSite::Main);

    for rec in &mut records {
        rec.outer_iter = Some(rec.iter);
    }
    let outer_iters = debug.len() as u64;
    let probes_total = debug.iter().map(|d| d.probes).sum();
    let inner_iters_total = debug.iter().map(|d| d.inner_iters).sum();
    Ok(CombinationOutcome {
        records,
        debug,
        final_point,
        outer_iters,
        probes_total,
        inner_iters_total,
        n_f: f.counters().count(p),
        n_g: g.counters().count(p),
    })
}

#[derive(Clone, Copy, Debug)]
pub struct PredictedCounts {
    pub n_f: f64,
    pub n_g: f64,
    pub n_inner: f64,
}

/// Evaluates the predicted call counts without logarithmic factors:
/// `N_f = (L_{p,f} R^{p+1-r} / sigma_r)^{2/(3p+1)}` (uniformly convex mode;
/// the convex mode replaces `R^{p+1-r}/sigma_r` with `R^{p+1}/eps`),
/// `N_g` likewise with `L_{p,g}`, and
/// `N_inner = ((2 L_{p,f} + L_{p,g}) p! / ((p+1) L_{p,f} 2^{2-p}))^{2/(3p+1)}`.
pub fn predicted_counts(cfg: &CombinationConfig) -> PredictedCounts {
    let p = cfg.p as f64;
    let e = 2.0 / (3.0 * p + 1.0);
    let (n_f, n_g) = match &cfg.mode {
        CombinationMode::UniformlyConvex { r, sigma_r, r0, .. } => {
            let geom = r0.powi(cfg.p as i32 + 1 - *r as i32) / sigma_r;
            ((cfg.l_pf * geom).powf(e), (cfg.l_pg * geom).powf(e))
        }
        CombinationMode::Convex { eps, r0 } => {
            let geom = r0.powi(cfg.p as i32 + 1) / eps;
            ((cfg.l_pf * geom).powf(e), (cfg.l_pg * geom).powf(e))
        }
    };
    let n_inner = (cfg.l_inner() / cfg.sigma_inner()).powf(e);
    PredictedCounts { n_f, n_g, n_inner }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{instance_by_key, make_zero};
    use approx::assert_relative_eq;

    fn uc_mode_from(inst: &crate::problems::ProblemInstance, restarts: usize) -> CombinationMode {
        let (r, sigma) = inst.uniform_convexity.unwrap();
        CombinationMode::UniformlyConvex {
            r,
            sigma_r: sigma,
            r0: 1.0,
            restarts,
        }
    }

    #[test]
    fn predicted_counts_worked_examples() {
        // p = 2, L_f = 1, L_g = 100, r = 3, sigma = 1, R = 1
        let cfg = CombinationConfig::new(
            2,
            1.0,
            100.0,
            CombinationMode::UniformlyConvex {
                r: 3,
                sigma_r: 1.0,
                r0: 1.0,
                restarts: 1,
            },
        )
        .unwrap();
        let pred = predicted_counts(&cfg);
        assert_relative_eq!(pred.n_f, 1.0);
        assert_relative_eq!(pred.n_g, 100f64.powf(2.0 / 7.0), max_relative = 1e-12);
        assert!((pred.n_g - 3.72).abs() < 0.01);
    }

    #[test]
    fn predicted_inner_floor_at_equal_constants() {
        // L_f = L_g degenerates N_inner to (3 p! / ((p+1) 2^{2-p}))^{2/(3p+1)}.
        for p in [1usize, 2, 3] {
            let mut cfg =
                CombinationConfig::new(p, 1.0, 2.0, CombinationMode::Convex { eps: 1e-3, r0: 1.0 })
                    .unwrap();
            cfg.l_pg = 1.0; // equal constants, bypassing the constructor guard
            let pred = predicted_counts(&cfg);
            let pf = factorial(p);
            let expected = (3.0 * pf / ((p as f64 + 1.0) * 2f64.powi(2 - p as i32)))
                .powf(2.0 / (3.0 * p as f64 + 1.0));
            assert_relative_eq!(pred.n_inner, expected, max_relative = 1e-12);
        }
    }

    #[test]
    fn predicted_product_identity() {
        // N_f * N_inner tracks N_g up to the bounded factor
        // ((2 + Lf/Lg) / (sigma-normalization))^{2/(3p+1)}.
        let cfg = CombinationConfig::new(
            2,
            1.0,
            1000.0,
            CombinationMode::UniformlyConvex {
                r: 3,
                sigma_r: 1.0,
                r0: 1.0,
                restarts: 1,
            },
        )
        .unwrap();
        let pred = predicted_counts(&cfg);
        let ratio = pred.n_f * pred.n_inner / pred.n_g;
        assert!(ratio > 0.5 && ratio < 5.0, "ratio {ratio}");
    }

    #[test]
    fn constructor_guards() {
        assert!(CombinationConfig::new(
            2,
            1.0,
            0.5,
            CombinationMode::Convex { eps: 1e-3, r0: 1.0 }
        )
        .is_err());
        assert!(CombinationConfig::new(
            4,
            1.0,
            2.0,
            CombinationMode::Convex { eps: 1e-3, r0: 1.0 }
        )
        .is_err());
    }

    #[test]
    fn zero_g_degenerates_cleanly() {
        let inst = instance_by_key("split-p2-k10-n5", 0).unwrap();
        let g_zero = Arc::new(make_zero(5));
        let mut cfg = CombinationConfig::new(2, 1.0, 0.0, uc_mode_from(&inst, 1)).unwrap();
        cfg.max_outer_steps = 6;
        let out = run_combination(&inst.f, &g_zero, &cfg, &inst.start, None).unwrap();
        assert_eq!(out.n_g, 0);
        assert!(out.n_f > 0);
    }

    #[test]
    fn counter_sites_separate_f_and_g() {
        let inst = instance_by_key("split-p2-k10-n5", 0).unwrap();
        let g = inst.smooth_g().unwrap().clone();
        let mut cfg = CombinationConfig::new(2, 1.0, 10.0, uc_mode_from(&inst, 1)).unwrap();
        cfg.max_outer_steps = 5;
        let out = run_combination(&inst.f, &g, &cfg, &inst.start, None).unwrap();
        // f's order-p calls all come from outer model constructions,
        // one per probe; g's order-p calls all carry the inner-solve site.
        assert_eq!(out.n_f, out.probes_total);
        assert_eq!(inst.f.counters().count_at(2, CallSite::OuterModel), out.n_f);
        assert_eq!(g.counters().count_at(2, CallSite::InnerSolve), out.n_g);
        assert!(out.n_g > 0);
    }
}
