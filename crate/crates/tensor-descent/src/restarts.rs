//! Restarted envelope runs for r-uniformly convex objectives.
//!
//! Epoch k runs the envelope for
//! `N_k = max(ceil((r c_p L 2^r / sigma_r * R_k^{p+1-r})^{2/(3p+1)}), 1)`
//! steps with `R_k = R_0 2^{-k}`, which halves the distance to the
//! minimizer per epoch.

use crate::catd::{c_p, run_catd_opts, IterDebug, Reference, RunOpts};
use crate::composite::CompositePart;
use crate::config::CatdConfig;
use crate::error::{Result, SolverError};
use crate::oracle::{Oracle, Vector};
use crate::trace::TraceRecord;

#[derive(Clone, Debug)]
pub struct RestartSchedule {
    /// Upper bound on the initial distance to the minimizer.
    pub r0: f64,
    /// Uniform-convexity degree of the objective.
    pub r: u32,
    pub sigma_r: f64,
    /// Constant entering the rate bound; the operative regularization
    /// coefficient when it exceeds the Lipschitz constant.
    pub l_const: f64,
    pub p: usize,
}

impl RestartSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.p + 1 < self.r as usize {
            return Err(SolverError::InvalidArgument(format!(
                "restart schedule needs p + 1 >= r, got p = {}, r = {}",
                self.p, self.r
            )));
        }
        for v in [self.r0, self.sigma_r, self.l_const] {
            if v.is_nan() || v <= 0.0 {
                return Err(SolverError::InvalidArgument(
                    "restart schedule constants must be positive".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn radius_at(&self, k: u32) -> f64 {
        self.r0 * 2f64.powi(-(k as i32))
    }
}

/// Envelope steps budgeted for restart epoch k.
pub fn restart_count(k: u32, sched: &RestartSchedule) -> Result<u64> {
    sched.validate()?;
    let p = sched.p;
    let exponent = (p + 1) as i32 - sched.r as i32;
    let r_k = sched.radius_at(k);
    let radius_pow = r_k.powi(exponent);
    let base = sched.r as f64 * c_p(p) * sched.l_const * 2f64.powi(sched.r as i32) / sched.sigma_r;
    let arg = base * radius_pow;
    if !arg.is_finite() {
        return Err(SolverError::Range(format!(
            "restart budget overflowed for R_k = {r_k}"
        )));
    }
    let n = arg.powf(2.0 / (3.0 * p as f64 + 1.0));
    if !n.is_finite() || n > 1e15 {
        return Err(SolverError::Range(format!(
            "restart budget {n} is not representable"
        )));
    }
    Ok(n.ceil().max(1.0) as u64)
}

#[derive(Clone, Debug)]
pub struct RestartBoundary {
    pub index: u32,
    /// Budgeted step count N_k.
    pub planned: u64,
    /// Steps actually taken (can be lower on an early stop or a cap).
    pub taken: u64,
    /// Iterate at the epoch boundary.
    pub z: Vector,
}

pub struct RestartOutcome {
    pub records: Vec<TraceRecord>,
    pub debug: Vec<IterDebug>,
    pub boundaries: Vec<RestartBoundary>,
    pub total_steps: u64,
    pub final_point: Vector,
    pub stopped_early: bool,
}

pub(crate) struct RestartOpts<'a> {
    pub eps_target: Option<f64>,
    /// Checked at epoch boundaries; a budgeted epoch always runs in full.
    pub epoch_stop: Option<&'a dyn Fn(&Vector) -> bool>,
    pub collect: bool,
    pub max_total_steps: u64,
    /// Step-size warm start for the first epoch.
    pub initial_lambda: Option<f64>,
}

impl Default for RestartOpts<'_> {
    fn default() -> Self {
        Self {
            eps_target: None,
            epoch_stop: None,
            collect: true,
            max_total_steps: u64::MAX,
            initial_lambda: None,
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn run_catd_restarts_opts(
    f: &dyn Oracle,
    g: &CompositePart,
    x0: &Vector,
    sched: &RestartSchedule,
    max_restarts: usize,
    cfg: &CatdConfig,
    reference: Option<&Reference>,
    opts: RestartOpts,
) -> Result<RestartOutcome> {
    sched.validate()?;
    let mut z = x0.clone();
    let mut records = Vec::new();
    let mut debug = Vec::new();
    let mut boundaries = Vec::new();
    let mut total_steps = 0u64;
    let mut stopped_early = false;
    let mut lambda_carry = opts.initial_lambda;

    for k in 0..max_restarts as u32 {
        if let Some(eps) = opts.eps_target {
            // Definition of r-uniform convexity turns a radius bound into a
            // gap bound: stop once R_k guarantees the target accuracy.
            let target = (eps * sched.r as f64 / sched.sigma_r).powf(1.0 / sched.r as f64);
            if sched.radius_at(k) <= target {
                break;
            }
        }
        let planned = restart_count(k, sched)?;
        if total_steps >= opts.max_total_steps {
            break;
        }
        let budget = planned.min(opts.max_total_steps - total_steps);
        let out = run_catd_opts(
            f,
            g,
            &z,
            budget,
            cfg,
            &RunOpts {
                reference,
                early_stop: None,
                collect: opts.collect,
                iter_offset: total_steps,
                restart_index: Some(k as u64),
                initial_lambda: lambda_carry,
            },
        )?;
        let taken = out.debug.len() as u64;
        total_steps += taken;
        z = out.state.y.clone();
        lambda_carry = Some(out.state.last_lambda);
        records.extend(out.records);
        debug.extend(out.debug);
        boundaries.push(RestartBoundary {
            index: k,
            planned,
            taken,
            z: z.clone(),
        });
        if let Some(stop) = opts.epoch_stop {
            if stop(&z) {
                stopped_early = true;
                break;
            }
        }
    }
    Ok(RestartOutcome {
        records,
        debug,
        boundaries,
        total_steps,
        final_point: z,
        stopped_early,
    })
}

/// Restarted envelope run with the halving-radius schedule.
#[allow(clippy::too_many_arguments)]
pub fn run_catd_restarts(
    f: &dyn Oracle,
    g: &CompositePart,
    x0: &Vector,
    sched: &RestartSchedule,
    max_restarts: usize,
    cfg: &CatdConfig,
    reference: Option<&Reference>,
    eps_target: Option<f64>,
) -> Result<RestartOutcome> {
    run_catd_restarts_opts(
        f,
        g,
        x0,
        sched,
        max_restarts,
        cfg,
        reference,
        RestartOpts {
            eps_target,
            ..RestartOpts::default()
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catd::Reference;
    use crate::config::CatdConfig;
    use crate::problems::instance_by_key;

    #[test]
    fn budget_formula_worked_example() {
        // r = 2, p = 2, L = 1, sigma = 1, R_0 = 1:
        // (2 * c_2 * 4)^{2/7} = 748.2^{2/7} ~ 6.63 -> 7
        let sched = RestartSchedule {
            r0: 1.0,
            r: 2,
            sigma_r: 1.0,
            l_const: 1.0,
            p: 2,
        };
        assert_eq!(restart_count(0, &sched).unwrap(), 7);
        // independent re-evaluation
        let arg = 2.0 * c_p(2) * 1.0 * 4.0;
        let n = arg.powf(2.0 / 7.0).ceil() as u64;
        assert_eq!(restart_count(0, &sched).unwrap(), n);
    }

    #[test]
    fn budget_is_constant_when_exponent_vanishes() {
        let sched = RestartSchedule {
            r0: 8.0,
            r: 3,
            sigma_r: 0.5,
            l_const: 2.0,
            p: 2,
        };
        let n0 = restart_count(0, &sched).unwrap();
        for k in 1..6 {
            assert_eq!(restart_count(k, &sched).unwrap(), n0);
        }
    }

    #[test]
    fn budget_clamps_to_one() {
        let sched = RestartSchedule {
            r0: 1e-6,
            r: 2,
            sigma_r: 1e9,
            l_const: 1e-9,
            p: 2,
        };
        assert_eq!(restart_count(0, &sched).unwrap(), 1);
    }

    #[test]
    fn budget_overflows_to_range_error() {
        let sched = RestartSchedule {
            r0: 1e300,
            r: 2,
            sigma_r: 1e-12,
            l_const: 1e12,
            p: 3,
        };
        assert!(matches!(
            restart_count(0, &sched),
            Err(SolverError::Range(_))
        ));
    }

    #[test]
    fn schedule_rejects_r_above_p_plus_one() {
        let sched = RestartSchedule {
            r0: 1.0,
            r: 4,
            sigma_r: 1.0,
            l_const: 1.0,
            p: 2,
        };
        assert!(restart_count(0, &sched).is_err());
    }

    #[test]
    fn start_at_minimizer_stays_there() {
        let inst = instance_by_key("power3-n4", 0).unwrap();
        let g = inst.composite_for_solver();
        let cfg = CatdConfig::new(2, inst.f.lipschitz(2).unwrap());
        let sched = RestartSchedule {
            r0: 1.0,
            r: 3,
            sigma_r: 0.5,
            l_const: 2.0,
            p: 2,
        };
        let x_star = inst.known_minimizer.clone().unwrap();
        let out = run_catd_restarts(&*inst.f, &g, &x_star, &sched, 3, &cfg, None, None).unwrap();
        for b in &out.boundaries {
            assert!((&b.z - &x_star).norm() <= 1e-10);
        }
    }

    #[test]
    fn radius_halves_at_every_restart() {
        let inst = instance_by_key("power3-n5", 0).unwrap();
        let g = inst.composite_for_solver();
        let l2 = inst.f.lipschitz(2).unwrap();
        let cfg = CatdConfig::new(2, l2);
        let (r, sigma) = inst.uniform_convexity.unwrap();
        let sched = RestartSchedule {
            r0: 1.0,
            r,
            sigma_r: sigma,
            l_const: l2,
            p: 2,
        };
        let reference = Reference {
            x_star: inst.known_minimizer.clone(),
            f_star: inst.known_min_value,
        };
        let out = run_catd_restarts(
            &*inst.f,
            &g,
            &inst.start,
            &sched,
            6,
            &cfg,
            Some(&reference),
            None,
        )
        .unwrap();
        let x_star = inst.known_minimizer.as_ref().unwrap();
        for b in &out.boundaries {
            let dist = (&b.z - x_star).norm();
            let allowed = sched.radius_at(b.index) / 2.0;
            assert!(
                dist <= allowed + 1e-9,
                "restart {} distance {dist} > {allowed}",
                b.index
            );
        }
        // cumulative steps stay within the schedule sum plus one per epoch
        let planned: u64 = out.boundaries.iter().map(|b| b.planned).sum();
        assert!(out.total_steps <= planned + out.boundaries.len() as u64);
    }
}
