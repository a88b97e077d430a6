//! Composite accelerated Taylor descent.
//!
//! The proximal-point envelope: each iteration searches for a step-size
//! multiplier `lambda` whose regularized Taylor step lands the quantity
//! `eta = lambda * H * ||y - x~||^{p-1} / (p-1)!` inside `[1/2, p/(p+1)]`,
//! then advances the averaging state
//! `x_{k+1} = x_k - a_{k+1} (grad f(y_{k+1}) + g'(y_{k+1}))` with
//! `a_{k+1} = (lambda + sqrt(lambda^2 + 4 lambda A_k)) / 2`.
//!
//! [`potential_audit`] re-derives the estimating-sequence potential from a
//! stored run and asserts the envelope guarantees; it is the debugging
//! instrument behind the rate checks.

use crate::composite::CompositePart;
use crate::config::CatdConfig;
use crate::error::{Result, SolverError};
use crate::oracle::{factorial, Oracle, Vector};
use crate::tensor_step::{solve_model, InexactnessRule, RuleKind, StepResult, TaylorModel};
use crate::trace::TraceRecord;

/// Envelope rate constant `2^{p-1} (p+1)^{(3p+1)/2} / (p-1)!`.
pub fn c_p(p: usize) -> f64 {
    2f64.powi(p as i32 - 1) * (p as f64 + 1.0).powf((3.0 * p as f64 + 1.0) / 2.0) / factorial(p - 1)
}

/// `c_p * H * R^{p+1} / k^{(3p+1)/2}`, the envelope bound on the gap at
/// iteration k for a run with coefficient H started distance R from a
/// minimizer.
pub fn envelope_bound(p: usize, h_coeff: f64, radius: f64, k: u64) -> f64 {
    c_p(p) * h_coeff * radius.powi(p as i32 + 1) / (k as f64).powf((3.0 * p as f64 + 1.0) / 2.0)
}

/// Accumulator state of the envelope.
#[derive(Clone, Debug)]
pub struct CatdState {
    pub k: u64,
    /// `A_k`, strictly increasing.
    pub a_big: f64,
    /// Dual averaging point `x_k`.
    pub x: Vector,
    /// Primal point `y_k`.
    pub y: Vector,
    pub last_lambda: f64,
}

impl CatdState {
    /// `A_0 = 0`, `x_0 = y_0`.
    pub fn new(x0: Vector) -> Self {
        Self {
            k: 0,
            a_big: 0.0,
            x: x0.clone(),
            y: x0,
            last_lambda: 1.0,
        }
    }
}

/// Known optimum data used to enrich traces and audits.
#[derive(Clone, Debug, Default)]
pub struct Reference {
    pub x_star: Option<Vector>,
    pub f_star: Option<f64>,
}

/// Everything the audit needs about one accepted iteration.
#[derive(Clone, Debug)]
pub struct IterDebug {
    pub a: f64,
    /// `A_{k+1}` after this step.
    pub a_big: f64,
    pub lambda: f64,
    /// `None` on fixed-point acceptances, where the bracket is vacuous.
    pub eta: Option<f64>,
    pub x_tilde: Vector,
    pub y: Vector,
    pub x_after: Vector,
    /// `grad f(y) + g'(y)` used in the dual update.
    pub grad_total: Vector,
    /// `F(y)`, uncounted.
    pub f_value: f64,
    pub step_norm: f64,
    pub probes: u64,
    pub fixed_point: bool,
    pub model_grad_norm: f64,
    pub threshold: f64,
    pub rule: RuleKind,
    pub inner_iters: u64,
}

pub struct CatdOutcome {
    pub records: Vec<TraceRecord>,
    pub debug: Vec<IterDebug>,
    pub state: CatdState,
    pub x0: Vector,
    pub stopped_early: bool,
}

struct Probe {
    lambda: f64,
    a: f64,
    a_big_next: f64,
    x_tilde: Vector,
    eta: f64,
    step: StepResult,
}

struct Scratch {
    warm: Option<Vector>,
    grad_scale: f64,
}

fn probe(
    f: &dyn Oracle,
    g: &CompositePart,
    cfg: &CatdConfig,
    state: &CatdState,
    lambda: f64,
    scratch: &Scratch,
) -> Result<Probe> {
    let a = 0.5 * (lambda + (lambda * lambda + 4.0 * lambda * state.a_big).sqrt());
    let a_big_next = state.a_big + a;
    let x_tilde = if state.a_big == 0.0 {
        state.x.clone()
    } else {
        &state.y * (state.a_big / a_big_next) + &state.x * (a / a_big_next)
    };
    let model = TaylorModel::new(f, x_tilde.clone(), cfg.p, cfg.h_coeff, g)?;
    let rule = InexactnessRule::from_config(&cfg.solver);
    let step = solve_model(
        &model,
        &rule,
        cfg.engine,
        &cfg.solver,
        scratch.warm.as_ref(),
    )?;
    let eta = lambda * cfg.h_coeff * step.step_norm.powi(cfg.p as i32 - 1) / factorial(cfg.p - 1);
    Ok(Probe {
        lambda,
        a,
        a_big_next,
        x_tilde,
        eta,
        step,
    })
}

/// Searches for a lambda whose step lands eta in `[1/2, p/(p+1)]`.
///
/// Warm-starts from the previous lambda, expands geometrically until the
/// target interval is bracketed, then bisects in log space. Returns the
/// accepted probe, the probe count, and whether the iterate was accepted as
/// a fixed point of the envelope (step and full gradient both negligible).
fn search(
    f: &dyn Oracle,
    g: &CompositePart,
    cfg: &CatdConfig,
    state: &CatdState,
    scratch: &mut Scratch,
) -> Result<(Probe, u64, bool)> {
    let p = cfg.p;
    // p = 1 pins eta = lambda H exactly; no search needed.
    if p == 1 {
        let lambda = 0.5 / cfg.h_coeff;
        let pr = probe(f, g, cfg, state, lambda, scratch)?;
        scratch.warm = Some(pr.step.y_plus.clone());
        return Ok((pr, 1, false));
    }
    let up = p as f64 / (p as f64 + 1.0);
    let mut lam = state.last_lambda.clamp(1e-150, 1e150);
    let mut lo: Option<f64> = None;
    let mut hi: Option<f64> = None;
    let mut probes = 0u64;
    let mut last_eta = f64::NAN;
    loop {
        if probes >= cfg.solver.max_probes {
            return Err(SolverError::LambdaSearchFailure { probes, last_eta });
        }
        let pr = probe(f, g, cfg, state, lam, scratch)?;
        probes += 1;
        last_eta = pr.eta;
        scratch.warm = Some(pr.step.y_plus.clone());

        let tiny = cfg.solver.step_floor_rel * pr.x_tilde.norm().max(1.0);
        if pr.step.step_norm <= tiny {
            let total = f.grad_raw(&pr.step.y_plus) + &pr.step.g_prime;
            if total.norm() <= cfg.solver.fixed_point_grad_tol * scratch.grad_scale {
                return Ok((pr, probes, true));
            }
        }
        if pr.eta < 0.5 {
            lo = Some(lam);
            lam = match hi {
                Some(h) => (lam * h).sqrt(),
                None => lam * 2.0,
            };
        } else if pr.eta > up {
            hi = Some(lam);
            lam = match lo {
                Some(l) => (lam * l).sqrt(),
                None => lam * 0.5,
            };
        } else {
            return Ok((pr, probes, false));
        }
        if !(1e-300..=1e300).contains(&lam) {
            return Err(SolverError::LambdaSearchFailure { probes, last_eta });
        }
    }
}

fn advance(
    f: &dyn Oracle,
    g: &CompositePart,
    state: &CatdState,
    pr: Probe,
    probes: u64,
    fixed_point: bool,
) -> Result<(CatdState, IterDebug)> {
    let y_next = pr.step.y_plus.clone();
    let grad_f = f.gradient(&y_next)?;
    let grad_total = grad_f + &pr.step.g_prime;
    let x_next = &state.x - &grad_total * pr.a;
    let f_value = f.eval_raw(&y_next) + g.value_raw(&y_next);
    let debug = IterDebug {
        a: pr.a,
        a_big: pr.a_big_next,
        lambda: pr.lambda,
        eta: (!fixed_point).then_some(pr.eta),
        x_tilde: pr.x_tilde,
        y: y_next.clone(),
        x_after: x_next.clone(),
        grad_total,
        f_value,
        step_norm: pr.step.step_norm,
        probes,
        fixed_point,
        model_grad_norm: pr.step.model_grad_norm,
        threshold: pr.step.threshold,
        rule: pr.step.rule,
        inner_iters: pr.step.inner_iterations,
    };
    let next = CatdState {
        k: state.k + 1,
        a_big: pr.a_big_next,
        x: x_next,
        y: y_next,
        last_lambda: pr.lambda,
    };
    Ok((next, debug))
}

/// One envelope iteration from an explicit state.
pub fn catd_step(
    f: &dyn Oracle,
    g: &CompositePart,
    cfg: &CatdConfig,
    state: &CatdState,
) -> Result<(CatdState, IterDebug)> {
    let mut scratch = Scratch {
        warm: None,
        grad_scale: (f.grad_raw(&state.y) + g.subgradient_raw(&state.y))
            .norm()
            .max(1.0),
    };
    let (pr, probes, fixed) = search(f, g, cfg, state, &mut scratch)?;
    advance(f, g, state, pr, probes, fixed)
}

pub(crate) struct RunOpts<'a> {
    pub reference: Option<&'a Reference>,
    pub early_stop: Option<&'a dyn Fn(&Vector) -> bool>,
    pub collect: bool,
    pub iter_offset: u64,
    pub restart_index: Option<u64>,
    /// Warm start for the first step-size search of the run.
    pub initial_lambda: Option<f64>,
}

impl Default for RunOpts<'_> {
    fn default() -> Self {
        Self {
            reference: None,
            early_stop: None,
            collect: true,
            iter_offset: 0,
            restart_index: None,
            initial_lambda: None,
        }
    }
}

fn snapshot(o: &dyn Oracle) -> [u64; 4] {
    o.counters_opt().map(|c| c.snapshot()).unwrap_or_default()
}

fn build_record(
    f: &dyn Oracle,
    g: &CompositePart,
    cfg: &CatdConfig,
    dbg: &IterDebug,
    opts: &RunOpts,
    iter: u64,
) -> TraceRecord {
    let g_calls = match g {
        CompositePart::Smooth(o) => o.counters().snapshot(),
        _ => [0; 4],
    };
    let n_f = f.counters_opt().map(|c| c.count(cfg.p)).unwrap_or_default();
    let n_g = g_calls[cfg.p];
    TraceRecord {
        iter,
        restart_index: opts.restart_index,
        outer_iter: None,
        value: dbg.f_value,
        gap: opts
            .reference
            .and_then(|r| r.f_star)
            .map(|fs| dbg.f_value - fs),
        grad_norm: dbg.grad_total.norm(),
        lambda: Some(dbg.lambda),
        eta: dbg.eta,
        a_big: Some(dbg.a_big),
        step_norm: Some(dbg.step_norm),
        probes: Some(dbg.probes),
        inner_iters: Some(dbg.inner_iters),
        n_f,
        n_g,
        f_calls: snapshot(f),
        g_calls,
        resid_q: None,
        resid_p: None,
    }
}

pub(crate) fn run_catd_opts(
    f: &dyn Oracle,
    g: &CompositePart,
    x0: &Vector,
    iters: u64,
    cfg: &CatdConfig,
    opts: &RunOpts,
) -> Result<CatdOutcome> {
    if cfg.p < 1 || cfg.p > f.order() {
        return Err(SolverError::UnsupportedOrder {
            requested: cfg.p,
            max: f.order(),
        });
    }
    let mut state = CatdState::new(x0.clone());
    if let Some(lambda) = opts.initial_lambda {
        state.last_lambda = lambda.clamp(1e-150, 1e150);
    }
    let mut scratch = Scratch {
        warm: None,
        grad_scale: (f.grad_raw(x0) + g.subgradient_raw(x0)).norm().max(1.0),
    };
    let mut records = Vec::new();
    let mut debug = Vec::new();
    let mut stopped_early = false;
    for k in 0..iters {
        let (next, dbg) = {
            let (pr, probes, fixed) = search(f, g, cfg, &state, &mut scratch)?;
            advance(f, g, &state, pr, probes, fixed)?
        };
        state = next;
        if opts.collect {
            records.push(build_record(
                f,
                g,
                cfg,
                &dbg,
                opts,
                opts.iter_offset + k + 1,
            ));
        }
        debug.push(dbg);
        if let Some(stop) = opts.early_stop {
            if stop(&state.y) {
                stopped_early = true;
                break;
            }
        }
    }
    Ok(CatdOutcome {
        records,
        debug,
        state,
        x0: x0.clone(),
        stopped_early,
    })
}

/// Runs K envelope iterations from `x0`.
pub fn run_catd(
    f: &dyn Oracle,
    g: &CompositePart,
    x0: &Vector,
    iters: u64,
    cfg: &CatdConfig,
    reference: Option<&Reference>,
) -> Result<CatdOutcome> {
    run_catd_opts(
        f,
        g,
        x0,
        iters,
        cfg,
        &RunOpts {
            reference,
            ..RunOpts::default()
        },
    )
}

#[derive(Clone, Debug)]
pub struct AuditReport {
    pub iterations: usize,
    /// Worst value of `(psi_k(x_k) - A_k F(y_k)) / scale` over the run;
    /// nonnegative up to rounding when the envelope is sound.
    pub min_potential_margin: f64,
    /// Largest used fraction of the step-size budget
    /// `sum_i (A_i / lambda_i) ||y_i - x~_{i-1}||^2 <= R^2 / (1 - sigma^2)`,
    /// when a minimizer hint is available.
    pub step_budget_fraction: Option<f64>,
    /// Largest ratio of the measured gap to the envelope rate form
    /// `2 R^2 / (sum_i sqrt(lambda_i))^2`, when the optimum is known.
    pub max_rate_ratio: Option<f64>,
}

/// Recomputes the envelope potential and invariants from a stored run.
///
/// Checks, for every iteration k:
/// * the accepted eta lies in `[1/2, p/(p+1)]` (fixed points exempt);
/// * the recurrence `lambda_{k} A_{k} = a_{k}^2` to 1e-10 relative;
/// * `x_k` equals the accumulated dual update;
/// * `psi_k(x_k) - A_k F(y_k) >= -1e-9 * scale` where `psi_k` is the
///   accumulated linearization model `1/2 ||x - x_0||^2 + sum a_i Omega_1`;
/// * with a minimizer hint, the step-size budget with contraction
///   `sigma = cfg.solver.audit_sigma`;
/// * with a known optimum, the rate form `gap_k <= 2 R^2 / (sum sqrt(lambda))^2`.
pub fn potential_audit(
    outcome: &CatdOutcome,
    cfg: &CatdConfig,
    reference: Option<&Reference>,
) -> Result<AuditReport> {
    let p = cfg.p;
    let up = p as f64 / (p as f64 + 1.0);
    let x0 = &outcome.x0;
    let sigma = cfg.solver.audit_sigma;
    let radius = reference
        .and_then(|r| r.x_star.as_ref())
        .map(|xs| (x0 - xs).norm());

    let mut lin_const = 0.0; // sum a_i (F_i - <grad_i, y_i>)
    let mut lin_vec = Vector::zeros(x0.len()); // sum a_i grad_i
    let mut budget = 0.0;
    let mut sqrt_lambda_sum = 0.0;
    let mut prev_a_big = 0.0;
    let mut min_margin = f64::INFINITY;
    let mut max_budget_frac: Option<f64> = None;
    let mut max_rate_ratio: Option<f64> = None;

    for (idx, d) in outcome.debug.iter().enumerate() {
        let k = idx + 1;
        if !d.fixed_point {
            let eta = d.lambda * cfg.h_coeff * d.step_norm.powi(p as i32 - 1) / factorial(p - 1);
            if !(0.5 - 1e-9..=up + 1e-9).contains(&eta) {
                return Err(SolverError::AuditFailure {
                    k,
                    what: format!("eta {eta} outside [0.5, {up}]"),
                });
            }
        }
        let a_sq = d.a * d.a;
        let rel = (d.lambda * d.a_big - a_sq).abs() / a_sq.max(f64::MIN_POSITIVE);
        if rel > 1e-10 {
            return Err(SolverError::AuditFailure {
                k,
                what: format!("lambda * A differs from a^2 by relative {rel:.3e}"),
            });
        }
        if (d.a_big - prev_a_big - d.a).abs() > 1e-9 * d.a_big.max(1.0) {
            return Err(SolverError::AuditFailure {
                k,
                what: "A_k does not accumulate a_k".into(),
            });
        }
        prev_a_big = d.a_big;

        lin_const += d.a * (d.f_value - d.grad_total.dot(&d.y));
        lin_vec += &d.grad_total * d.a;
        let xk = &d.x_after;
        let drift = (xk - (x0 - &lin_vec)).norm();
        if drift > 1e-8 * xk.norm().max(1.0) {
            return Err(SolverError::AuditFailure {
                k,
                what: format!("dual point drifts from the accumulated update by {drift:.3e}"),
            });
        }
        budget += d.a_big / d.lambda * d.step_norm * d.step_norm;
        let psi = 0.5 * (xk - x0).norm_squared() + lin_const + lin_vec.dot(xk);
        let af = d.a_big * d.f_value;
        let scale = psi.abs().max(af.abs()).max(1.0);
        let margin = (psi - af) / scale;
        min_margin = min_margin.min(margin);
        if margin < -1e-9 {
            return Err(SolverError::AuditFailure {
                k,
                what: format!("potential gap {:.3e} below tolerance", psi - af),
            });
        }
        // the potential gap also dominates the accumulated step-size sum
        let floor = 0.5 * (1.0 - sigma * sigma) * budget;
        if psi - af < floor - 1e-9 * scale.max(floor) {
            return Err(SolverError::AuditFailure {
                k,
                what: format!(
                    "potential gap {:.3e} below the step-size sum floor {floor:.3e}",
                    psi - af
                ),
            });
        }
        sqrt_lambda_sum += d.lambda.sqrt();
        if let Some(r) = radius {
            let cap = r * r / (1.0 - sigma * sigma);
            let frac = budget / cap.max(f64::MIN_POSITIVE);
            if frac > 1.0 + 1e-9 && budget > 1e-12 {
                return Err(SolverError::AuditFailure {
                    k,
                    what: format!("step-size budget exceeded: {budget:.3e} > {cap:.3e}"),
                });
            }
            max_budget_frac = Some(max_budget_frac.unwrap_or(0.0).max(frac));
            if let Some(fs) = reference.and_then(|rf| rf.f_star) {
                let gap = d.f_value - fs;
                let bound = 2.0 * r * r / (sqrt_lambda_sum * sqrt_lambda_sum);
                let ratio = gap / bound.max(f64::MIN_POSITIVE);
                if gap > bound * (1.0 + 1e-9) + 1e-12 {
                    return Err(SolverError::AuditFailure {
                        k,
                        what: format!("rate form violated: gap {gap:.3e} > bound {bound:.3e}"),
                    });
                }
                max_rate_ratio = Some(max_rate_ratio.unwrap_or(0.0).max(ratio));
            }
        }
    }
    Ok(AuditReport {
        iterations: outcome.debug.len(),
        min_potential_margin: if min_margin.is_finite() {
            min_margin
        } else {
            0.0
        },
        step_budget_fraction: max_budget_frac,
        max_rate_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SolverConfig;
    use crate::problems::{instance_by_key, make_power_norm, make_quadratic};
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    #[test]
    fn rate_constant_values() {
        assert_relative_eq!(c_p(1), 4.0);
        assert_relative_eq!(c_p(2), 2.0 * 3f64.powf(3.5), max_relative = 1e-14);
        assert!((c_p(2) - 93.53).abs() < 0.01);
    }

    #[test]
    fn p1_lambda_is_half_over_h() {
        let quad = make_quadratic(DMatrix::identity(3, 3), Vector::from_element(3, 1.0)).unwrap();
        let g = CompositePart::Zero;
        let cfg = CatdConfig::new(1, 1.0);
        let out = run_catd(&quad, &g, &Vector::zeros(3), 5, &cfg, None).unwrap();
        for d in &out.debug {
            assert_relative_eq!(d.lambda, 0.5);
            assert_relative_eq!(d.eta.unwrap(), 0.5);
            assert_eq!(d.probes, 1);
        }
    }

    #[test]
    fn quadratic_p2_eta_stays_in_bracket() {
        let inst = instance_by_key("quad-n6", 0).unwrap();
        let g = CompositePart::Zero;
        let cfg = CatdConfig::new(2, 1.0);
        let out = run_catd(&*inst.f, &g, &inst.start, 20, &cfg, None).unwrap();
        for d in &out.debug {
            if let Some(eta) = d.eta {
                assert!(
                    (0.5 - 1e-12..=2.0 / 3.0 + 1e-12).contains(&eta),
                    "eta {eta}"
                );
            }
            assert!(d.probes <= 40);
        }
    }

    #[test]
    fn a_recurrence_identity() {
        let inst = instance_by_key("quad-n6", 0).unwrap();
        let g = CompositePart::Zero;
        let cfg = CatdConfig::new(2, 1.0);
        let out = run_catd(&*inst.f, &g, &inst.start, 15, &cfg, None).unwrap();
        for d in &out.debug {
            let lhs = d.lambda * d.a_big;
            let rhs = d.a * d.a;
            assert!((lhs - rhs).abs() <= 1e-10 * rhs.max(1e-300));
        }
    }

    #[test]
    fn minimizer_is_a_fixed_point() {
        let f2 = make_power_norm(2, 4).unwrap();
        let g = CompositePart::Zero;
        let cfg = CatdConfig::new(2, 1.0);
        let out = run_catd(&f2, &g, &Vector::zeros(4), 3, &cfg, None).unwrap();
        for d in &out.debug {
            assert!(d.fixed_point);
            assert!(d.y.norm() <= 1e-12);
        }
    }

    #[test]
    fn envelope_bound_holds_on_quadratic() {
        let inst = instance_by_key("quad-n6", 0).unwrap();
        let g = CompositePart::Zero;
        let h = 1.0;
        let cfg = CatdConfig::new(2, h);
        let reference = Reference {
            x_star: inst.known_minimizer.clone(),
            f_star: inst.known_min_value,
        };
        let out = run_catd(&*inst.f, &g, &inst.start, 30, &cfg, Some(&reference)).unwrap();
        let radius = (inst.known_minimizer.as_ref().unwrap() - &inst.start).norm();
        for (idx, d) in out.debug.iter().enumerate() {
            let gap = d.f_value - inst.known_min_value.unwrap();
            let bound = envelope_bound(2, h, radius, idx as u64 + 1);
            assert!(
                gap <= bound * (1.0 + 1e-9),
                "k={} gap {gap} bound {bound}",
                idx + 1
            );
        }
    }

    #[test]
    fn audit_passes_and_flags_corruption() {
        let inst = instance_by_key("quad-n6", 0).unwrap();
        let g = CompositePart::Zero;
        let cfg = CatdConfig::new(2, 1.0);
        let reference = Reference {
            x_star: inst.known_minimizer.clone(),
            f_star: inst.known_min_value,
        };
        let mut out = run_catd(&*inst.f, &g, &inst.start, 30, &cfg, Some(&reference)).unwrap();
        let report = potential_audit(&out, &cfg, Some(&reference)).unwrap();
        assert!(report.min_potential_margin >= -1e-9);
        assert!(report.step_budget_fraction.unwrap() <= 1.0 + 1e-9);

        // corrupt one lambda out of its bracket: the audit must name the step
        out.debug[10].lambda *= 10.0;
        match potential_audit(&out, &cfg, Some(&reference)) {
            Err(SolverError::AuditFailure { k, .. }) => assert_eq!(k, 11),
            other => panic!("expected an audit failure, got {other:?}"),
        }
    }

    #[test]
    fn probe_count_bounds_order_p_calls() {
        let inst = instance_by_key("quad-n6", 0).unwrap();
        let g = CompositePart::Zero;
        let cfg = CatdConfig::new(2, 1.0);
        inst.reset_counters();
        let out = run_catd(&*inst.f, &g, &inst.start, 10, &cfg, None).unwrap();
        let probes: u64 = out.debug.iter().map(|d| d.probes).sum();
        assert_eq!(inst.f.counters().count(2), probes);
    }

    #[test]
    fn solver_config_knobs_reachable() {
        let inst = instance_by_key("quad-n6", 0).unwrap();
        let g = CompositePart::Zero;
        let mut cfg = CatdConfig::new(2, 1.0);
        cfg.solver = SolverConfig {
            max_probes: 1,
            ..SolverConfig::default()
        };
        // One probe is not always enough to land in the bracket.
        let result = run_catd(&*inst.f, &g, &inst.start, 5, &cfg, None);
        if let Err(e) = result {
            assert!(matches!(e, SolverError::LambdaSearchFailure { .. }));
        }
    }
}
