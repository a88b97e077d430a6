//! Acceptance check suites: every criterion runs at a pinned tolerance and
//! reports one pass/fail line with measured versus expected values.

use std::fmt;
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::experiment::{run_experiment, Algorithm, ExperimentConfig};
use super::fd::{directional_fd, gradient_fd};
use super::slope::{least_squares, slope_fit};
use super::{HResult, HarnessError};
use crate::catd::{envelope_bound, potential_audit, run_catd, CatdOutcome, Reference};
use crate::combination::{run_combination, CombinationConfig, CombinationMode};
use crate::composite::CompositePart;
use crate::config::{CatdConfig, SolverConfig};
use crate::error::SolverError;
use crate::multicomposite::{run_multicomposite, speed_bound, MultiCompositeSpec};
use crate::oracle::{factorial, remainder_check, CallSite, Oracle, Vector};
use crate::problems::{builtin_oracles, instance_by_key};
use crate::restarts::{restart_count, run_catd_restarts, RestartSchedule};
use crate::tensor_step::{recompute_model_gradient, RuleKind};
use crate::trace::{RunSummary, RunTrace, TraceRecord};

#[derive(Clone, Debug)]
pub struct CriterionResult {
    pub id: u32,
    pub name: &'static str,
    pub passed: bool,
    pub details: String,
}

impl CriterionResult {
    fn pass(id: u32, name: &'static str, details: String) -> Self {
        Self {
            id,
            name,
            passed: true,
            details,
        }
    }

    fn fail(id: u32, name: &'static str, details: String) -> Self {
        Self {
            id,
            name,
            passed: false,
            details,
        }
    }
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:2} {:<24} {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.details
        )
    }
}

fn sample_point(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> Vector {
    loop {
        let x = Vector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0) * scale);
        if x.norm() >= 0.25 * scale {
            return x;
        }
    }
}

fn trace_from_records(records: Vec<TraceRecord>) -> RunTrace {
    let (n_f, n_g) = records.last().map(|r| (r.n_f, r.n_g)).unwrap_or((0, 0));
    RunTrace {
        summary: RunSummary {
            name: "suite".into(),
            problem: "suite".into(),
            algorithm: "suite".into(),
            p: 0,
            q: None,
            iterations: records.len() as u64,
            final_value: records.last().map(|r| r.value).unwrap_or(f64::NAN),
            final_gap: records.last().and_then(|r| r.gap),
            final_grad_norm: records.last().map(|r| r.grad_norm).unwrap_or(f64::NAN),
            n_f,
            n_g,
            outer_iters: None,
            total_inner_iters: None,
            wall_time_s: 0.0,
            seed: 0,
        },
        records,
    }
}

// --- criterion 1: derivative correctness --------------------------------------

pub fn criterion_derivatives() -> CriterionResult {
    const ID: u32 = 1;
    const NAME: &str = "derivative-correctness";
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for oracle in builtin_oracles(17) {
        let dim = oracle.dim();
        for _ in 0..20 {
            let x = sample_point(&mut rng, dim, 2.0);
            let h = sample_point(&mut rng, dim, 1.0);

            let value_fn = |z: &Vector| oracle.eval_raw(z);
            let grad = oracle.grad_raw(&x);
            let grad_fd = gradient_fd(&value_fn, &x);
            let rel = (&grad - &grad_fd).norm() / grad.norm().max(1.0);
            worst = worst.max(rel);
            if rel > 1e-5 {
                return CriterionResult::fail(
                    ID,
                    NAME,
                    format!("{} gradient off by rel {rel:.2e}", oracle.label()),
                );
            }
            if oracle.order() >= 2 {
                let d2 = oracle.contract_raw(&x, &h, 2);
                let grad_fn = |z: &Vector| oracle.grad_raw(z);
                let d2_fd = directional_fd(&grad_fn, &x, &h);
                let rel = (&d2 - &d2_fd).norm() / d2.norm().max(1.0);
                worst = worst.max(rel);
                if rel > 1e-5 {
                    return CriterionResult::fail(
                        ID,
                        NAME,
                        format!(
                            "{} order-2 contraction off by rel {rel:.2e}",
                            oracle.label()
                        ),
                    );
                }
            }
            if oracle.order() >= 3 {
                let d3 = oracle.contract_raw(&x, &h, 3);
                let hess_fn = |z: &Vector| oracle.contract_raw(z, &h, 2);
                let d3_fd = directional_fd(&hess_fn, &x, &h);
                let rel = (&d3 - &d3_fd).norm() / d3.norm().max(1.0);
                worst = worst.max(rel);
                if rel > 1e-5 {
                    return CriterionResult::fail(
                        ID,
                        NAME,
                        format!(
                            "{} order-3 contraction off by rel {rel:.2e}",
                            oracle.label()
                        ),
                    );
                }
            }
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    if elapsed >= 5.0 {
        return CriterionResult::fail(ID, NAME, format!("took {elapsed:.1}s, budget is 5s"));
    }
    CriterionResult::pass(
        ID,
        NAME,
        format!("worst relative error {worst:.2e} (tol 1e-5), {elapsed:.2}s"),
    )
}

// --- criterion 2: Taylor remainder bound ---------------------------------------

pub fn criterion_remainder() -> CriterionResult {
    const ID: u32 = 2;
    const NAME: &str = "taylor-remainder";
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst: f64 = 0.0;
    let mut checked = 0usize;
    for oracle in builtin_oracles(17) {
        let dim = oracle.dim();
        for k in 1..=oracle.order() {
            if oracle.lipschitz(k).is_none() {
                continue;
            }
            for _ in 0..100 {
                let x = sample_point(&mut rng, dim, 3.0);
                let dir = sample_point(&mut rng, dim, 1.0);
                let len = rng.gen_range(1e-3..10.0);
                let y = &x + dir.normalize() * len;
                match remainder_check(oracle.as_ref(), &x, &y, k) {
                    Ok(chk) => {
                        checked += 1;
                        if chk.rhs > 0.0 {
                            worst = worst.max(chk.lhs / chk.rhs);
                        }
                        if !chk.ok {
                            return CriterionResult::fail(
                                ID,
                                NAME,
                                format!(
                                    "{} order {k}: |f - Omega| = {:.3e} > bound {:.3e}",
                                    oracle.label(),
                                    chk.lhs,
                                    chk.rhs
                                ),
                            );
                        }
                    }
                    Err(e) => {
                        return CriterionResult::fail(ID, NAME, format!("check errored: {e}"))
                    }
                }
            }
        }
    }
    CriterionResult::pass(
        ID,
        NAME,
        format!("{checked} pairs, worst lhs/rhs {worst:.3} (must be <= 1)"),
    )
}

// --- criteria 3-5: envelope runs -----------------------------------------------

struct EnvelopeRun {
    label: String,
    p: usize,
    h: f64,
    radius: f64,
    f_star: f64,
    outcome: CatdOutcome,
}

fn envelope_runs(iters: u64) -> HResult<Vec<EnvelopeRun>> {
    let mut out = Vec::new();
    for (key, p, h) in [
        ("power2-n10", 1usize, None),
        ("power2-n10", 2, Some(1.0)),
        ("quad-n10", 1, None),
        ("quad-n10", 2, Some(1.0)),
    ] {
        let inst = instance_by_key(key, 0)?;
        let h = match h {
            Some(h) => h,
            None => inst.f.lipschitz(p).unwrap(),
        };
        let reference = Reference {
            x_star: inst.known_minimizer.clone(),
            f_star: inst.known_min_value,
        };
        let composite = inst.composite_for_solver();
        let cfg = CatdConfig::new(p, h);
        let outcome = run_catd(
            &*inst.f,
            &composite,
            &inst.start,
            iters,
            &cfg,
            Some(&reference),
        )?;
        out.push(EnvelopeRun {
            label: format!("{key} p={p}"),
            p,
            h,
            radius: (inst.known_minimizer.as_ref().unwrap() - &inst.start).norm(),
            f_star: inst.known_min_value.unwrap(),
            outcome,
        });
    }
    Ok(out)
}

pub fn criterion_envelope_bound() -> CriterionResult {
    const ID: u32 = 3;
    const NAME: &str = "envelope-bound";
    let runs = match envelope_runs(100) {
        Ok(r) => r,
        Err(e) => return CriterionResult::fail(ID, NAME, format!("run failed: {e}")),
    };
    let mut worst_ratio: f64 = 0.0;
    let mut worst_rate_ratio: f64 = 0.0;
    for run in &runs {
        let mut sqrt_lambda_sum = 0.0;
        for (idx, d) in run.outcome.debug.iter().enumerate() {
            let k = idx as u64 + 1;
            let gap = d.f_value - run.f_star;
            let bound = envelope_bound(run.p, run.h, run.radius, k);
            worst_ratio = worst_ratio.max(gap / bound);
            if gap > bound * (1.0 + 1e-9) {
                return CriterionResult::fail(
                    ID,
                    NAME,
                    format!("{}: gap {gap:.3e} > c_p H R^{{p+1}} k^{{-(3p+1)/2}} = {bound:.3e} at k={k}", run.label),
                );
            }
            sqrt_lambda_sum += d.lambda.sqrt();
            let rate = 2.0 * run.radius * run.radius / (sqrt_lambda_sum * sqrt_lambda_sum);
            worst_rate_ratio = worst_rate_ratio.max(gap / rate);
            if gap > rate * (1.0 + 1e-9) + 1e-12 {
                return CriterionResult::fail(
                    ID,
                    NAME,
                    format!(
                        "{}: gap {gap:.3e} > 2R^2/(sum sqrt lambda)^2 = {rate:.3e} at k={k}",
                        run.label
                    ),
                );
            }
        }
    }
    CriterionResult::pass(
        ID,
        NAME,
        format!(
            "pointwise on 4 runs x 100 iters; worst gap/bound {worst_ratio:.2e}, worst gap/rate-form {worst_rate_ratio:.2e}"
        ),
    )
}

pub fn criterion_rate_slopes() -> CriterionResult {
    const ID: u32 = 4;
    const NAME: &str = "rate-slope";
    let run = |key: &str, p: usize, h: f64, iters: u64, tail: f64, cap: f64| -> HResult<f64> {
        let inst = instance_by_key(key, 0)?;
        let reference = Reference {
            x_star: inst.known_minimizer.clone(),
            f_star: inst.known_min_value,
        };
        let composite = inst.composite_for_solver();
        let cfg = CatdConfig::new(p, h);
        let out = run_catd(
            &*inst.f,
            &composite,
            &inst.start,
            iters,
            &cfg,
            Some(&reference),
        )?;
        let trace = trace_from_records(out.records);
        let (slope, _) = slope_fit(&trace, "gap", tail)?;
        if slope > cap {
            return Err(HarnessError::Fit(format!(
                "{key} p={p}: tail slope {slope:.2} above the cap {cap}"
            )));
        }
        Ok(slope)
    };
    // power2 measures the quadratic instance from the rate checks; power4 has
    // a degenerate minimum so the decay stays polynomial over the window.
    let runs = [
        ("power2-n10", 2usize, 1.0, 50u64, 1.0, -3.0),
        ("power4-n10", 2, 10.0, 50, 0.5, -3.0),
        ("power2-n10", 1, 1.0, 40, 1.0, -1.7),
    ];
    let mut slopes = Vec::new();
    for (key, p, h, iters, tail, cap) in runs {
        match run(key, p, h, iters, tail, cap) {
            Ok(s) => slopes.push(format!("{key} p={p}: {s:.2} (cap {cap})")),
            Err(e) => return CriterionResult::fail(ID, NAME, e.to_string()),
        }
    }
    CriterionResult::pass(
        ID,
        NAME,
        format!("{} [theory -3.5 at p=2, -2.0 at p=1]", slopes.join("; ")),
    )
}

pub fn criterion_lambda_bracket() -> CriterionResult {
    const ID: u32 = 5;
    const NAME: &str = "lambda-bracket";
    let runs = match envelope_runs(60) {
        Ok(r) => r,
        Err(e) => return CriterionResult::fail(ID, NAME, format!("run failed: {e}")),
    };
    let mut max_probes = 0u64;
    for run in &runs {
        let up = run.p as f64 / (run.p as f64 + 1.0);
        for (idx, d) in run.outcome.debug.iter().enumerate() {
            max_probes = max_probes.max(d.probes);
            if d.probes > 40 {
                return CriterionResult::fail(
                    ID,
                    NAME,
                    format!("{}: {} probes at k={}", run.label, d.probes, idx + 1),
                );
            }
            if d.fixed_point {
                if d.grad_total.norm() > 1e-8 {
                    return CriterionResult::fail(
                        ID,
                        NAME,
                        format!(
                            "{}: fixed-point acceptance with gradient {:.2e} at k={}",
                            run.label,
                            d.grad_total.norm(),
                            idx + 1
                        ),
                    );
                }
                continue;
            }
            let eta = d.lambda * run.h * d.step_norm.powi(run.p as i32 - 1) / factorial(run.p - 1);
            if !(0.5 - 1e-9..=up + 1e-9).contains(&eta) {
                return CriterionResult::fail(
                    ID,
                    NAME,
                    format!(
                        "{}: eta {eta:.6} outside [0.5, {up:.4}] at k={}",
                        run.label,
                        idx + 1
                    ),
                );
            }
        }
    }
    CriterionResult::pass(
        ID,
        NAME,
        format!(
            "eta in [1/2, p/(p+1)] re-verified on 4 runs; max probes/iter {max_probes} (cap 40)"
        ),
    )
}

// --- criterion 6: potential audit ----------------------------------------------

pub fn criterion_potential_audit() -> CriterionResult {
    const ID: u32 = 6;
    const NAME: &str = "potential-audit";
    let run_audit = |key: &str,
                     p: usize,
                     h: Option<f64>|
     -> HResult<(f64, CatdOutcome, CatdConfig, Reference)> {
        let inst = instance_by_key(key, 0)?;
        let h = match h {
            Some(h) => h,
            None => inst.f.lipschitz(p).unwrap(),
        };
        let reference = Reference {
            x_star: inst.known_minimizer.clone(),
            f_star: inst.known_min_value,
        };
        let composite = inst.composite_for_solver();
        let cfg = CatdConfig::new(p, h);
        let out = run_catd(
            &*inst.f,
            &composite,
            &inst.start,
            40,
            &cfg,
            Some(&reference),
        )?;
        let report = potential_audit(&out, &cfg, Some(&reference))?;
        Ok((report.min_potential_margin, out, cfg, reference))
    };
    let (margin_a, mut out, cfg, reference) = match run_audit("quad-n10", 2, Some(1.0)) {
        Ok(v) => v,
        Err(e) => return CriterionResult::fail(ID, NAME, format!("quad audit failed: {e}")),
    };
    let margin_b = match run_audit("power4-n6", 3, None) {
        Ok((m, ..)) => m,
        Err(e) => return CriterionResult::fail(ID, NAME, format!("power4 audit failed: {e}")),
    };
    // fault injection: a lambda pushed out of its bracket must be flagged
    out.debug[12].lambda *= 10.0;
    match potential_audit(&out, &cfg, Some(&reference)) {
        Err(SolverError::AuditFailure { k: 13, .. }) => CriterionResult::pass(
            ID,
            NAME,
            format!(
                "potential margins {margin_a:.2e} / {margin_b:.2e} (floor -1e-9); corrupted lambda flagged at k=13"
            ),
        ),
        Err(e) => CriterionResult::fail(ID, NAME, format!("fault flagged at the wrong place: {e}")),
        Ok(_) => CriterionResult::fail(ID, NAME, "corrupted lambda went undetected".into()),
    }
}

// --- criterion 7: restart halving ----------------------------------------------

pub fn criterion_restart_halving() -> CriterionResult {
    const ID: u32 = 7;
    const NAME: &str = "restart-halving";
    let inst = match instance_by_key("power3-n5", 0) {
        Ok(i) => i,
        Err(e) => return CriterionResult::fail(ID, NAME, e.to_string()),
    };
    let p = 2usize;
    let l2 = inst.f.lipschitz(p).unwrap();
    let (r, sigma) = inst.uniform_convexity.unwrap();
    let sched = RestartSchedule {
        r0: 1.0,
        r,
        sigma_r: sigma,
        l_const: l2,
        p,
    };
    let reference = Reference {
        x_star: inst.known_minimizer.clone(),
        f_star: inst.known_min_value,
    };
    let cfg = CatdConfig::new(p, l2);
    let composite = inst.composite_for_solver();
    let out = match run_catd_restarts(
        &*inst.f,
        &composite,
        &inst.start,
        &sched,
        6,
        &cfg,
        Some(&reference),
        None,
    ) {
        Ok(o) => o,
        Err(e) => return CriterionResult::fail(ID, NAME, format!("run failed: {e}")),
    };
    if out.boundaries.len() != 6 {
        return CriterionResult::fail(
            ID,
            NAME,
            format!("expected 6 restarts, got {}", out.boundaries.len()),
        );
    }
    let x_star = inst.known_minimizer.as_ref().unwrap();
    let mut dists = Vec::new();
    for b in &out.boundaries {
        let dist = (&b.z - x_star).norm();
        let allowed = sched.radius_at(b.index) / 2.0 + 1e-9;
        dists.push(dist);
        if dist > allowed {
            return CriterionResult::fail(
                ID,
                NAME,
                format!(
                    "restart {}: distance {dist:.3e} > R_k/2 = {allowed:.3e}",
                    b.index
                ),
            );
        }
        // independent re-evaluation of the budget formula
        let r_k = 2f64.powi(-(b.index as i32));
        let expected = (r as f64 * crate::catd::c_p(p) * l2 * 2f64.powi(r as i32) / sigma
            * r_k.powi(p as i32 + 1 - r as i32))
        .powf(2.0 / (3.0 * p as f64 + 1.0))
        .ceil()
        .max(1.0) as u64;
        if b.planned != expected || restart_count(b.index, &sched).unwrap() != expected {
            return CriterionResult::fail(
                ID,
                NAME,
                format!(
                    "restart {}: budget {} (planned) vs {} (independent)",
                    b.index, b.planned, expected
                ),
            );
        }
    }
    let planned: u64 = out.boundaries.iter().map(|b| b.planned).sum();
    if out.total_steps > planned + out.boundaries.len() as u64 {
        return CriterionResult::fail(
            ID,
            NAME,
            format!("{} steps exceed schedule sum {planned}", out.total_steps),
        );
    }
    CriterionResult::pass(
        ID,
        NAME,
        format!(
            "6 restarts halve the distance (final {:.2e}); budgets match the formula exactly, {} total steps",
            dists.last().unwrap(),
            out.total_steps
        ),
    )
}

// --- criteria 8-9: oracle-complexity splitting ----------------------------------

struct SplitMeasurement {
    kappa: f64,
    n_f: u64,
    n_g: u64,
    outer: u64,
    final_gap: f64,
    probes: u64,
    f_outer_site: u64,
    g_inner_site: u64,
    g_total: u64,
}

fn split_run(kappa: f64, convex: bool) -> HResult<SplitMeasurement> {
    let key = format!("split-p2-k{kappa}-n8");
    let inst = instance_by_key(&key, 0)?;
    let g = inst.smooth_g().unwrap().clone();
    let p = 2usize;
    let mode = if convex {
        CombinationMode::Convex { eps: 2e-3, r0: 1.0 }
    } else {
        let (r, sigma) = inst.uniform_convexity.unwrap();
        CombinationMode::UniformlyConvex {
            r,
            sigma_r: sigma,
            r0: 1.0,
            restarts: 2,
        }
    };
    let cfg = CombinationConfig::new(p, 1.0, kappa, mode)?;
    let reference = Reference {
        x_star: inst.known_minimizer.clone(),
        f_star: inst.known_min_value,
    };
    let out = run_combination(&inst.f, &g, &cfg, &inst.start, Some(&reference))?;
    if convex {
        // the plain outer sequence obeys the envelope bound with the outer
        // coefficient 2 L_{p,f}
        let radius = (inst.known_minimizer.as_ref().unwrap() - &inst.start).norm();
        for rec in &out.records {
            let bound = envelope_bound(p, cfg.h_outer, radius, rec.iter);
            let gap = rec.gap.unwrap();
            if gap > bound * (1.0 + 1e-9) {
                return Err(HarnessError::Fit(format!(
                    "outer envelope bound violated at k={}: gap {gap:.3e} > {bound:.3e}",
                    rec.iter
                )));
            }
        }
    }
    let final_gap = inst.gap(&out.final_point).unwrap();
    Ok(SplitMeasurement {
        kappa,
        n_f: out.n_f,
        n_g: out.n_g,
        outer: out.outer_iters,
        final_gap,
        probes: out.probes_total,
        f_outer_site: inst.f.counters().count_at(p, CallSite::OuterModel),
        g_inner_site: g.counters().count_at(p, CallSite::InnerSolve),
        g_total: g.counters().count(p),
    })
}

fn splitting_mode(convex: bool) -> Result<(f64, u64, u64, f64), String> {
    let kappas = [10.0, 100.0, 1000.0];
    let mut ms = Vec::new();
    for &k in &kappas {
        ms.push(split_run(k, convex).map_err(|e| format!("kappa {k}: {e}"))?);
    }
    let xs: Vec<f64> = ms.iter().map(|m| m.kappa.ln()).collect();
    let ys: Vec<f64> = ms
        .iter()
        .map(|m| (m.n_g as f64 / m.n_f as f64).ln())
        .collect();
    let (slope, _) = least_squares(&xs, &ys);
    let target = 2.0 / 7.0;
    if (slope - target).abs() > 0.15 {
        return Err(format!(
            "N_g/N_f slope {slope:.3} outside {target:.4} +- 0.15 (counts {:?})",
            ms.iter().map(|m| (m.n_f, m.n_g)).collect::<Vec<_>>()
        ));
    }
    let outer_min = ms.iter().map(|m| m.outer).min().unwrap();
    let outer_max = ms.iter().map(|m| m.outer).max().unwrap();
    if outer_max - outer_min > 1 {
        return Err(format!(
            "outer iterations vary by more than 1 across the sweep: {:?}",
            ms.iter().map(|m| m.outer).collect::<Vec<_>>()
        ));
    }
    let worst_gap = ms.iter().map(|m| m.final_gap).fold(0.0f64, f64::max);
    if convex && worst_gap > 2e-3 {
        return Err(format!(
            "convex mode missed the accuracy target: gap {worst_gap:.3e}"
        ));
    }
    Ok((slope, outer_min, outer_max, worst_gap))
}

pub fn criterion_splitting() -> CriterionResult {
    const ID: u32 = 8;
    const NAME: &str = "oracle-splitting";
    let uc = match splitting_mode(false) {
        Ok(v) => v,
        Err(e) => return CriterionResult::fail(ID, NAME, format!("uniformly convex mode: {e}")),
    };
    let cvx = match splitting_mode(true) {
        Ok(v) => v,
        Err(e) => return CriterionResult::fail(ID, NAME, format!("convex mode: {e}")),
    };
    CriterionResult::pass(
        ID,
        NAME,
        format!(
            "slope(N_g/N_f vs kappa): {:.3} restarted / {:.3} plain (target 0.286 +- 0.15); outer iters invariant ({}..{} / {}..{}); plain-mode gap {:.1e} <= 2e-3",
            uc.0, cvx.0, uc.1, uc.2, cvx.1, cvx.2, cvx.3
        ),
    )
}

pub fn criterion_counter_discipline() -> CriterionResult {
    const ID: u32 = 9;
    const NAME: &str = "counter-discipline";
    let m = match split_run(10.0, false) {
        Ok(m) => m,
        Err(e) => return CriterionResult::fail(ID, NAME, format!("run failed: {e}")),
    };
    if m.n_f != m.probes {
        return CriterionResult::fail(
            ID,
            NAME,
            format!("f order-p calls {} != probe total {}", m.n_f, m.probes),
        );
    }
    if m.f_outer_site != m.n_f {
        return CriterionResult::fail(
            ID,
            NAME,
            format!(
                "f order-p calls outside outer model construction: {} of {}",
                m.n_f - m.f_outer_site,
                m.n_f
            ),
        );
    }
    if m.g_inner_site != m.g_total || m.n_g != m.g_total {
        return CriterionResult::fail(
            ID,
            NAME,
            format!(
                "g order-p calls outside inner solves: {} of {}",
                m.g_total - m.g_inner_site,
                m.g_total
            ),
        );
    }
    CriterionResult::pass(
        ID,
        NAME,
        format!(
            "f order-p = probes = {}; g order-p = {} all at the inner-solve site",
            m.n_f, m.n_g
        ),
    )
}

// --- criterion 10: mixed-order bound --------------------------------------------

pub fn criterion_multicomposite_bound() -> CriterionResult {
    const ID: u32 = 10;
    const NAME: &str = "mixed-order-bound";
    let inst = match instance_by_key("mcquad-n6", 0) {
        Ok(i) => i,
        Err(e) => return CriterionResult::fail(ID, NAME, e.to_string()),
    };
    let g = inst.smooth_g().unwrap().clone();
    let (q, p) = (1usize, 2usize);
    let (h_qf, h_pg) = (2.0, 2.0);
    let l_qf = inst.f.lipschitz(q).unwrap();
    let l_pg = g.lipschitz(p).unwrap();
    let spec = match MultiCompositeSpec::new(&*inst.f, &*g, q, p, h_qf, h_pg) {
        Ok(s) => s,
        Err(e) => return CriterionResult::fail(ID, NAME, e.to_string()),
    };
    let h_part = CompositePart::Zero;
    let out = match run_multicomposite(
        &*inst.f,
        &*g,
        &spec,
        &h_part,
        &inst.start,
        100,
        &SolverConfig::default(),
        inst.known_min_value,
    ) {
        Ok(o) => o,
        Err(e) => return CriterionResult::fail(ID, NAME, format!("run failed: {e}")),
    };
    let radius = (inst.known_minimizer.as_ref().unwrap() - &inst.start).norm();
    let mut prev_value = inst.objective_value(&inst.start);
    let mut worst_ratio: f64 = 0.0;
    for rec in &out.records {
        if rec.value > prev_value + 1e-12 * prev_value.abs().max(1.0) {
            return CriterionResult::fail(
                ID,
                NAME,
                format!("objective increased at step {}", rec.iter),
            );
        }
        prev_value = rec.value;
        let bound = speed_bound(rec.iter - 1, q, p, h_qf, l_qf, h_pg, l_pg, radius);
        let gap = rec.gap.unwrap();
        worst_ratio = worst_ratio.max(gap / bound);
        if gap > bound * (1.0 + 1e-9) {
            return CriterionResult::fail(
                ID,
                NAME,
                format!(
                    "gap {gap:.3e} > two-term bound {bound:.3e} at t={}",
                    rec.iter
                ),
            );
        }
    }
    CriterionResult::pass(
        ID,
        NAME,
        format!("descent + two-term bound pointwise for t in [1,100]; worst gap/bound {worst_ratio:.2e}"),
    )
}

// --- criterion 11: inexactness rules ---------------------------------------------

pub fn criterion_inexactness() -> CriterionResult {
    const ID: u32 = 11;
    const NAME: &str = "inexactness-rules";
    let run = |loosen: f64| -> HResult<CatdOutcome> {
        let inst = instance_by_key("logistic-n5-m20", 9)?;
        let p = 2usize;
        let h = inst.f.lipschitz(p).unwrap();
        let composite = inst.composite_for_solver();
        let mut cfg = CatdConfig::new(p, h);
        cfg.solver.loosen_factor = loosen;
        Ok(run_catd(&*inst.f, &composite, &inst.start, 25, &cfg, None)?)
    };
    let inst = match instance_by_key("logistic-n5-m20", 9) {
        Ok(i) => i,
        Err(e) => return CriterionResult::fail(ID, NAME, e.to_string()),
    };
    let p = 2usize;
    let h = inst.f.lipschitz(p).unwrap();
    let composite = inst.composite_for_solver();

    let strict = match run(1.0) {
        Ok(o) => o,
        Err(e) => return CriterionResult::fail(ID, NAME, format!("strict run failed: {e}")),
    };
    for (idx, d) in strict.debug.iter().enumerate() {
        // stored values satisfy the declared rule
        if d.model_grad_norm > d.threshold * (1.0 + 1e-9) + 1e-14 {
            return CriterionResult::fail(
                ID,
                NAME,
                format!("stored residual violates its rule at k={}", idx + 1),
            );
        }
        // independent re-evaluation from scratch
        let grad = match recompute_model_gradient(&*inst.f, &d.x_tilde, p, h, &composite, &d.y) {
            Ok(g) => g,
            Err(e) => return CriterionResult::fail(ID, NAME, format!("re-evaluation failed: {e}")),
        };
        let crit = grad.norm();
        if crit > d.threshold * (1.0 + 1e-6) + 1e-12 {
            return CriterionResult::fail(
                ID,
                NAME,
                format!(
                    "re-evaluated residual {crit:.3e} > threshold {:.3e} at k={}",
                    d.threshold,
                    idx + 1
                ),
            );
        }
        if d.rule == RuleKind::StepScaled {
            let expected = h / (2.0 * factorial(p)) * d.step_norm.powi(p as i32);
            if (d.threshold - expected).abs() > 1e-9 * expected.max(1e-300) {
                return CriterionResult::fail(
                    ID,
                    NAME,
                    format!(
                        "stored threshold disagrees with the rule formula at k={}",
                        idx + 1
                    ),
                );
            }
        }
    }

    // Loosening by 100x must visibly degrade step quality: some steps stop
    // beyond the strict threshold, showing the rule is load-bearing.
    let loose_violations = match run(100.0) {
        Ok(loose) => loose
            .debug
            .iter()
            .filter(|d| {
                let strict_threshold = h / (2.0 * factorial(p)) * d.step_norm.powi(p as i32);
                d.model_grad_norm > strict_threshold * (1.0 + 1e-9)
            })
            .count(),
        Err(_) => usize::MAX, // a diverging loose run demonstrates the point too
    };
    if loose_violations == 0 {
        return CriterionResult::fail(
            ID,
            NAME,
            "loosening the rule 100x changed nothing; the rule is not binding".into(),
        );
    }
    let loose_note = if loose_violations == usize::MAX {
        "loose run failed to converge".to_string()
    } else {
        format!("{loose_violations}/25 loose steps violate the strict rule")
    };
    CriterionResult::pass(
        ID,
        NAME,
        format!("all strict steps re-verified independently; {loose_note}"),
    )
}

// --- criterion 12: determinism ----------------------------------------------------

pub fn criterion_determinism() -> CriterionResult {
    const ID: u32 = 12;
    const NAME: &str = "determinism";
    let configs = [
        ExperimentConfig {
            problem: "quad-n6".into(),
            algo: Algorithm::Catd,
            p: 2,
            h: Some(1.0),
            iters: 20,
            seed: 5,
            ..ExperimentConfig::default()
        },
        ExperimentConfig {
            problem: "split-p2-k10-n5".into(),
            algo: Algorithm::Combination,
            p: 2,
            restarts: 1,
            seed: 3,
            ..ExperimentConfig::default()
        },
        ExperimentConfig {
            problem: "logistic-n5-m12".into(),
            algo: Algorithm::Catd,
            p: 2,
            iters: 10,
            seed: 11,
            ..ExperimentConfig::default()
        },
    ];
    for cfg in &configs {
        let a = match run_experiment(cfg) {
            Ok(t) => t.csv_string(),
            Err(e) => return CriterionResult::fail(ID, NAME, format!("{}: {e}", cfg.problem)),
        };
        let b = match run_experiment(cfg) {
            Ok(t) => t.csv_string(),
            Err(e) => return CriterionResult::fail(ID, NAME, format!("{}: {e}", cfg.problem)),
        };
        if a != b {
            return CriterionResult::fail(
                ID,
                NAME,
                format!("{}: repeated run produced different bytes", cfg.problem),
            );
        }
    }
    CriterionResult::pass(
        ID,
        NAME,
        "3 configs re-run byte-identically (catd, combination, logistic)".into(),
    )
}

// --- suite dispatch -----------------------------------------------------------------

pub fn all_criteria() -> Vec<fn() -> CriterionResult> {
    vec![
        criterion_derivatives,
        criterion_remainder,
        criterion_envelope_bound,
        criterion_rate_slopes,
        criterion_lambda_bracket,
        criterion_potential_audit,
        criterion_restart_halving,
        criterion_splitting,
        criterion_counter_discipline,
        criterion_multicomposite_bound,
        criterion_inexactness,
        criterion_determinism,
    ]
}

/// Runs a named suite and returns one result per criterion.
pub fn check_suite(name: &str) -> HResult<Vec<CriterionResult>> {
    let fns: Vec<fn() -> CriterionResult> = match name {
        "derivatives" => vec![criterion_derivatives],
        "remainder" => vec![criterion_remainder],
        "rates" => vec![criterion_envelope_bound, criterion_rate_slopes],
        "lambda" => vec![criterion_lambda_bracket],
        "potential" => vec![criterion_potential_audit],
        "restarts" => vec![criterion_restart_halving],
        "splitting" => vec![criterion_splitting, criterion_counter_discipline],
        "multicomposite" => vec![criterion_multicomposite_bound],
        "inexact" => vec![criterion_inexactness],
        "determinism" => vec![criterion_determinism],
        "all" => all_criteria(),
        other => {
            return Err(HarnessError::Config(format!(
                "unknown suite `{other}`; try derivatives, remainder, rates, lambda, potential, restarts, splitting, multicomposite, inexact, determinism, or all"
            )))
        }
    };
    Ok(fns.into_iter().map(|f| f()).collect())
}
