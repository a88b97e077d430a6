//! Mixed-order method for `F = f + g + h`: each step jointly minimizes a
//! q-th order model of `f`, a p-th order model of `g` (q <= p), and the
//! simple term `h`:
//!
//! `T(x) = argmin_y Omega_q(f,x;y) + H_qf/(q+1)! ||y-x||^{q+1}
//!                + Omega_p(g,x;y) + H_pg/(p+1)! ||y-x||^{p+1} + h(y)`
//!
//! iterated as `x_{t+1} = T(x_t)`. With `H_qf >= q L_qf` and
//! `H_pg >= p L_pg` both models upper-bound their functions, which gives
//! per-step descent and the two-term rate bound evaluated by
//! [`speed_bound`].

use std::cell::Cell;

use crate::composite::CompositePart;
use crate::config::SolverConfig;
use crate::error::{Result, SolverError};
use crate::oracle::{factorial, Charge, FrozenTaylor, Oracle, Vector};
use crate::problems::{power_grad, power_value};
use crate::tensor_step::ProxDescent;
use crate::trace::TraceRecord;

/// The joint step is solved well inside its stopping scale; this factor
/// tightens the threshold so the plain iteration tracks the exact map.
const JOINT_TIGHTENING: f64 = 1e-2;

#[derive(Clone, Copy, Debug)]
pub struct MultiCompositeSpec {
    pub q: usize,
    pub p: usize,
    pub h_qf: f64,
    pub h_pg: f64,
}

impl MultiCompositeSpec {
    /// Validates order and convexity requirements against the two oracles:
    /// `q <= p`, `H_qf >= q L_qf`, `H_pg >= p L_pg`, and at least one
    /// positive regularizer.
    pub fn new(
        f: &dyn Oracle,
        g: &dyn Oracle,
        q: usize,
        p: usize,
        h_qf: f64,
        h_pg: f64,
    ) -> Result<Self> {
        if q < 1 || p < q {
            return Err(SolverError::InvalidArgument(format!(
                "orders must satisfy 1 <= q <= p, got q = {q}, p = {p}"
            )));
        }
        if f.order() < q || g.order() < p {
            return Err(SolverError::UnsupportedOrder {
                requested: p.max(q),
                max: f.order().min(g.order()),
            });
        }
        for (name, h, bound) in [
            ("H_qf", h_qf, f.lipschitz(q).map(|l| q as f64 * l)),
            ("H_pg", h_pg, g.lipschitz(p).map(|l| p as f64 * l)),
        ] {
            if h < 0.0 || !h.is_finite() {
                return Err(SolverError::InvalidArgument(format!(
                    "{name} must be a nonnegative finite number"
                )));
            }
            if let Some(b) = bound {
                if h < b * (1.0 - 1e-12) {
                    return Err(SolverError::InvalidArgument(format!(
                        "{name} = {h} is below the convexity requirement {b}"
                    )));
                }
            }
        }
        if h_qf == 0.0 && h_pg == 0.0 {
            return Err(SolverError::InvalidArgument(
                "at least one regularization coefficient must be positive".into(),
            ));
        }
        Ok(Self { q, p, h_qf, h_pg })
    }
}

/// Both models frozen at a common center, plus the regularizers and `h`.
pub struct JointModel<'a> {
    fro_f: FrozenTaylor<'a>,
    fro_g: FrozenTaylor<'a>,
    spec: MultiCompositeSpec,
    h_part: &'a CompositePart,
}

impl<'a> JointModel<'a> {
    /// Charges `f` once per order 0..=q and `g` once per order 0..=p.
    pub fn new(
        f: &'a dyn Oracle,
        g: &'a dyn Oracle,
        spec: MultiCompositeSpec,
        center: Vector,
        h_part: &'a CompositePart,
    ) -> Result<Self> {
        let fro_f = FrozenTaylor::new(f, center.clone(), spec.q, Charge::Full)?;
        let fro_g = FrozenTaylor::new(g, center, spec.p, Charge::Full)?;
        Ok(Self {
            fro_f,
            fro_g,
            spec,
            h_part,
        })
    }

    pub fn center(&self) -> &Vector {
        self.fro_f.center()
    }

    /// `(H/(k+1)!) ||d||^{k+1}` equals `H/k!` times the degree-(k+1) power
    /// norm of the displacement.
    fn reg_value(&self, d: &Vector) -> f64 {
        let q_term =
            self.spec.h_qf / factorial(self.spec.q) * power_value(self.spec.q as u32 + 1, d);
        let p_term =
            self.spec.h_pg / factorial(self.spec.p) * power_value(self.spec.p as u32 + 1, d);
        q_term + p_term
    }

    fn reg_gradient(&self, d: &Vector) -> Vector {
        power_grad(self.spec.q as u32 + 1, d) * (self.spec.h_qf / factorial(self.spec.q))
            + power_grad(self.spec.p as u32 + 1, d) * (self.spec.h_pg / factorial(self.spec.p))
    }

    /// Model value without `h`.
    pub fn smooth_value(&self, y: &Vector) -> f64 {
        let d = y - self.center();
        self.fro_f.omega_value(y) + self.fro_g.omega_value(y) + self.reg_value(&d)
    }

    pub fn smooth_gradient(&self, y: &Vector) -> Vector {
        let d = y - self.center();
        self.fro_f.omega_gradient(y) + self.fro_g.omega_gradient(y) + self.reg_gradient(&d)
    }

    /// Full model value including `h`.
    pub fn value(&self, y: &Vector) -> f64 {
        self.smooth_value(y) + self.h_part.value_raw(y)
    }

    /// Optimality residual of the joint model at `y` (subdifferential of `h`
    /// represented by its interior subgradient).
    pub fn residual(&self, y: &Vector) -> Vector {
        self.smooth_gradient(y) + self.h_part.subgradient_raw(y)
    }
}

#[derive(Clone, Debug)]
pub struct JointStep {
    pub point: Vector,
    pub crit_norm: f64,
    pub threshold: f64,
    pub inner_iters: u64,
    pub step_norm: f64,
    /// Stopping scale of the order-q model, `H_qf/(2 q!) s^q`.
    pub resid_q: f64,
    /// Stopping scale of the order-p model, `H_pg/(2 p!) s^p`.
    pub resid_p: f64,
}

/// One joint step `T(x)`: approximately minimizes the joint model with a
/// gradient-norm threshold tightened below both regularizer scales.
pub fn multicomposite_step(
    f: &dyn Oracle,
    g: &dyn Oracle,
    spec: &MultiCompositeSpec,
    h_part: &CompositePart,
    x: &Vector,
    cfg: &SolverConfig,
) -> Result<JointStep> {
    let model = JointModel::new(f, g, *spec, x.clone(), h_part)?;
    let smooth_value = |y: &Vector| model.smooth_value(y);
    let smooth_grad = |y: &Vector| model.smooth_gradient(y);
    let last_threshold = Cell::new(cfg.leaf_abs_tol);
    let mut satisfied = |y: &Vector, crit: f64| -> bool {
        let s = (y - x).norm();
        let mut scale = f64::INFINITY;
        if spec.h_qf > 0.0 {
            scale = scale.min(spec.h_qf / (2.0 * factorial(spec.q)) * s.powi(spec.q as i32));
        }
        if spec.h_pg > 0.0 {
            scale = scale.min(spec.h_pg / (2.0 * factorial(spec.p)) * s.powi(spec.p as i32));
        }
        let threshold = if scale.is_finite() && cfg.loosen_factor > 0.0 {
            (JOINT_TIGHTENING * cfg.loosen_factor * scale).max(cfg.leaf_abs_tol)
        } else {
            cfg.leaf_abs_tol
        };
        last_threshold.set(threshold);
        crit <= threshold
    };
    let descent = ProxDescent {
        smooth_value: &smooth_value,
        smooth_grad: &smooth_grad,
        prox_part: Some(h_part),
        l_init: (spec.h_qf + spec.h_pg).max(1e-6),
        max_iters: cfg.max_leaf_iters,
    };
    let out = descent.run(x.clone(), &mut satisfied)?;
    let s = (&out.point - x).norm();
    Ok(JointStep {
        step_norm: s,
        crit_norm: out.crit_norm,
        threshold: last_threshold.get(),
        inner_iters: out.iterations,
        resid_q: spec.h_qf / (2.0 * factorial(spec.q)) * s.powi(spec.q as i32),
        resid_p: spec.h_pg / (2.0 * factorial(spec.p)) * s.powi(spec.p as i32),
        point: out.point,
    })
}

pub struct MultiOutcome {
    pub records: Vec<TraceRecord>,
    pub iterates: Vec<Vector>,
    pub final_point: Vector,
}

/// Iterates `x_{t+1} = T(x_t)` for `t_iters` steps.
#[allow(clippy::too_many_arguments)]
pub fn run_multicomposite(
    f: &dyn Oracle,
    g: &dyn Oracle,
    spec: &MultiCompositeSpec,
    h_part: &CompositePart,
    x0: &Vector,
    t_iters: u64,
    cfg: &SolverConfig,
    f_star: Option<f64>,
) -> Result<MultiOutcome> {
    let mut x = x0.clone();
    let mut records = Vec::new();
    let mut iterates = vec![x.clone()];
    for t in 0..t_iters {
        let step = multicomposite_step(f, g, spec, h_part, &x, cfg)?;
        x = step.point.clone();
        iterates.push(x.clone());
        let value = f.eval_raw(&x) + g.eval_raw(&x) + h_part.value_raw(&x);
        let grad_norm = (f.grad_raw(&x) + g.grad_raw(&x) + h_part.subgradient_raw(&x)).norm();
        let f_calls = f.counters_opt().map(|c| c.snapshot()).unwrap_or_default();
        let g_calls = g.counters_opt().map(|c| c.snapshot()).unwrap_or_default();
        records.push(TraceRecord {
            iter: t + 1,
            value,
            gap: f_star.map(|fs| value - fs),
            grad_norm,
            step_norm: Some(step.step_norm),
            inner_iters: Some(step.inner_iters),
            n_f: f_calls[spec.q],
            n_g: g_calls[spec.p],
            f_calls,
            g_calls,
            resid_q: Some(step.resid_q),
            resid_p: Some(step.resid_p),
            ..TraceRecord::default()
        });
    }
    Ok(MultiOutcome {
        records,
        iterates,
        final_point: x,
    })
}

/// `E_k = (p+1)^{k+1} / (k+1)!` of the two-term rate bound.
pub fn rate_coefficient(k: usize, p: usize) -> f64 {
    (p as f64 + 1.0).powi(k as i32 + 1) / factorial(k + 1)
}

/// Right side of the mixed-order rate bound after step t:
/// `E_q (H_qf + L_qf) R^{q+1} / (t+p+1)^q + E_p (H_pg + L_pg) R^{p+1} / (t+p+1)^p`.
#[allow(clippy::too_many_arguments)]
pub fn speed_bound(
    t: u64,
    q: usize,
    p: usize,
    h_qf: f64,
    l_qf: f64,
    h_pg: f64,
    l_pg: f64,
    radius: f64,
) -> f64 {
    let denom = t as f64 + p as f64 + 1.0;
    rate_coefficient(q, p) * (h_qf + l_qf) * radius.powi(q as i32 + 1) / denom.powi(q as i32)
        + rate_coefficient(p, p) * (h_pg + l_pg) * radius.powi(p as i32 + 1) / denom.powi(p as i32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::make_quadratic;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn pair(dim: usize) -> (crate::oracle::SmoothOracle, crate::oracle::SmoothOracle) {
        let f = make_quadratic(DMatrix::identity(dim, dim), Vector::zeros(dim)).unwrap();
        let g = make_quadratic(DMatrix::identity(dim, dim) * 2.0, Vector::zeros(dim)).unwrap();
        (f, g)
    }

    #[test]
    fn rate_coefficients_for_first_and_second_order() {
        assert_relative_eq!(rate_coefficient(1, 2), 4.5);
        assert_relative_eq!(rate_coefficient(2, 2), 4.5);
    }

    #[test]
    fn speed_bound_worked_example() {
        // q=1, p=2, H=2L, L=1, R=1, t=10: 4.5*3/13 + 4.5*3/169
        let b = speed_bound(10, 1, 2, 2.0, 1.0, 2.0, 1.0, 1.0);
        assert_relative_eq!(b, 4.5 * 3.0 / 13.0 + 4.5 * 3.0 / 169.0, epsilon = 1e-12);
        assert!((b - 1.1184).abs() < 1e-3);
    }

    #[test]
    fn speed_bound_vanishes_in_the_limit() {
        let b = speed_bound(u64::MAX / 2, 1, 2, 2.0, 1.0, 2.0, 1.0, 1.0);
        assert!(b < 1e-9);
    }

    #[test]
    fn speed_bound_collapses_when_orders_match() {
        // q = p reduces to a single-order bound with both terms scaling as
        // (t+p+1)^{-p}.
        let t = 17;
        let b = speed_bound(t, 2, 2, 2.0, 1.0, 2.0, 1.0, 1.0);
        let denom = (t as f64 + 3.0).powi(2);
        assert_relative_eq!(b, 2.0 * 4.5 * 3.0 / denom, epsilon = 1e-12);
    }

    #[test]
    fn joint_model_value_terms() {
        let (f, g) = pair(3);
        let spec = MultiCompositeSpec::new(&f, &g, 1, 2, 2.0, 1.0).unwrap();
        let h = CompositePart::Zero;
        let x = Vector::from_vec(vec![1.0, -0.5, 0.25]);
        let model = JointModel::new(&f, &g, spec, x.clone(), &h).unwrap();
        // at the center the regularizers vanish
        assert_relative_eq!(
            model.value(&x),
            f.eval_raw(&x) + g.eval_raw(&x),
            epsilon = 1e-12
        );
        // term-wise at another point
        let y = Vector::from_vec(vec![0.2, 0.1, -0.1]);
        let d = (&y - &x).norm();
        let expected = f.eval_raw(&x)
            + f.grad_raw(&x).dot(&(&y - &x))
            + 2.0 / 2.0 * d * d
            + g.eval_raw(&y) // order-2 model of a quadratic is exact
            + 1.0 / 6.0 * d * d * d;
        assert_relative_eq!(model.value(&y), expected, epsilon = 1e-12);
    }

    #[test]
    fn model_upper_bounds_each_function() {
        let (f, g) = pair(3);
        let spec = MultiCompositeSpec::new(&f, &g, 1, 2, 2.0, 1.0).unwrap();
        let h = CompositePart::Zero;
        let x = Vector::from_vec(vec![0.5, 0.5, -0.5]);
        let model = JointModel::new(&f, &g, spec, x, &h).unwrap();
        for y in [
            Vector::from_vec(vec![0.0, 0.0, 0.0]),
            Vector::from_vec(vec![1.0, -1.0, 0.3]),
            Vector::from_vec(vec![-0.2, 0.8, 0.9]),
        ] {
            let fy = f.eval_raw(&y) + g.eval_raw(&y);
            assert!(model.value(&y) >= fy - 1e-10);
        }
    }

    #[test]
    fn fixed_point_at_the_minimizer() {
        let (f, g) = pair(2);
        let spec = MultiCompositeSpec::new(&f, &g, 1, 2, 2.0, 1.0).unwrap();
        let h = CompositePart::Zero;
        let step = multicomposite_step(
            &f,
            &g,
            &spec,
            &h,
            &Vector::zeros(2),
            &SolverConfig::default(),
        )
        .unwrap();
        assert!(step.point.norm() <= 1e-10);
        assert_eq!(step.inner_iters, 0);
    }

    #[test]
    fn spec_guards() {
        let (f, g) = pair(2);
        assert!(MultiCompositeSpec::new(&f, &g, 2, 1, 1.0, 1.0).is_err());
        assert!(MultiCompositeSpec::new(&f, &g, 1, 2, 0.5, 1.0).is_err()); // H_qf < q L_qf = 1
        assert!(MultiCompositeSpec::new(&f, &g, 1, 2, 0.0, 0.0).is_err());
    }

    #[test]
    fn descent_per_step() {
        let (f, g) = pair(4);
        let spec = MultiCompositeSpec::new(&f, &g, 1, 2, 2.0, 1.0).unwrap();
        let h = CompositePart::Zero;
        let x0 = Vector::from_element(4, 0.5);
        let out = run_multicomposite(
            &f,
            &g,
            &spec,
            &h,
            &x0,
            20,
            &SolverConfig::default(),
            Some(0.0),
        )
        .unwrap();
        let mut prev = f.eval_raw(&x0) + g.eval_raw(&x0);
        for rec in &out.records {
            assert!(rec.value <= prev + 1e-12, "ascent at iter {}", rec.iter);
            prev = rec.value;
        }
    }

    #[test]
    fn box_constrained_iteration_stays_feasible_and_descends() {
        let (f, g) = pair(3);
        let spec = MultiCompositeSpec::new(&f, &g, 1, 2, 2.0, 1.0).unwrap();
        // the unconstrained minimizer is the origin; the box keeps the first
        // coordinate away from it
        let h = CompositePart::BoxIndicator {
            lower: Vector::from_vec(vec![0.25, -1.0, -1.0]),
            upper: Vector::from_vec(vec![1.0, 1.0, 1.0]),
        };
        let x0 = Vector::from_vec(vec![0.9, 0.8, -0.7]);
        let out =
            run_multicomposite(&f, &g, &spec, &h, &x0, 30, &SolverConfig::default(), None).unwrap();
        let mut prev = f.eval_raw(&x0) + g.eval_raw(&x0);
        for (rec, x) in out.records.iter().zip(out.iterates.iter().skip(1)) {
            assert!(x[0] >= 0.25 - 1e-12, "left the box at iter {}", rec.iter);
            assert!(rec.value <= prev + 1e-10, "ascent at iter {}", rec.iter);
            prev = rec.value;
        }
        // constrained optimum: first coordinate pinned at the bound, rest free
        let last = out.final_point;
        assert!((last[0] - 0.25).abs() <= 1e-6, "x0 = {}", last[0]);
        assert!(last[1].abs() <= 1e-6 && last[2].abs() <= 1e-6);
    }

    #[test]
    fn single_oracle_call_per_order_per_step() {
        let (f, g) = pair(3);
        let spec = MultiCompositeSpec::new(&f, &g, 1, 2, 2.0, 1.0).unwrap();
        let h = CompositePart::Zero;
        let x0 = Vector::from_element(3, 1.0);
        let t = 7;
        run_multicomposite(&f, &g, &spec, &h, &x0, t, &SolverConfig::default(), None).unwrap();
        assert_eq!(f.counters().count(1), t);
        assert_eq!(g.counters().count(2), t);
    }

    #[test]
    fn step_matches_direct_radial_solve() {
        // q = 1 linear model of f plus exact quadratic g and two regularizers:
        // the optimality system is (A_g + (H_qf + H_pg/2 * tau) I) d = -grad F(x)
        // with tau = ||d||, solvable by a 1-D root find in tau.
        let a_g = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        let f = make_quadratic(DMatrix::identity(2, 2), Vector::zeros(2)).unwrap();
        let g = make_quadratic(a_g.clone(), Vector::zeros(2)).unwrap();
        let spec = MultiCompositeSpec::new(&f, &g, 1, 2, 2.0, 1.0).unwrap();
        let h = CompositePart::Zero;
        let x = Vector::from_vec(vec![1.0, -2.0]);
        let cfg = SolverConfig {
            loosen_factor: 0.0, // near-exact joint solve
            ..SolverConfig::default()
        };
        let step = multicomposite_step(&f, &g, &spec, &h, &x, &cfg).unwrap();

        let grad_total = f.grad_raw(&x) + g.grad_raw(&x);
        let solve_for = |tau: f64| -> Vector {
            let m = &a_g + DMatrix::identity(2, 2) * (spec.h_qf + spec.h_pg / 2.0 * tau);
            m.lu().solve(&(-&grad_total)).unwrap()
        };
        let mut lo = 0.0;
        let mut hi = 10.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if solve_for(mid).norm() > mid {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let d = solve_for(0.5 * (lo + hi));
        let expected = &x + d;
        assert!(
            (&step.point - &expected).norm() <= 1e-8,
            "joint step {:?} vs radial {:?}",
            step.point,
            expected
        );
    }
}
