//! Derivative oracles, Taylor approximations, and per-order call accounting.
//!
//! An oracle serves the value, the gradient, and directional contractions
//! `D^k f(x)[h]^{k-1}` of a smooth convex function up to its declared order.
//! Full derivative tensors are never materialized: every solver in this crate
//! consumes contractions only, which keeps evaluation cost `O(n)` for the
//! structured built-in problems.
//!
//! Call accounting follows the convention that one order-`k` call buys the
//! whole `k`-th derivative at a point: [`FrozenTaylor`] charges the counters
//! once per order at its center and afterwards serves contractions against
//! arbitrary directions for free. Counters tag each call with the active
//! [`CallSite`] so that outer-model and inner-solve work can be separated.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, AtomicU8, Ordering};
use std::sync::Arc;

use crate::error::{Result, SolverError};

pub type Vector = nalgebra::DVector<f64>;

/// Highest derivative order served by any oracle in this crate.
pub const MAX_ORDER: usize = 3;

/// Absolute slack added to remainder-bound checks to absorb floating-point
/// rounding when the exact bound is zero (polynomials of degree <= p).
pub const REMAINDER_SLACK: f64 = 1e-12;

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Where an oracle call was issued from. Solvers switch the active site so
/// tests can assert which phase of a nested run consumed which derivatives.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum CallSite {
    Main = 0,
    OuterModel = 1,
    InnerSolve = 2,
}

impl CallSite {
    fn index(self) -> usize {
        self as usize
    }
}

/// Per-order, per-site call counts for one oracle instance.
///
/// Counts only grow; `reset` is the single explicit way to clear them
/// between runs. All updates are atomic so oracle handles stay `Sync`.
#[derive(Debug, Default)]
pub struct OracleCounters {
    counts: [[AtomicU64; 3]; MAX_ORDER + 1],
    site: AtomicU8,
}

impl OracleCounters {
    pub fn record(&self, order: usize) {
        let site = self.site.load(Ordering::Relaxed) as usize;
        self.counts[order][site].fetch_add(1, Ordering::Relaxed);
    }

    pub fn set_site(&self, site: CallSite) {
        self.site.store(site as u8, Ordering::Relaxed);
    }

    pub fn current_site(&self) -> CallSite {
        match self.site.load(Ordering::Relaxed) {
            1 => CallSite::OuterModel,
            2 => CallSite::InnerSolve,
            _ => CallSite::Main,
        }
    }

    /// Total calls of the given order across all sites.
    pub fn count(&self, order: usize) -> u64 {
        self.counts[order]
            .iter()
            .map(|c| c.load(Ordering::Relaxed))
            .sum()
    }

    pub fn count_at(&self, order: usize, site: CallSite) -> u64 {
        self.counts[order][site.index()].load(Ordering::Relaxed)
    }

    pub fn snapshot(&self) -> [u64; MAX_ORDER + 1] {
        let mut out = [0; MAX_ORDER + 1];
        for (k, slot) in out.iter_mut().enumerate() {
            *slot = self.count(k);
        }
        out
    }

    pub fn reset(&self) {
        for row in &self.counts {
            for c in row {
                c.store(0, Ordering::Relaxed);
            }
        }
        self.site.store(0, Ordering::Relaxed);
    }
}

/// The mathematical content of a smooth function: value, gradient, and
/// directional contractions `D^k f(x)[h]^{k-1}`. No accounting here.
pub trait SmoothObjective: Send + Sync {
    fn dim(&self) -> usize;
    /// Highest derivative order implemented.
    fn order(&self) -> usize;
    fn value(&self, x: &Vector) -> f64;
    fn gradient(&self, x: &Vector) -> Vector;
    /// `D^k f(x)[h]^{k-1}` for `1 <= k <= order`. For `k = 1` this is the
    /// gradient, independent of `h`.
    fn contraction(&self, x: &Vector, h: &Vector, k: usize) -> Vector;
}

/// What solvers consume: raw (uncounted) evaluation plus a `record` hook for
/// accounting, with counted-and-validated wrappers provided on top.
///
/// The raw methods exist for instrumentation (trace rows, audits, remainder
/// checks) and for [`FrozenTaylor`], which pays for a center once and then
/// evaluates freely. Production solver paths go through the counted methods.
pub trait Oracle: Send + Sync {
    fn label(&self) -> &str;
    fn dim(&self) -> usize;
    fn order(&self) -> usize;
    /// Declared Lipschitz constant of the k-th derivative, if certified.
    fn lipschitz(&self, k: usize) -> Option<f64>;
    /// Marks the identically-zero function; lets solvers skip its oracle.
    fn is_zero(&self) -> bool {
        false
    }
    fn record(&self, order: usize);
    /// Counter access for trace building, when this oracle owns counters.
    fn counters_opt(&self) -> Option<&OracleCounters> {
        None
    }

    fn eval_raw(&self, x: &Vector) -> f64;
    fn grad_raw(&self, x: &Vector) -> Vector;
    fn contract_raw(&self, x: &Vector, h: &Vector, k: usize) -> Vector;

    fn check_point(&self, x: &Vector) -> Result<()> {
        if x.len() != self.dim() {
            return Err(SolverError::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(SolverError::NonFinite {
                what: format!("input point for {}", self.label()),
            });
        }
        Ok(())
    }

    /// f(x), counted at order 0.
    fn value(&self, x: &Vector) -> Result<f64> {
        self.check_point(x)?;
        self.record(0);
        let v = self.eval_raw(x);
        if !v.is_finite() {
            return Err(SolverError::NonFinite {
                what: format!("value of {}", self.label()),
            });
        }
        Ok(v)
    }

    /// grad f(x), counted at order 1.
    fn gradient(&self, x: &Vector) -> Result<Vector> {
        self.check_point(x)?;
        self.record(1);
        let g = self.grad_raw(x);
        if !g.iter().all(|v| v.is_finite()) {
            return Err(SolverError::NonFinite {
                what: format!("gradient of {}", self.label()),
            });
        }
        Ok(g)
    }

    /// `D^k f(x)[h]^{k-1}`, counted at order k.
    fn contraction(&self, x: &Vector, h: &Vector, k: usize) -> Result<Vector> {
        if k < 1 || k > self.order() {
            return Err(SolverError::UnsupportedOrder {
                requested: k,
                max: self.order(),
            });
        }
        self.check_point(x)?;
        self.check_point(h)?;
        self.record(k);
        let c = self.contract_raw(x, h, k);
        if !c.iter().all(|v| v.is_finite()) {
            return Err(SolverError::NonFinite {
                what: format!("order-{k} contraction of {}", self.label()),
            });
        }
        Ok(c)
    }
}

/// A labeled smooth function with counters and Lipschitz metadata.
pub struct SmoothOracle {
    label: String,
    objective: Arc<dyn SmoothObjective>,
    lipschitz: BTreeMap<usize, f64>,
    counters: OracleCounters,
    uniform_convexity: Option<(u32, f64)>,
    zero: bool,
}

impl SmoothOracle {
    pub fn new(
        label: impl Into<String>,
        objective: Arc<dyn SmoothObjective>,
        lipschitz: BTreeMap<usize, f64>,
    ) -> Self {
        Self {
            label: label.into(),
            objective,
            lipschitz,
            counters: OracleCounters::default(),
            uniform_convexity: None,
            zero: false,
        }
    }

    pub fn with_uniform_convexity(mut self, r: u32, sigma: f64) -> Self {
        self.uniform_convexity = Some((r, sigma));
        self
    }

    pub(crate) fn mark_zero(mut self) -> Self {
        self.zero = true;
        self
    }

    pub fn counters(&self) -> &OracleCounters {
        &self.counters
    }

    /// Declared (r, sigma_r) uniform-convexity metadata, if any.
    pub fn uniform_convexity(&self) -> Option<(u32, f64)> {
        self.uniform_convexity
    }
}

impl Oracle for SmoothOracle {
    fn label(&self) -> &str {
        &self.label
    }

    fn dim(&self) -> usize {
        self.objective.dim()
    }

    fn order(&self) -> usize {
        self.objective.order()
    }

    fn lipschitz(&self, k: usize) -> Option<f64> {
        self.lipschitz.get(&k).copied()
    }

    fn is_zero(&self) -> bool {
        self.zero
    }

    fn record(&self, order: usize) {
        self.counters.record(order);
    }

    fn counters_opt(&self) -> Option<&OracleCounters> {
        Some(&self.counters)
    }

    fn eval_raw(&self, x: &Vector) -> f64 {
        self.objective.value(x)
    }

    fn grad_raw(&self, x: &Vector) -> Vector {
        self.objective.gradient(x)
    }

    fn contract_raw(&self, x: &Vector, h: &Vector, k: usize) -> Vector {
        self.objective.contraction(x, h, k)
    }
}

/// How a [`FrozenTaylor`] charges the counters at construction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Charge {
    /// Orders 0..=p, one call each: a full model construction.
    Full,
    /// Orders 1..=p only.
    GradientOnly,
    /// No charge; instrumentation use.
    None,
}

/// Derivatives of `f` frozen at a center point.
///
/// Construction pays the oracle once per requested order; afterwards the
/// Taylor value, gradient, and Hessian action of
/// `Omega_p(f, center; y) = f(center) + sum_{k<=p} D^k f(center)[y-center]^k / k!`
/// can be evaluated at arbitrary `y` without further charges.
pub struct FrozenTaylor<'a> {
    oracle: &'a dyn Oracle,
    center: Vector,
    p: usize,
    f_center: f64,
}

impl<'a> FrozenTaylor<'a> {
    pub fn new(oracle: &'a dyn Oracle, center: Vector, p: usize, charge: Charge) -> Result<Self> {
        if p < 1 || p > oracle.order() {
            return Err(SolverError::UnsupportedOrder {
                requested: p,
                max: oracle.order(),
            });
        }
        oracle.check_point(&center)?;
        match charge {
            Charge::Full => {
                for k in 0..=p {
                    oracle.record(k);
                }
            }
            Charge::GradientOnly => {
                for k in 1..=p {
                    oracle.record(k);
                }
            }
            Charge::None => {}
        }
        let f_center = oracle.eval_raw(&center);
        if !f_center.is_finite() {
            return Err(SolverError::NonFinite {
                what: format!("value of {} at model center", oracle.label()),
            });
        }
        Ok(Self {
            oracle,
            center,
            p,
            f_center,
        })
    }

    pub fn center(&self) -> &Vector {
        &self.center
    }

    pub fn order(&self) -> usize {
        self.p
    }

    pub fn value_at_center(&self) -> f64 {
        self.f_center
    }

    pub fn oracle(&self) -> &'a dyn Oracle {
        self.oracle
    }

    /// `Omega_p(f, center; y)`.
    pub fn omega_value(&self, y: &Vector) -> f64 {
        let d = y - &self.center;
        let mut v = self.f_center;
        for k in 1..=self.p {
            let c = self.oracle.contract_raw(&self.center, &d, k);
            v += c.dot(&d) / factorial(k);
        }
        v
    }

    /// `grad_y Omega_p(f, center; y) = sum_k D^k f(center)[y-center]^{k-1} / (k-1)!`.
    pub fn omega_gradient(&self, y: &Vector) -> Vector {
        let d = y - &self.center;
        let mut g = self.oracle.grad_raw(&self.center);
        for k in 2..=self.p {
            let c = self.oracle.contract_raw(&self.center, &d, k);
            g += c / factorial(k - 1);
        }
        g
    }

    /// Action of the Hessian of `Omega_p` at `y` on a direction `h`.
    ///
    /// For `p = 3` the mixed contraction `D^3 f [d][h]` is recovered from
    /// single-direction queries by polarization.
    pub fn omega_hessian_vec(&self, y: &Vector, h: &Vector) -> Vector {
        if self.p < 2 {
            return Vector::zeros(self.center.len());
        }
        let mut out = self.oracle.contract_raw(&self.center, h, 2);
        if self.p >= 3 {
            let d = y - &self.center;
            out += self.mixed_third(&d, h);
        }
        out
    }

    /// `D^3 f(center)[h]^2`; constant in `y`.
    pub fn omega_third_vec(&self, h: &Vector) -> Vector {
        if self.p < 3 {
            return Vector::zeros(self.center.len());
        }
        self.oracle.contract_raw(&self.center, h, 3)
    }

    /// `D^3 f(center)[u][h]` via `T[u][h] = (T[u+h]^2 - T[u]^2 - T[h]^2) / 2`.
    fn mixed_third(&self, u: &Vector, h: &Vector) -> Vector {
        let s = u + h;
        let t_s = self.oracle.contract_raw(&self.center, &s, 3);
        let t_u = self.oracle.contract_raw(&self.center, u, 3);
        let t_h = self.oracle.contract_raw(&self.center, h, 3);
        (t_s - t_u - t_h) * 0.5
    }
}

/// Taylor approximation `Omega_p(f, x; y)`, charging orders `0..=p`.
pub fn taylor_value(oracle: &dyn Oracle, x: &Vector, y: &Vector, p: usize) -> Result<f64> {
    let frozen = FrozenTaylor::new(oracle, x.clone(), p, Charge::Full)?;
    oracle.check_point(y)?;
    Ok(frozen.omega_value(y))
}

/// Gradient in `y` of the Taylor approximation, charging orders `1..=p`.
pub fn taylor_gradient(oracle: &dyn Oracle, x: &Vector, y: &Vector, p: usize) -> Result<Vector> {
    let frozen = FrozenTaylor::new(oracle, x.clone(), p, Charge::GradientOnly)?;
    oracle.check_point(y)?;
    Ok(frozen.omega_gradient(y))
}

#[derive(Clone, Copy, Debug)]
pub struct RemainderCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub ok: bool,
}

/// Checks `|f(y) - Omega_p(f, x; y)| <= L_p / (p+1)! * ||y - x||^{p+1}`.
///
/// Uses raw evaluation so instrumentation does not disturb the counters.
/// A small absolute slack absorbs rounding when the bound is exactly zero.
pub fn remainder_check(
    oracle: &dyn Oracle,
    x: &Vector,
    y: &Vector,
    p: usize,
) -> Result<RemainderCheck> {
    let l_p = oracle.lipschitz(p).ok_or_else(|| {
        SolverError::InvalidArgument(format!(
            "{} declares no Lipschitz constant at order {p}",
            oracle.label()
        ))
    })?;
    let frozen = FrozenTaylor::new(oracle, x.clone(), p, Charge::None)?;
    oracle.check_point(y)?;
    let fy = oracle.eval_raw(y);
    let lhs = (fy - frozen.omega_value(y)).abs();
    let rhs = l_p / factorial(p + 1) * (y - x).norm().powi(p as i32 + 1);
    let ok = lhs <= rhs * (1.0 + 1e-9) + REMAINDER_SLACK * fy.abs().max(1.0);
    Ok(RemainderCheck { lhs, rhs, ok })
}
