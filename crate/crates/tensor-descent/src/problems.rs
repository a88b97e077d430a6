//! Built-in test problems with closed-form derivatives, certified Lipschitz
//! constants, known minimizers, and constructors for controlled-ratio
//! splitting experiments.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::composite::CompositePart;
use crate::error::{Result, SolverError};
use crate::oracle::{factorial, Oracle, SmoothObjective, SmoothOracle, Vector};

// --- power norms -----------------------------------------------------------
//
// f_r(x) = ||x||^r / r, r >= 2, with sigma_r = 2^{2-r} uniform convexity of
// degree r. Derivative formulas below are exact; the guards keep them finite
// at the origin where positive powers of ||x|| vanish.

pub(crate) fn power_value(r: u32, d: &Vector) -> f64 {
    let rho = d.norm();
    rho.powi(r as i32) / r as f64
}

pub(crate) fn power_grad(r: u32, d: &Vector) -> Vector {
    if r == 2 {
        return d.clone();
    }
    let rho = d.norm();
    if rho == 0.0 {
        return Vector::zeros(d.len());
    }
    d * rho.powi(r as i32 - 2)
}

/// `D^2 f_r(d)[h]`
pub(crate) fn power_d2(r: u32, d: &Vector, h: &Vector) -> Vector {
    if r == 2 {
        return h.clone();
    }
    let rho = d.norm();
    if rho == 0.0 {
        return Vector::zeros(d.len());
    }
    let scale = rho.powi(r as i32 - 2);
    let coef = (r as f64 - 2.0) * d.dot(h) / (rho * rho);
    (h + d * coef) * scale
}

/// `D^3 f_r(d)[h]^2`
pub(crate) fn power_d3(r: u32, d: &Vector, h: &Vector) -> Vector {
    if r == 2 {
        return Vector::zeros(d.len());
    }
    let rho = d.norm();
    if rho == 0.0 {
        return Vector::zeros(d.len());
    }
    let dh = d.dot(h);
    let coef_d = h.norm_squared() + (r as f64 - 4.0) * dh * dh / (rho * rho);
    let out = h * (2.0 * dh) + d * coef_d;
    out * ((r as f64 - 2.0) * rho.powi(r as i32 - 4))
}

struct PowerNorm {
    r: u32,
    dim: usize,
}

impl SmoothObjective for PowerNorm {
    fn dim(&self) -> usize {
        self.dim
    }

    fn order(&self) -> usize {
        // r = 2 is a polynomial with vanishing third derivative; r = 3 has a
        // Lipschitz Hessian but no third derivative at the origin.
        match self.r {
            2 => 3,
            3 => 2,
            _ => 3,
        }
    }

    fn value(&self, x: &Vector) -> f64 {
        power_value(self.r, x)
    }

    fn gradient(&self, x: &Vector) -> Vector {
        power_grad(self.r, x)
    }

    fn contraction(&self, x: &Vector, h: &Vector, k: usize) -> Vector {
        match k {
            1 => power_grad(self.r, x),
            2 => power_d2(self.r, x, h),
            _ => power_d3(self.r, x, h),
        }
    }
}

/// `f_r(x) = ||x||^r / r`, uniformly convex of degree r with
/// `sigma_r = 2^{2-r}`.
pub fn make_power_norm(r: u32, dim: usize) -> Result<SmoothOracle> {
    if r < 2 {
        return Err(SolverError::InvalidArgument(format!(
            "power norm degree must be >= 2, got {r}"
        )));
    }
    if dim == 0 {
        return Err(SolverError::InvalidArgument(
            "dimension must be positive".into(),
        ));
    }
    let mut lipschitz = BTreeMap::new();
    match r {
        2 => {
            lipschitz.insert(1, 1.0);
            lipschitz.insert(2, 0.0);
            lipschitz.insert(3, 0.0);
        }
        3 => {
            lipschitz.insert(2, 2.0);
        }
        4 => {
            lipschitz.insert(3, 6.0);
        }
        // Higher degrees have no global Lipschitz constants to certify.
        _ => {}
    }
    let sigma = 2f64.powi(2 - r as i32);
    Ok(SmoothOracle::new(
        format!("power{r}"),
        Arc::new(PowerNorm { r, dim }),
        lipschitz,
    )
    .with_uniform_convexity(r, sigma))
}

// --- quadratics -------------------------------------------------------------

struct Quadratic {
    a: DMatrix<f64>,
    b: Vector,
}

impl SmoothObjective for Quadratic {
    fn dim(&self) -> usize {
        self.b.len()
    }

    fn order(&self) -> usize {
        3
    }

    fn value(&self, x: &Vector) -> f64 {
        0.5 * (&self.a * x).dot(x) - self.b.dot(x)
    }

    fn gradient(&self, x: &Vector) -> Vector {
        &self.a * x - &self.b
    }

    fn contraction(&self, x: &Vector, h: &Vector, k: usize) -> Vector {
        match k {
            1 => self.gradient(x),
            2 => &self.a * h,
            _ => Vector::zeros(self.b.len()),
        }
    }
}

/// `f(x) = <Ax, x>/2 - <b, x>` for symmetric positive semidefinite `A`.
pub fn make_quadratic(a: DMatrix<f64>, b: Vector) -> Result<SmoothOracle> {
    if a.nrows() != a.ncols() || a.nrows() != b.len() {
        return Err(SolverError::InvalidArgument(
            "quadratic matrix/vector dimensions disagree".into(),
        ));
    }
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    for i in 0..a.nrows() {
        for j in (i + 1)..a.ncols() {
            if (a[(i, j)] - a[(j, i)]).abs() > 1e-12 * scale {
                return Err(SolverError::InvalidArgument(
                    "quadratic matrix must be symmetric".into(),
                ));
            }
        }
    }
    let eigen = a.clone().symmetric_eigen();
    let lambda_max = eigen.eigenvalues.iter().fold(0.0f64, |m, v| m.max(*v));
    let lambda_min = eigen
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |m, v| m.min(*v));
    if lambda_min < -1e-9 * lambda_max.max(1.0) {
        return Err(SolverError::InvalidArgument(
            "quadratic matrix must be positive semidefinite".into(),
        ));
    }
    let mut lipschitz = BTreeMap::new();
    lipschitz.insert(1, lambda_max);
    lipschitz.insert(2, 0.0);
    lipschitz.insert(3, 0.0);
    Ok(SmoothOracle::new(
        "quadratic",
        Arc::new(Quadratic { a, b }),
        lipschitz,
    ))
}

/// Solves `Ax = b` for positive definite `A`.
pub fn quadratic_minimizer(a: &DMatrix<f64>, b: &Vector) -> Option<Vector> {
    a.clone().cholesky().map(|ch| ch.solve(b))
}

// --- logistic loss ----------------------------------------------------------

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn log1p_exp(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

struct Logistic {
    rows: Vec<Vector>,
    labels: Vec<f64>,
    dim: usize,
}

impl Logistic {
    fn margins(&self, x: &Vector) -> Vec<f64> {
        self.rows
            .iter()
            .zip(&self.labels)
            .map(|(a, y)| y * a.dot(x))
            .collect()
    }
}

impl SmoothObjective for Logistic {
    fn dim(&self) -> usize {
        self.dim
    }

    fn order(&self) -> usize {
        3
    }

    fn value(&self, x: &Vector) -> f64 {
        self.margins(x).into_iter().map(|z| log1p_exp(-z)).sum()
    }

    fn gradient(&self, x: &Vector) -> Vector {
        let mut g = Vector::zeros(self.dim);
        for ((a, y), z) in self.rows.iter().zip(&self.labels).zip(self.margins(x)) {
            g += a * ((sigmoid(z) - 1.0) * y);
        }
        g
    }

    fn contraction(&self, x: &Vector, h: &Vector, k: usize) -> Vector {
        match k {
            1 => self.gradient(x),
            2 => {
                let mut out = Vector::zeros(self.dim);
                for (a, z) in self.rows.iter().zip(self.margins(x)) {
                    let s = sigmoid(z);
                    out += a * (s * (1.0 - s) * a.dot(h));
                }
                out
            }
            _ => {
                let mut out = Vector::zeros(self.dim);
                for ((a, y), z) in self.rows.iter().zip(&self.labels).zip(self.margins(x)) {
                    let s = sigmoid(z);
                    let ah = a.dot(h);
                    out += a * (s * (1.0 - s) * (1.0 - 2.0 * s) * y * ah * ah);
                }
                out
            }
        }
    }
}

/// Logistic loss `sum_i ln(1 + exp(-y_i <a_i, x>))` with Lipschitz constants
/// derived from the data norms:
/// `L_1 = lambda_max(sum a a^T)/4`, `L_2 = sum ||a||^3 / (6 sqrt 3)`,
/// `L_3 = sum ||a||^4 / 8`.
pub fn make_logistic(data: DMatrix<f64>, labels: Vec<f64>) -> Result<SmoothOracle> {
    if data.nrows() == 0 {
        return Err(SolverError::InvalidArgument(
            "logistic data is empty".into(),
        ));
    }
    if data.nrows() != labels.len() {
        return Err(SolverError::InvalidArgument(
            "logistic labels do not match the data rows".into(),
        ));
    }
    if !labels.iter().all(|y| *y == 1.0 || *y == -1.0) {
        return Err(SolverError::InvalidArgument(
            "logistic labels must be +1 or -1".into(),
        ));
    }
    let dim = data.ncols();
    let rows: Vec<Vector> = (0..data.nrows()).map(|i| data.row(i).transpose()).collect();
    let mut gram = DMatrix::zeros(dim, dim);
    for a in &rows {
        gram += a * a.transpose();
    }
    let lambda_max = gram
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(0.0f64, |m, v| m.max(*v));
    let sum3: f64 = rows.iter().map(|a| a.norm().powi(3)).sum();
    let sum4: f64 = rows.iter().map(|a| a.norm().powi(4)).sum();
    let mut lipschitz = BTreeMap::new();
    lipschitz.insert(1, lambda_max / 4.0);
    lipschitz.insert(2, sum3 / (6.0 * 3f64.sqrt()));
    lipschitz.insert(3, sum4 / 8.0);
    Ok(SmoothOracle::new(
        "logistic",
        Arc::new(Logistic { rows, labels, dim }),
        lipschitz,
    ))
}

// --- helpers ----------------------------------------------------------------

struct ZeroObjective {
    dim: usize,
}

impl SmoothObjective for ZeroObjective {
    fn dim(&self) -> usize {
        self.dim
    }

    fn order(&self) -> usize {
        3
    }

    fn value(&self, _x: &Vector) -> f64 {
        0.0
    }

    fn gradient(&self, _x: &Vector) -> Vector {
        Vector::zeros(self.dim)
    }

    fn contraction(&self, _x: &Vector, _h: &Vector, _k: usize) -> Vector {
        Vector::zeros(self.dim)
    }
}

/// The identically-zero function; used as a degenerate composite.
pub fn make_zero(dim: usize) -> SmoothOracle {
    let mut lipschitz = BTreeMap::new();
    for k in 1..=3 {
        lipschitz.insert(k, 0.0);
    }
    SmoothOracle::new("zero", Arc::new(ZeroObjective { dim }), lipschitz).mark_zero()
}

/// `coeff * base(x - shift)`.
struct Scaled {
    base: Arc<dyn SmoothObjective>,
    coeff: f64,
    shift: Vector,
}

impl SmoothObjective for Scaled {
    fn dim(&self) -> usize {
        self.shift.len()
    }

    fn order(&self) -> usize {
        self.base.order()
    }

    fn value(&self, x: &Vector) -> f64 {
        self.coeff * self.base.value(&(x - &self.shift))
    }

    fn gradient(&self, x: &Vector) -> Vector {
        self.base.gradient(&(x - &self.shift)) * self.coeff
    }

    fn contraction(&self, x: &Vector, h: &Vector, k: usize) -> Vector {
        self.base.contraction(&(x - &self.shift), h, k) * self.coeff
    }
}

// --- problem instances -------------------------------------------------------

/// The `g` term of an instance: absent, a full derivative oracle, or a
/// prox-friendly composite.
#[derive(Clone)]
pub enum GPart {
    None,
    Smooth(Arc<SmoothOracle>),
    Composite(CompositePart),
}

pub struct ProblemInstance {
    pub key: String,
    pub f: Arc<SmoothOracle>,
    pub g: GPart,
    pub h: Option<CompositePart>,
    pub known_minimizer: Option<Vector>,
    pub known_min_value: Option<f64>,
    /// Declared (r, sigma_r) for the full objective F.
    pub uniform_convexity: Option<(u32, f64)>,
    /// Deterministic start point used by the harness.
    pub start: Vector,
}

impl ProblemInstance {
    pub fn dim(&self) -> usize {
        self.f.dim()
    }

    /// F(x) without touching any counter.
    pub fn objective_value(&self, x: &Vector) -> f64 {
        let mut v = self.f.eval_raw(x);
        match &self.g {
            GPart::None => {}
            GPart::Smooth(o) => v += o.eval_raw(x),
            GPart::Composite(c) => v += c.value_raw(x),
        }
        if let Some(h) = &self.h {
            v += h.value_raw(x);
        }
        v
    }

    /// A subgradient of F, uncounted.
    pub fn objective_gradient(&self, x: &Vector) -> Vector {
        let mut g = self.f.grad_raw(x);
        match &self.g {
            GPart::None => {}
            GPart::Smooth(o) => g += o.grad_raw(x),
            GPart::Composite(c) => g += c.subgradient_raw(x),
        }
        if let Some(h) = &self.h {
            g += h.subgradient_raw(x);
        }
        g
    }

    pub fn gap(&self, x: &Vector) -> Option<f64> {
        self.known_min_value.map(|fs| self.objective_value(x) - fs)
    }

    /// The `g` term as a composite part for the envelope solvers.
    pub fn composite_for_solver(&self) -> CompositePart {
        match &self.g {
            GPart::None => CompositePart::Zero,
            GPart::Smooth(o) => CompositePart::Smooth(o.clone()),
            GPart::Composite(c) => c.clone(),
        }
    }

    pub fn smooth_g(&self) -> Option<&Arc<SmoothOracle>> {
        match &self.g {
            GPart::Smooth(o) => Some(o),
            _ => None,
        }
    }

    pub fn reset_counters(&self) {
        self.f.counters().reset();
        if let GPart::Smooth(o) = &self.g {
            o.counters().reset();
        }
    }
}

fn unit_ones(dim: usize) -> Vector {
    Vector::from_element(dim, 1.0 / (dim as f64).sqrt())
}

/// Builds `F = f + g` where `f = ||x||^{p+1}/(p+1)! ...` and `g` is the same
/// power norm centered at a unit vector, scaled so the order-`p` Lipschitz
/// constants are exactly 1 and `kappa`.
///
/// With `f` centered at the origin and `g` at `c` (`||c|| = 1`), the
/// gradients balance on the segment between the centers: with
/// `t = kappa^{1/(r-1)} / (1 + kappa^{1/(r-1)})` the minimizer is `t c` in
/// closed form. `F` is `(p+1)`-uniformly convex; the declared `sigma_{p+1}`
/// carries only the `f` share, which keeps restart schedules independent of
/// `kappa`.
pub fn make_splitting_pair(p: usize, kappa: f64, dim: usize) -> Result<ProblemInstance> {
    if !(1..=3).contains(&p) {
        return Err(SolverError::InvalidArgument(format!(
            "splitting pair supports orders 1..=3, got {p}"
        )));
    }
    if kappa <= 1.0 {
        return Err(SolverError::InvalidArgument(format!(
            "kappa must exceed 1, got {kappa}"
        )));
    }
    let r = (p + 1) as u32;
    // L_p(||x||^r / r) = p!, so 1/p! normalizes f's constant to 1.
    let alpha = 1.0 / factorial(p);
    let beta = kappa / factorial(p);
    let g_center = unit_ones(dim);
    let sigma_scale = 2f64.powi(2 - r as i32);

    let make_part = |label: &str, coeff: f64, l_p: f64, shift: Vector| -> SmoothOracle {
        let obj = Scaled {
            base: Arc::new(PowerNorm { r, dim }),
            coeff,
            shift,
        };
        let mut lip = BTreeMap::new();
        lip.insert(p, l_p);
        SmoothOracle::new(label, Arc::new(obj), lip).with_uniform_convexity(r, coeff * sigma_scale)
    };

    let f = make_part("split-f", alpha, 1.0, Vector::zeros(dim));
    let g = make_part("split-g", beta, kappa, g_center.clone());
    // alpha t^{r-1} = beta (1-t)^{r-1} balances the two gradients at t c.
    let ratio = kappa.powf(1.0 / (r as f64 - 1.0));
    let t = ratio / (1.0 + ratio);
    let minimizer = &g_center * t;
    let min_value =
        alpha * t.powi(r as i32) / r as f64 + beta * (1.0 - t).powi(r as i32) / r as f64;
    Ok(ProblemInstance {
        key: format!("split-p{p}-k{kappa}-n{dim}"),
        f: Arc::new(f),
        g: GPart::Smooth(Arc::new(g)),
        h: None,
        known_minimizer: Some(minimizer),
        known_min_value: Some(min_value),
        uniform_convexity: Some((r, alpha * sigma_scale)),
        start: Vector::zeros(dim),
    })
}

fn logistic_instance(dim: usize, samples: usize, seed: u64) -> Result<ProblemInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x51_1066);
    let scale = 1.0 / (dim as f64).sqrt();
    let data = DMatrix::from_fn(samples, dim, |_, _| rng.gen_range(-1.0..1.0) * scale);
    let w: Vector = Vector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0));
    let labels: Vec<f64> = (0..samples)
        .map(|i| {
            let margin = data.row(i).transpose().dot(&w);
            if margin >= 0.0 {
                1.0
            } else {
                -1.0
            }
        })
        .collect();
    let f = make_logistic(data, labels)?;
    Ok(ProblemInstance {
        key: format!("logistic-n{dim}-m{samples}"),
        f: Arc::new(f),
        g: GPart::None,
        h: None,
        known_minimizer: None,
        known_min_value: None,
        uniform_convexity: None,
        start: Vector::zeros(dim),
    })
}

/// Instances addressable by string key from the CLI:
/// `power{r}-n{dim}`, `quad-n{dim}`, `quad-i-n{dim}`,
/// `logistic-n{dim}-m{samples}`, `split-p{p}-k{kappa}-n{dim}`.
pub fn instance_by_key(key: &str, seed: u64) -> Result<ProblemInstance> {
    let bad = || SolverError::InvalidArgument(format!("unknown problem key `{key}`"));
    let parts: Vec<&str> = key.split('-').collect();
    let num = |s: &str, prefix: &str| -> Result<usize> {
        s.strip_prefix(prefix)
            .and_then(|t| t.parse::<usize>().ok())
            .ok_or_else(bad)
    };
    match parts.as_slice() {
        [p0, n] if p0.starts_with("power") => {
            let r = num(p0, "power")? as u32;
            let dim = num(n, "n")?;
            let f = make_power_norm(r, dim)?;
            let uc = f.uniform_convexity();
            Ok(ProblemInstance {
                key: key.to_string(),
                f: Arc::new(f),
                g: GPart::None,
                h: None,
                known_minimizer: Some(Vector::zeros(dim)),
                known_min_value: Some(0.0),
                uniform_convexity: uc,
                start: unit_ones(dim),
            })
        }
        ["quad", n] => {
            let dim = num(n, "n")?;
            let a = DMatrix::from_fn(dim, dim, |i, j| if i == j { (i + 1) as f64 } else { 0.0 });
            let x_star = unit_ones(dim);
            let b = &a * &x_star;
            let min_value = 0.5 * (&a * &x_star).dot(&x_star) - b.dot(&x_star);
            let f = make_quadratic(a, b)?;
            Ok(ProblemInstance {
                key: key.to_string(),
                f: Arc::new(f),
                g: GPart::None,
                h: None,
                known_minimizer: Some(x_star),
                known_min_value: Some(min_value),
                uniform_convexity: Some((2, 1.0)),
                start: Vector::zeros(dim),
            })
        }
        ["quad", "i", n] => {
            let dim = num(n, "n")?;
            let f = make_quadratic(DMatrix::identity(dim, dim), Vector::zeros(dim))?;
            Ok(ProblemInstance {
                key: key.to_string(),
                f: Arc::new(f),
                g: GPart::None,
                h: None,
                known_minimizer: Some(Vector::zeros(dim)),
                known_min_value: Some(0.0),
                uniform_convexity: Some((2, 1.0)),
                start: unit_ones(dim),
            })
        }
        ["logistic", n, m] => logistic_instance(num(n, "n")?, num(m, "m")?, seed),
        ["mcquad", n] => {
            // Quadratic pair for the mixed-order method: f = ||x||^2/2 used
            // through its first-order model, g = ||x||^2 through its exact
            // second-order model.
            let dim = num(n, "n")?;
            let f = make_quadratic(DMatrix::identity(dim, dim), Vector::zeros(dim))?;
            let g = make_quadratic(DMatrix::identity(dim, dim) * 2.0, Vector::zeros(dim))?;
            Ok(ProblemInstance {
                key: key.to_string(),
                f: Arc::new(f),
                g: GPart::Smooth(Arc::new(g)),
                h: None,
                known_minimizer: Some(Vector::zeros(dim)),
                known_min_value: Some(0.0),
                uniform_convexity: Some((2, 3.0)),
                start: unit_ones(dim),
            })
        }
        [s0, p, k, n] if *s0 == "split" => {
            let order = num(p, "p")?;
            let kappa = num(k, "k")? as f64;
            let dim = num(n, "n")?;
            make_splitting_pair(order, kappa, dim)
        }
        _ => Err(bad()),
    }
}

/// Every built-in oracle, for the derivative and remainder check suites.
pub fn builtin_oracles(seed: u64) -> Vec<Arc<SmoothOracle>> {
    let mut out: Vec<Arc<SmoothOracle>> = Vec::new();
    for r in [2u32, 3, 4] {
        out.push(Arc::new(make_power_norm(r, 6).unwrap()));
    }
    let quad = instance_by_key("quad-n6", seed).unwrap();
    out.push(quad.f.clone());
    let quad_i = instance_by_key("quad-i-n6", seed).unwrap();
    out.push(quad_i.f.clone());
    let logistic = instance_by_key("logistic-n5-m12", seed).unwrap();
    out.push(logistic.f.clone());
    for p in [1usize, 2, 3] {
        let inst = make_splitting_pair(p, 10.0, 5).unwrap();
        out.push(inst.f.clone());
        if let GPart::Smooth(g) = inst.g {
            out.push(g);
        }
    }
    out
}
