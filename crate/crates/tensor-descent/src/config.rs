//! Solver configuration: tolerances, iteration caps, and step-size search
//! parameters shared by the envelope solvers.

/// Engine used to solve one regularized Taylor subproblem.
#[derive(Clone, Copy, Debug)]
pub enum InnerEngine {
    /// Accelerated proximal first-order descent with backtracking.
    FirstOrder,
    /// A restarted tensor run on the subproblem treated as a smooth
    /// `(p+1)`-uniformly convex function. Used by the combination framework.
    Tensor {
        /// Smoothness constant assigned to the subproblem objective.
        l_inner: f64,
        /// Its uniform-convexity constant of degree p+1.
        sigma_inner: f64,
        /// Regularization coefficient for the inner run's own subproblems.
        h_inner: f64,
    },
}

#[derive(Clone, Debug)]
pub struct SolverConfig {
    /// Iteration cap for the first-order leaf solver.
    pub max_leaf_iters: usize,
    /// Absolute gradient-norm tolerance, the last-resort stopping rule.
    pub leaf_abs_tol: f64,
    /// Cap on subproblem solves per step-size search.
    pub max_probes: u64,
    /// Relative step-norm floor below which the step-scaled stopping rule
    /// switches to the gradient-ratio rule.
    pub step_floor_rel: f64,
    /// Gradient norm (relative to the initial scale) under which an iterate
    /// is accepted as a fixed point of the envelope.
    pub fixed_point_grad_tol: f64,
    /// Multiplies stopping-rule thresholds; 1.0 is nominal. Fault-injection
    /// tests loosen this on purpose. Zero forces near-exact solves.
    pub loosen_factor: f64,
    /// Restart cap for an inner tensor engine run.
    pub inner_max_restarts: usize,
    /// Step cap across all restarts of an inner tensor engine run.
    pub inner_max_steps: usize,
    /// Inexact-step contraction factor used by the potential audit.
    pub audit_sigma: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_leaf_iters: 20_000,
            leaf_abs_tol: 1e-12,
            max_probes: 40,
            step_floor_rel: 1e-12,
            fixed_point_grad_tol: 1e-10,
            loosen_factor: 1.0,
            inner_max_restarts: 20,
            inner_max_steps: 10_000,
            audit_sigma: 0.75,
        }
    }
}

/// Configuration of one composite accelerated Taylor descent run.
#[derive(Clone, Debug)]
pub struct CatdConfig {
    /// Taylor order of the subproblem models.
    pub p: usize,
    /// Regularization coefficient H; must dominate the order-p Lipschitz
    /// constant of the smooth part.
    pub h_coeff: f64,
    pub engine: InnerEngine,
    pub solver: SolverConfig,
}

impl CatdConfig {
    pub fn new(p: usize, h_coeff: f64) -> Self {
        Self {
            p,
            h_coeff,
            engine: InnerEngine::FirstOrder,
            solver: SolverConfig::default(),
        }
    }

    pub fn with_engine(mut self, engine: InnerEngine) -> Self {
        self.engine = engine;
        self
    }

    pub fn with_solver(mut self, solver: SolverConfig) -> Self {
        self.solver = solver;
        self
    }
}
