//! High-order (tensor) methods for minimizing sums `F = f + g` of convex
//! functions with Lipschitz `p`-th derivatives.
//!
//! The crate provides:
//!
//! * [`oracle`] — derivative oracles serving directional contractions
//!   `D^k f(x)[h]^{k-1}` up to order 3, Taylor approximations, remainder
//!   checks, and per-order call counters.
//! * [`problems`] — built-in test problems (power norms, quadratics,
//!   logistic loss) with closed-form derivatives, certified Lipschitz
//!   constants, and constructors for controlled-ratio splitting pairs.
//! * [`tensor_step`] — the regularized composite Taylor subproblem and its
//!   inexact solvers with gradient-norm stopping rules.
//! * [`catd`] — composite accelerated Taylor descent: the proximal-point
//!   envelope with a per-iteration step-size bracket search, plus a debug
//!   potential audit.
//! * [`restarts`] — restart acceleration for r-uniformly convex objectives
//!   with the halving-radius schedule.
//! * [`combination`] — the two-level framework that treats `g` as a
//!   composite term and solves each tensor subproblem by an inner restarted
//!   run, separating the order-`p` oracle calls of `f` and `g`.
//! * [`multicomposite`] — a mixed-order method for `f + g + h` where `f`
//!   and `g` are expanded to different Taylor orders `q <= p`.
//! * [`harness`] — experiment configuration, trace persistence, slope
//!   fitting, and the acceptance check suites behind the CLI.

pub mod catd;
pub mod combination;
pub mod composite;
pub mod config;
pub mod error;
pub mod harness;
pub mod multicomposite;
pub mod oracle;
pub mod problems;
pub mod restarts;
pub mod tensor_step;
pub mod trace;

pub use error::{Result, SolverError};
pub use oracle::{Oracle, SmoothOracle, Vector};
