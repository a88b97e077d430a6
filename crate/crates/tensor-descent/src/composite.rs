//! Composite terms handled inside subproblems without Taylor expansion.

use std::sync::Arc;

use crate::oracle::{Oracle, SmoothOracle, Vector};

/// A proper closed convex term `g` (or `h`) kept out of the Taylor model.
///
/// `Smooth` wraps a full derivative oracle used as a composite part; its
/// value/subgradient calls are charged to that oracle's counters. The other
/// variants are prox-friendly simple terms.
#[derive(Clone)]
pub enum CompositePart {
    Zero,
    /// `(weight / 2) * ||x - center||^2`
    SquaredPenalty {
        weight: f64,
        center: Vector,
    },
    /// Indicator of the box `[lower, upper]`; value 0 inside, +inf outside.
    BoxIndicator {
        lower: Vector,
        upper: Vector,
    },
    Smooth(Arc<SmoothOracle>),
}

impl CompositePart {
    pub fn is_zero(&self) -> bool {
        match self {
            CompositePart::Zero => true,
            CompositePart::Smooth(o) => o.is_zero(),
            _ => false,
        }
    }

    /// Differentiable on its domain; the subgradient is an actual gradient.
    pub fn is_differentiable(&self) -> bool {
        !matches!(self, CompositePart::BoxIndicator { .. })
    }

    pub fn has_prox(&self) -> bool {
        !matches!(self, CompositePart::Smooth(_))
    }

    /// Counted value (order 0 for a smooth composite).
    pub fn value(&self, x: &Vector) -> f64 {
        match self {
            CompositePart::Smooth(o) => {
                o.record(0);
                o.eval_raw(x)
            }
            _ => self.value_raw(x),
        }
    }

    /// Counted subgradient (order 1 for a smooth composite).
    pub fn subgradient(&self, x: &Vector) -> Vector {
        match self {
            CompositePart::Smooth(o) => {
                o.record(1);
                o.grad_raw(x)
            }
            _ => self.subgradient_raw(x),
        }
    }

    /// Uncounted value, for instrumentation.
    pub fn value_raw(&self, x: &Vector) -> f64 {
        match self {
            CompositePart::Zero => 0.0,
            CompositePart::SquaredPenalty { weight, center } => {
                0.5 * weight * (x - center).norm_squared()
            }
            CompositePart::BoxIndicator { lower, upper } => {
                let inside = x
                    .iter()
                    .zip(lower.iter().zip(upper.iter()))
                    .all(|(v, (lo, hi))| *v >= lo - 1e-12 && *v <= hi + 1e-12);
                if inside {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            CompositePart::Smooth(o) => o.eval_raw(x),
        }
    }

    /// Uncounted subgradient. For the box indicator this is the zero vector,
    /// valid at interior points.
    pub fn subgradient_raw(&self, x: &Vector) -> Vector {
        match self {
            CompositePart::Zero => Vector::zeros(x.len()),
            CompositePart::SquaredPenalty { weight, center } => (x - center) * *weight,
            CompositePart::BoxIndicator { .. } => Vector::zeros(x.len()),
            CompositePart::Smooth(o) => o.grad_raw(x),
        }
    }

    /// `prox_{t g}(v) = argmin_y g(y) + ||y - v||^2 / (2t)`, when closed-form.
    pub fn prox(&self, v: &Vector, t: f64) -> Option<Vector> {
        match self {
            CompositePart::Zero => Some(v.clone()),
            CompositePart::SquaredPenalty { weight, center } => {
                // (v + t w c) / (1 + t w)
                let tw = t * weight;
                Some((v + center * tw) / (1.0 + tw))
            }
            CompositePart::BoxIndicator { lower, upper } => Some(Vector::from_iterator(
                v.len(),
                v.iter()
                    .zip(lower.iter().zip(upper.iter()))
                    .map(|(x, (lo, hi))| x.clamp(*lo, *hi)),
            )),
            CompositePart::Smooth(_) => None,
        }
    }
}
