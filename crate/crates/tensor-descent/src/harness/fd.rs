//! Central finite differences: the independent oracle that derivative
//! implementations are checked against.

use crate::oracle::Vector;

/// Step size `eps_machine^{1/3} * max(1, ||x||)`.
pub fn fd_step(x: &Vector) -> f64 {
    f64::EPSILON.powf(1.0 / 3.0) * x.norm().max(1.0)
}

/// Central-difference gradient of a scalar function.
pub fn gradient_fd(f: &dyn Fn(&Vector) -> f64, x: &Vector) -> Vector {
    let h = fd_step(x);
    Vector::from_fn(x.len(), |i, _| {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += h;
        xm[i] -= h;
        (f(&xp) - f(&xm)) / (2.0 * h)
    })
}

/// Central difference of a vector-valued map along a direction:
/// `(m(x + e d) - m(x - e d)) / (2 e)`.
pub fn directional_fd(m: &dyn Fn(&Vector) -> Vector, x: &Vector, dir: &Vector) -> Vector {
    let e = fd_step(x);
    (m(&(x + dir * e)) - m(&(x - dir * e))) / (2.0 * e)
}
