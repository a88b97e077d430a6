//! Property tests for the oracle layer: Taylor remainder bounds, exactness
//! on polynomials, finite-difference agreement, and counter discipline.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use tensor_descent::composite::CompositePart;
use tensor_descent::oracle::{remainder_check, taylor_value, Oracle};
use tensor_descent::problems::{make_logistic, make_power_norm, make_quadratic};

type Vector = DVector<f64>;

const DIM: usize = 4;

fn coords() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, DIM)
}

fn to_vec(v: Vec<f64>) -> Vector {
    Vector::from_vec(v)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn power_norm_remainders_hold(xs in coords(), ys in coords(), r in 2u32..=4) {
        let f = make_power_norm(r, DIM).unwrap();
        let x = to_vec(xs);
        let y = to_vec(ys);
        let p = f.order().min(r as usize - 1).max(1);
        if f.lipschitz(p).is_some() {
            let chk = remainder_check(&f, &x, &y, p).unwrap();
            prop_assert!(chk.ok, "r={r} p={p}: lhs {} rhs {}", chk.lhs, chk.rhs);
        }
    }

    #[test]
    fn quadratic_taylor_is_exact_at_its_degree(xs in coords(), ys in coords(), p in 2usize..=3) {
        let a = DMatrix::from_fn(DIM, DIM, |i, j| if i == j { (i + 1) as f64 } else { 0.25 });
        let f = make_quadratic(a, Vector::from_element(DIM, 0.5)).unwrap();
        let x = to_vec(xs);
        let y = to_vec(ys);
        let omega = taylor_value(&f, &x, &y, p).unwrap();
        let exact = f.eval_raw(&y);
        let scale = exact.abs().max(1.0);
        prop_assert!((omega - exact).abs() <= 1e-11 * scale);
    }

    #[test]
    fn logistic_gradient_matches_finite_differences(xs in coords()) {
        let data = DMatrix::from_fn(3, DIM, |i, j| ((i * DIM + j) as f64 * 0.37).sin());
        let f = make_logistic(data, vec![1.0, -1.0, 1.0]).unwrap();
        let x = to_vec(xs);
        let grad = f.grad_raw(&x);
        let value_fn = |z: &Vector| f.eval_raw(z);
        let fd = tensor_descent::harness::fd::gradient_fd(&value_fn, &x);
        prop_assert!((grad.clone() - fd).norm() <= 1e-5 * grad.norm().max(1.0));
    }

    #[test]
    fn taylor_value_counter_discipline(xs in coords(), ys in coords()) {
        let f = make_power_norm(4, DIM).unwrap();
        let x = to_vec(xs);
        let y = to_vec(ys);
        taylor_value(&f, &x, &y, 3).unwrap();
        let snap = f.counters().snapshot();
        prop_assert_eq!(snap, [1, 1, 1, 1]);
    }

    #[test]
    fn composite_subgradient_inequality(ys in coords(), zs in coords(), w in 0.1f64..5.0) {
        let g = CompositePart::SquaredPenalty { weight: w, center: Vector::zeros(DIM) };
        let y = to_vec(ys);
        let z = to_vec(zs);
        let sub = g.subgradient_raw(&y);
        let lhs = g.value_raw(&z);
        let rhs = g.value_raw(&y) + sub.dot(&(&z - &y));
        prop_assert!(lhs >= rhs - 1e-10);
    }
}
