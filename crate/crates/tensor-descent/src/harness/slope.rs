//! Log-log slope fitting over trace tails, used to compare measured
//! convergence against the theoretical rate exponents.

use super::{HResult, HarnessError};
use crate::trace::RunTrace;

/// Ordinary least squares on `(x, y)`; returns `(slope, r_squared)`.
pub fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return (0.0, 1.0);
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy) / (sxx * syy)
    };
    (slope, r2)
}

fn field_value(rec: &crate::trace::TraceRecord, field: &str) -> Option<f64> {
    match field {
        "gap" => rec.gap,
        "value" => Some(rec.value),
        "grad_norm" => Some(rec.grad_norm),
        "step_norm" => rec.step_norm,
        _ => None,
    }
}

/// Least-squares slope of `log(field)` against `log(iter)` over the trace
/// tail. Requires at least 10 tail points, all positive.
pub fn slope_fit(trace: &RunTrace, field: &str, tail_fraction: f64) -> HResult<(f64, f64)> {
    slope_fit_records(&trace.records, field, tail_fraction)
}

/// [`slope_fit`] over a bare record slice (e.g. parsed back from CSV).
pub fn slope_fit_records(
    records: &[crate::trace::TraceRecord],
    field: &str,
    tail_fraction: f64,
) -> HResult<(f64, f64)> {
    if !(0.0..=1.0).contains(&tail_fraction) {
        return Err(HarnessError::Fit(format!(
            "tail fraction must lie in (0, 1], got {tail_fraction}"
        )));
    }
    let n = records.len();
    let take = ((n as f64 * tail_fraction).ceil() as usize).min(n);
    let tail = &records[n - take..];
    if tail.len() < 10 {
        return Err(HarnessError::Fit(format!(
            "need at least 10 tail points, have {}",
            tail.len()
        )));
    }
    let mut xs = Vec::with_capacity(tail.len());
    let mut ys = Vec::with_capacity(tail.len());
    for rec in tail {
        let v = field_value(rec, field)
            .ok_or_else(|| HarnessError::Fit(format!("unknown trace field `{field}`")))?;
        if v.is_nan() || v <= 0.0 {
            return Err(HarnessError::Fit(format!(
                "nonpositive value {v} in the tail at iteration {}",
                rec.iter
            )));
        }
        xs.push((rec.iter as f64).ln());
        ys.push(v.ln());
    }
    Ok(least_squares(&xs, &ys))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{RunSummary, RunTrace, TraceRecord};
    use approx::assert_relative_eq;

    fn synthetic(gaps: Vec<f64>) -> RunTrace {
        let records = gaps
            .into_iter()
            .enumerate()
            .map(|(i, g)| TraceRecord {
                iter: i as u64 + 1,
                value: g,
                gap: Some(g),
                grad_norm: 1.0,
                ..TraceRecord::default()
            })
            .collect();
        RunTrace {
            records,
            summary: RunSummary {
                name: "synthetic".into(),
                problem: "synthetic".into(),
                algorithm: "none".into(),
                p: 2,
                q: None,
                iterations: 0,
                final_value: 0.0,
                final_gap: None,
                final_grad_norm: 0.0,
                n_f: 0,
                n_g: 0,
                outer_iters: None,
                total_inner_iters: None,
                wall_time_s: 0.0,
                seed: 0,
            },
        }
    }

    #[test]
    fn exact_power_law() {
        let trace = synthetic((1..=40).map(|k| (k as f64).powf(-3.5)).collect());
        let (slope, r2) = slope_fit(&trace, "gap", 0.5).unwrap();
        assert_relative_eq!(slope, -3.5, epsilon = 1e-6);
        assert!(r2 > 1.0 - 1e-9);
    }

    #[test]
    fn constant_sequence_has_zero_slope() {
        let trace = synthetic(vec![0.7; 30]);
        let (slope, _) = slope_fit(&trace, "gap", 1.0).unwrap();
        assert_relative_eq!(slope, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn nonpositive_tail_is_an_error() {
        let mut gaps: Vec<f64> = (1..=30).map(|k| (k as f64).powf(-2.0)).collect();
        gaps[25] = 0.0;
        let trace = synthetic(gaps);
        assert!(slope_fit(&trace, "gap", 0.5).is_err());
    }

    #[test]
    fn too_few_points_is_an_error() {
        let trace = synthetic((1..=5).map(|k| (k as f64).powf(-2.0)).collect());
        assert!(slope_fit(&trace, "gap", 1.0).is_err());
    }
}
