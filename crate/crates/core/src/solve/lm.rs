//! Levenberg–Marquardt over real parameters with complex residuals.

use nalgebra::{DMatrix, DVector};

use crate::config::LmSettings;
use crate::{CMatrix, CVector};

/// Residual below which a fit is treated as exact and iteration stops.
const EXACT_COST: f64 = 1e-28;

#[derive(Clone, Debug, PartialEq)]
pub struct LmOutcome {
    pub theta: Vec<f64>,
    /// `‖r(θ)‖` at the returned point.
    pub residual: f64,
    pub iterations: usize,
    /// True when the gradient test or an exact fit ended the run.
    pub converged: bool,
}

/// Minimize `‖r(θ)‖²` for real `θ`, where `eval` returns the complex residual
/// and its Jacobian with respect to each real coordinate. `None` from `eval`
/// marks an infeasible point (pole, singular transform) and is handled like
/// a rejected step. Returns `None` when the starting point is infeasible.
pub fn levenberg_marquardt<F>(theta0: &[f64], settings: &LmSettings, mut eval: F) -> Option<LmOutcome>
where
    F: FnMut(&[f64]) -> Option<(CVector, CMatrix)>,
{
    let dim = theta0.len();
    let mut theta = theta0.to_vec();
    let (mut r, mut j) = eval(&theta)?;
    let mut cost = r.norm_squared();
    if !cost.is_finite() {
        return None;
    }
    let mut mu = f64::NAN;
    for iter in 0..settings.max_iterations {
        let (h, g) = normal_equations(&r, &j);
        if g.norm() < settings.gradient_tol || cost < EXACT_COST {
            return Some(LmOutcome { theta, residual: cost.sqrt(), iterations: iter, converged: true });
        }
        if mu.is_nan() {
            let trace = h.trace();
            mu = if trace > 0.0 { settings.initial_damping * trace / dim as f64 } else { settings.initial_damping };
        }
        let mut accepted = false;
        for _ in 0..settings.max_retries {
            let mut damped = h.clone();
            for k in 0..dim {
                damped[(k, k)] += mu;
            }
            let Some(chol) = damped.cholesky() else {
                mu *= settings.damping_increase;
                continue;
            };
            let step = chol.solve(&(-&g));
            let trial: Vec<f64> = theta.iter().zip(step.iter()).map(|(t, s)| t + s).collect();
            if let Some((r_new, j_new)) = eval(&trial) {
                let c_new = r_new.norm_squared();
                if c_new.is_finite() && c_new < cost {
                    theta = trial;
                    r = r_new;
                    j = j_new;
                    cost = c_new;
                    mu *= settings.damping_decrease;
                    accepted = true;
                    break;
                }
            }
            mu *= settings.damping_increase;
        }
        if !accepted {
            return Some(LmOutcome { theta, residual: cost.sqrt(), iterations: iter + 1, converged: false });
        }
    }
    let (_, g) = normal_equations(&r, &j);
    Some(LmOutcome {
        theta,
        residual: cost.sqrt(),
        iterations: settings.max_iterations,
        converged: g.norm() < settings.gradient_tol,
    })
}

/// `Re(JᴴJ)` and `Re(Jᴴr)`.
fn normal_equations(r: &CVector, j: &CMatrix) -> (DMatrix<f64>, DVector<f64>) {
    let jh = j.adjoint();
    let h = (&jh * j).map(|z| z.re);
    let g = (&jh * r).map(|z| z.re);
    (h, g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::C64;

    fn rosenbrock(t: &[f64]) -> Option<(CVector, CMatrix)> {
        let r = CVector::from_vec(vec![C64::new(10.0 * (t[1] - t[0] * t[0]), 0.0), C64::new(1.0 - t[0], 0.0)]);
        let j = CMatrix::from_row_slice(
            2,
            2,
            &[C64::new(-20.0 * t[0], 0.0), C64::new(10.0, 0.0), C64::new(-1.0, 0.0), C64::new(0.0, 0.0)],
        );
        Some((r, j))
    }

    #[test]
    fn solves_rosenbrock() {
        let out = levenberg_marquardt(&[-1.2, 1.0], &LmSettings::default(), rosenbrock).unwrap();
        assert!(out.converged);
        assert!((out.theta[0] - 1.0).abs() < 1e-8);
        assert!((out.theta[1] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn cost_never_increases() {
        let mut costs = Vec::new();
        let out = levenberg_marquardt(&[-1.2, 1.0], &LmSettings::default(), |t| {
            let res = rosenbrock(t);
            costs.push(res.as_ref().unwrap().0.norm());
            res
        })
        .unwrap();
        assert!(out.residual <= costs[0]);
    }

    #[test]
    fn complex_residual_in_real_coordinates() {
        // r(a, b) = (a + ib)^2 - (3 + 4i); roots ±(2 + i).
        let out = levenberg_marquardt(&[1.0, 0.5], &LmSettings::default(), |t| {
            let z = C64::new(t[0], t[1]);
            let r = CVector::from_vec(vec![z * z - C64::new(3.0, 4.0)]);
            let dz = z * 2.0;
            let j = CMatrix::from_row_slice(1, 2, &[dz, dz * C64::new(0.0, 1.0)]);
            Some((r, j))
        })
        .unwrap();
        // The gradient test stops at |∇| < 1e-10, i.e. |r| of order 1e-11.
        assert!(out.converged && out.residual < 1e-10);
        assert!((out.theta[0] - 2.0).abs() < 1e-8 && (out.theta[1] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn infeasible_start() {
        assert!(levenberg_marquardt(&[0.0], &LmSettings::default(), |_| None).is_none());
    }
}
