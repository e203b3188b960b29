//! Damped least squares (Levenberg-Marquardt) for small dense problems.
//!
//! The damping factor is multiplied by 10 after a rejected step and divided
//! by 10 after an accepted one. Iteration stops when the relative parameter
//! step falls below `step_tolerance` or after `max_iterations`.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy)]
pub struct LmOptions {
    pub max_iterations: usize,
    pub step_tolerance: f64,
    pub initial_damping: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            max_iterations: 200,
            step_tolerance: 1e-8,
            initial_damping: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmReport {
    pub params: DVector<f64>,
    pub rss: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// A residual vector r(p) with its Jacobian ∂r/∂p.
pub trait LeastSquaresProblem {
    fn residuals(&self, params: &DVector<f64>) -> DVector<f64>;
    fn jacobian(&self, params: &DVector<f64>) -> DMatrix<f64>;

    /// Map a trial point back into the feasible set.
    fn project(&self, _params: &mut DVector<f64>) {}
}

pub fn minimize<P: LeastSquaresProblem>(
    problem: &P,
    initial: DVector<f64>,
    options: &LmOptions,
) -> LmReport {
    let mut params = initial;
    problem.project(&mut params);
    let mut residuals = problem.residuals(&params);
    let mut rss = residuals.norm_squared();
    let mut damping = options.initial_damping;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < options.max_iterations {
        iterations += 1;
        if rss == 0.0 || !rss.is_finite() {
            converged = rss == 0.0;
            break;
        }
        let jac = problem.jacobian(&params);
        let normal = jac.tr_mul(&jac);
        let gradient = jac.tr_mul(&residuals);
        let floor = normal.diagonal().max().max(f64::MIN_POSITIVE) * 1e-12;

        let mut accepted = false;
        while damping < 1e20 {
            let mut damped = normal.clone();
            for i in 0..damped.nrows() {
                damped[(i, i)] += damping * normal[(i, i)].max(floor);
            }
            let Some(step) = damped.cholesky().map(|c| c.solve(&(-&gradient))) else {
                damping *= 10.0;
                continue;
            };
            let mut trial = &params + &step;
            problem.project(&mut trial);
            let trial_residuals = problem.residuals(&trial);
            let trial_rss = trial_residuals.norm_squared();
            if trial_rss.is_finite() && trial_rss <= rss {
                let moved = (&trial - &params).norm();
                let scale = params.norm().max(f64::MIN_POSITIVE);
                params = trial;
                residuals = trial_residuals;
                let improved = trial_rss < rss;
                rss = trial_rss;
                damping = (damping / 10.0).max(1e-15);
                accepted = true;
                if moved <= options.step_tolerance * scale || !improved {
                    converged = true;
                }
                break;
            }
            damping *= 10.0;
        }
        if !accepted {
            // No descent direction left at any damping: stationary point.
            converged = true;
        }
        if converged {
            break;
        }
    }

    LmReport {
        params,
        rss,
        iterations,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Exponential {
        t: Vec<f64>,
        y: Vec<f64>,
    }

    impl LeastSquaresProblem for Exponential {
        fn residuals(&self, p: &DVector<f64>) -> DVector<f64> {
            DVector::from_iterator(
                self.t.len(),
                self.t.iter().zip(&self.y).map(|(t, y)| p[0] * (-p[1] * t).exp() - y),
            )
        }

        fn jacobian(&self, p: &DVector<f64>) -> DMatrix<f64> {
            DMatrix::from_fn(self.t.len(), 2, |i, j| {
                let e = (-p[1] * self.t[i]).exp();
                if j == 0 {
                    e
                } else {
                    -p[0] * self.t[i] * e
                }
            })
        }
    }

    #[test]
    fn recovers_exponential_decay() {
        let t: Vec<f64> = (0..40).map(|i| i as f64 * 0.1).collect();
        let y = t.iter().map(|t| 2.5 * (-1.3 * t).exp()).collect();
        let report = minimize(&Exponential { t, y }, DVector::from_vec(vec![1.0, 0.5]), &LmOptions::default());
        assert!(report.converged);
        assert!((report.params[0] - 2.5).abs() < 1e-9);
        assert!((report.params[1] - 1.3).abs() < 1e-9);
        assert!(report.rss < 1e-20);
    }

    #[test]
    fn iteration_cap_reports_failure() {
        let t: Vec<f64> = (0..40).map(|i| i as f64 * 0.1).collect();
        let y = t.iter().map(|t| 2.5 * (-1.3 * t).exp()).collect();
        let options = LmOptions {
            max_iterations: 1,
            ..LmOptions::default()
        };
        let report = minimize(&Exponential { t, y }, DVector::from_vec(vec![0.1, 5.0]), &options);
        assert!(!report.converged);
    }
}
