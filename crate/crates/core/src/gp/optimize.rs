use super::likelihood::{nlml, nlml_with_grad};
use super::{Hyperparams, TrainingSet};
use crate::error::{Error, Result};

/// Gradient descent with Armijo backtracking in log-parameter space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizeOptions {
    pub max_iters: usize,
    /// Stop once the gradient norm drops below this.
    pub tol: f64,
    /// Largest parameter move per iteration, in log units.
    pub max_move: f64,
    /// Sufficient-decrease constant.
    pub armijo: f64,
    /// Backtracking gives up below this step length.
    pub min_step: f64,
    pub mean_const: f64,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        OptimizeOptions {
            max_iters: 500,
            tol: 1e-5,
            max_move: 1.0,
            armijo: 1e-4,
            min_step: 1e-10,
            mean_const: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeOutcome {
    pub hyper: Hyperparams,
    pub nlml: f64,
    pub initial_nlml: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Set when the search stopped because every trial step hit a failed
    /// factorization; `hyper` is then the best point reached so far.
    pub warning: Option<String>,
}

fn norm(g: &[f64; 6]) -> f64 {
    g.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn optimize_hyper(
    train: &TrainingSet,
    init: &Hyperparams,
    opts: &OptimizeOptions,
) -> Result<OptimizeOutcome> {
    init.validate()?;
    let mean_const = opts.mean_const;
    let mut theta = init.to_log();
    let initial_nlml = nlml(train, init, mean_const)?;
    let (_, mut grad) = nlml_with_grad(train, &theta, mean_const)?;
    let mut value = initial_nlml;
    let mut best = *init;
    let mut step = f64::INFINITY;
    let mut warning = None;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < opts.max_iters {
        let gn = norm(&grad);
        if gn < opts.tol {
            converged = true;
            break;
        }
        step = step.min(opts.max_move / gn);
        let mut accepted = None;
        let mut only_factor_failures = true;
        while step >= opts.min_step {
            let mut trial = theta;
            for (t, g) in trial.iter_mut().zip(&grad) {
                *t -= step * g;
            }
            let h = Hyperparams::from_log(&trial);
            match nlml(train, &h, mean_const) {
                Ok(v) if v <= value - opts.armijo * step * gn * gn => {
                    accepted = Some((trial, v));
                    break;
                }
                Ok(_) => only_factor_failures = false,
                Err(Error::NotPositiveDefinite { .. }) | Err(Error::Domain(_)) => {}
                Err(e) => return Err(e),
            }
            step *= 0.5;
        }
        let Some((trial, v)) = accepted else {
            if only_factor_failures {
                warning = Some(format!(
                    "line search failed at iteration {iterations}: covariance not positive definite along the descent direction"
                ));
            }
            break;
        };
        match nlml_with_grad(train, &trial, mean_const) {
            Ok((_, g)) => {
                theta = trial;
                value = v;
                grad = g;
                best = Hyperparams::from_log(&theta);
            }
            Err(Error::NotPositiveDefinite { .. }) => {
                warning = Some(format!(
                    "gradient evaluation failed at iteration {iterations}"
                ));
                break;
            }
            Err(e) => return Err(e),
        }
        iterations += 1;
        log::debug!("iteration {iterations}: nlml {value:.6}, step {step:.3e}");
        step *= 2.0;
    }
    let grad_norm = norm(&grad);
    if !converged && grad_norm < opts.tol {
        converged = true;
    }
    if let Some(w) = &warning {
        log::warn!("{w}");
    }
    Ok(OptimizeOutcome {
        hyper: best,
        nlml: value,
        initial_nlml,
        grad_norm,
        iterations,
        converged,
        warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> TrainingSet {
        let x: Vec<_> = (0..15)
            .map(|i| {
                let f = i as f64 / 14.0;
                [f, 0.0, 0.5, 10.0]
            })
            .collect();
        let y = x.iter().map(|r| (3.0 * r[0]).sin() * 0.1).collect();
        TrainingSet::new(x, y).unwrap()
    }

    #[test]
    fn never_increases_nlml() {
        let t = toy();
        let init = Hyperparams::new([1.0, 1.0, 1.0, 1.0], 0.05, 0.05).unwrap();
        let out = optimize_hyper(
            &t,
            &init,
            &OptimizeOptions {
                max_iters: 40,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(out.nlml <= out.initial_nlml);
        assert!(out.iterations > 0);
        assert!((nlml(&t, &out.hyper, 0.0).unwrap() - out.nlml).abs() < 1e-9);
    }

    #[test]
    fn optimal_init_is_returned_unchanged() {
        let t = toy();
        let init = Hyperparams::new([1.0, 1.0, 1.0, 1.0], 0.05, 0.05).unwrap();
        let out = optimize_hyper(
            &t,
            &init,
            &OptimizeOptions {
                tol: 1e9,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(out.converged);
        assert_eq!(out.iterations, 0);
        assert_eq!(out.hyper, init);
    }
}
