//! Derivative-free local search. The objectives here are built from operator
//! norms and max-type connectives, so they are Lipschitz but not smooth;
//! compass search alone stalls on tied maxima, hence the poll set also
//! carries the last successful direction and a few random unit directions.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::config::StepSchedule;

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub point: Vec<f64>,
    pub value: f64,
    /// Final step length fell below the tolerance.
    pub converged: bool,
    pub evals: usize,
}

/// Minimize `f` starting from `x0`. `retract` is applied after every trial
/// move to keep iterates feasible (ball projections, disk clamps, ...).
/// `radius` sets the initial step length and the growth cap.
pub fn pattern_search<F, R>(
    f: F,
    x0: &[f64],
    radius: f64,
    max_sweeps: usize,
    tol: f64,
    schedule: StepSchedule,
    retract: R,
    rng: &mut ChaCha8Rng,
) -> SearchOutcome
where
    F: Fn(&[f64]) -> f64,
    R: Fn(&mut [f64]),
{
    let d = x0.len();
    let mut x = x0.to_vec();
    retract(&mut x);
    let mut fx = f(&x);
    let mut evals = 1usize;
    if d == 0 {
        return SearchOutcome { point: x, value: fx, converged: true, evals };
    }

    let shrink = match schedule {
        StepSchedule::Halving => 0.5,
        StepSchedule::Geometric { factor } => factor,
    };
    let grow = matches!(schedule, StepSchedule::Halving);
    let n_random = (d / 4).clamp(2, 8);
    let mut step = radius * 0.25;
    let mut momentum: Option<Vec<f64>> = None;

    let mut cand = vec![0.0; d];
    for _ in 0..max_sweeps {
        if step < tol {
            break;
        }
        let mut improved = false;

        let mut try_dir = |dir: &[f64], x: &mut Vec<f64>, fx: &mut f64, evals: &mut usize| -> bool {
            for i in 0..d {
                cand[i] = x[i] + step * dir[i];
            }
            retract(&mut cand);
            let fc = f(&cand);
            *evals += 1;
            if fc < *fx {
                x.copy_from_slice(&cand);
                *fx = fc;
                true
            } else {
                false
            }
        };

        if let Some(m) = momentum.clone() {
            if try_dir(&m, &mut x, &mut fx, &mut evals) {
                improved = true;
            }
        }
        let mut dir = vec![0.0; d];
        for i in 0..d {
            for sgn in [1.0, -1.0] {
                dir[i] = sgn;
                if try_dir(&dir, &mut x, &mut fx, &mut evals) {
                    improved = true;
                    momentum = Some(dir.clone());
                }
                dir[i] = 0.0;
            }
        }
        for _ in 0..n_random {
            let mut rdir: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal)).collect();
            let nrm = rdir.iter().map(|v| v * v).sum::<f64>().sqrt();
            if nrm == 0.0 {
                continue;
            }
            rdir.iter_mut().for_each(|v| *v /= nrm);
            if try_dir(&rdir, &mut x, &mut fx, &mut evals) {
                improved = true;
                momentum = Some(rdir);
            }
        }

        if improved {
            if grow {
                step = (step * 2.0).min(radius);
            }
        } else {
            step *= shrink;
            momentum = None;
        }
    }

    SearchOutcome { point: x, value: fx, converged: step < tol, evals }
}
