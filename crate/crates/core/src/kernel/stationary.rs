use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::game::{GameSpec, StateSpace};

use super::{Distribution, Dynamic, Kernel};

/// Largest space solved with a dense linear system.
pub const DENSE_CAP: usize = 20_000;
/// Below this size `Auto` goes straight to the dense solve.
const DIRECT_AUTO_LIMIT: usize = 2_000;
const RESIDUAL_TOL: f64 = 1e-12;
/// Iterations without progress after which a converged residual is final.
const PLATEAU_ITERS: usize = 1000;
const POWER_MAX_ITERS: usize = 2_000_000;

/// Log of the number of agent-level profiles behind an aggregate state
/// (product of multinomial coefficients).
pub(crate) fn log_multiplicity(game: &GameSpec, counts: &[u32]) -> f64 {
    let mut acc = 0.0;
    for (l, p) in game.populations().iter().enumerate() {
        acc += ln_factorial(p.size);
        for f in game.slots(l) {
            acc -= ln_factorial(counts[f]);
        }
    }
    acc
}

pub(crate) fn ln_factorial(k: u32) -> f64 {
    (2..=k).map(|i| f64::from(i).ln()).sum()
}

/// Gibbs distribution of the dynamic: `exp(beta phi)` for the population-local
/// clocks, times the number of agent profiles for standard log-linear
/// learning. The prior variant has no closed form.
pub fn stationary_closed_form(
    space: &StateSpace,
    beta: f64,
    dynamic: Dynamic,
) -> Result<Distribution> {
    let game = space.game();
    let phi = space.potentials();
    let logw: Vec<f64> = match dynamic {
        Dynamic::Mlll => phi.iter().map(|&p| beta * p).collect(),
        Dynamic::Lll => (0..space.len())
            .map(|i| beta * phi[i] + log_multiplicity(game, space.counts(i)))
            .collect(),
        Dynamic::Prior => {
            return Err(Error::UnsupportedDynamic(
                "the prior variant has no closed-form stationary distribution",
            ))
        }
    };
    Distribution::from_log_weights(&logw)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StationaryMethod {
    /// Dense solve for small spaces, power iteration otherwise.
    Auto,
    /// Power iteration, falling back to a dense solve if it stalls.
    Power,
    /// Dense solve of the balance equations.
    Direct,
}

pub fn stationary_numeric(kernel: &Kernel) -> Result<Distribution> {
    stationary_numeric_with(kernel, StationaryMethod::Auto)
}

/// Stationary distribution of the kernel with L1 residual `|pi M - pi|` at
/// most 1e-12. Power iteration also runs until its geometric error estimate
/// `residual / (1 - rate)` is below the same tolerance, or until rounding
/// stops the residual from shrinking.
pub fn stationary_numeric_with(kernel: &Kernel, method: StationaryMethod) -> Result<Distribution> {
    let len = kernel.len();
    let direct_first = match method {
        StationaryMethod::Direct => true,
        StationaryMethod::Power => false,
        StationaryMethod::Auto => len <= DIRECT_AUTO_LIMIT,
    };
    if direct_first {
        let pi = dense_solve(kernel)?;
        return polish(kernel, pi);
    }
    match power_iterate(kernel, Distribution::uniform(len).probs().to_vec()) {
        Ok(pi) => Ok(pi),
        Err(err) if len <= DENSE_CAP => {
            let pi = dense_solve(kernel).map_err(|_| err)?;
            polish(kernel, pi)
        }
        Err(err) => Err(err),
    }
}

fn residual(kernel: &Kernel, pi: &[f64], scratch: &mut [f64]) -> f64 {
    kernel.apply_left(pi, scratch);
    pi.iter()
        .zip(scratch.iter())
        .map(|(a, b)| (a - b).abs())
        .sum()
}

fn power_iterate(kernel: &Kernel, mut pi: Vec<f64>) -> Result<Distribution> {
    let mut next = vec![0.0; pi.len()];
    let mut best = f64::INFINITY;
    let mut last_improvement = 0usize;
    let mut prev = f64::INFINITY;
    for it in 0..POWER_MAX_ITERS {
        kernel.apply_left(&pi, &mut next);
        let total: f64 = next.iter().sum();
        let mut res = 0.0;
        for (a, b) in pi.iter().zip(next.iter_mut()) {
            *b /= total;
            res += (*a - *b).abs();
        }
        std::mem::swap(&mut pi, &mut next);
        let rate = res / prev;
        prev = res;
        if res < best * 0.999 {
            best = res;
            last_improvement = it;
        }
        if res <= RESIDUAL_TOL {
            let error = if rate < 1.0 {
                res / (1.0 - rate)
            } else {
                f64::INFINITY
            };
            if error <= RESIDUAL_TOL || it - last_improvement > PLATEAU_ITERS {
                return Ok(Distribution::from_raw_renormalized(pi));
            }
        } else if it - last_improvement > 100_000 {
            return Err(Error::NotConverged {
                stage: "power iteration",
                iterations: it,
                residual: res,
            });
        }
    }
    Err(Error::NotConverged {
        stage: "power iteration",
        iterations: POWER_MAX_ITERS,
        residual: best,
    })
}

/// Solve `pi (M - I) = 0`, `sum pi = 1` by LU on the transposed system.
fn dense_solve(kernel: &Kernel) -> Result<Vec<f64>> {
    let len = kernel.len();
    if len > DENSE_CAP {
        return Err(Error::CardinalityExceeded {
            count: len as u128,
            cap: DENSE_CAP as u128,
        });
    }
    let mut a = DMatrix::<f64>::zeros(len, len);
    for i in 0..len {
        for (j, v) in kernel.row(i) {
            a[(j, i)] += v;
        }
        a[(i, i)] -= 1.0;
    }
    for j in 0..len {
        a[(len - 1, j)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(len);
    b[len - 1] = 1.0;
    let x = a.lu().solve(&b).ok_or(Error::NotConverged {
        stage: "dense stationary solve",
        iterations: 0,
        residual: f64::NAN,
    })?;
    Ok(x.iter().map(|&v| v.max(0.0)).collect())
}

/// Refine a dense solution with power steps until the residual tolerance.
fn polish(kernel: &Kernel, pi: Vec<f64>) -> Result<Distribution> {
    let pi = Distribution::from_raw_renormalized(pi).probs().to_vec();
    let mut scratch = vec![0.0; pi.len()];
    if residual(kernel, &pi, &mut scratch) <= RESIDUAL_TOL {
        return Ok(Distribution::from_raw_renormalized(pi));
    }
    power_iterate(kernel, pi)
}
