use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::{for_each_state, GameSpec, StateSpace};
use crate::kernel::{stationary_numeric, Dynamic, Kernel};

use super::gibbs::SeparableGibbs;

/// Largest `beta * (max phi - min phi)` a calibration may reach.
pub const BETA_CAP_NORMALIZED: f64 = 1e3;
/// Calibration tolerance relative to `max phi`.
pub const CALIBRATION_TOLERANCE: f64 = 1e-6;

/// Potential values and log-multiplicities of every state, enough to evaluate
/// the closed-form stationary expectations at any `beta` without storing
/// the states.
#[derive(Debug, Clone)]
pub struct GibbsEnsemble {
    phi: Vec<f64>,
    log_mult: Vec<f64>,
    max_phi: f64,
    min_phi: f64,
}

impl GibbsEnsemble {
    /// Stream the state space of `game` (no cardinality cap).
    pub fn from_game(game: &GameSpec) -> Self {
        let mut phi = Vec::new();
        let mut log_mult = Vec::new();
        for_each_state(game, |c| {
            phi.push(game.potential_flat(c));
            log_mult.push(crate::kernel::log_multiplicity(game, c));
        });
        Self::from_parts(phi, log_mult)
    }

    pub fn from_space(space: &StateSpace) -> Self {
        let game = space.game();
        let log_mult = (0..space.len())
            .map(|i| crate::kernel::log_multiplicity(game, space.counts(i)))
            .collect();
        Self::from_parts(space.potentials().to_vec(), log_mult)
    }

    fn from_parts(phi: Vec<f64>, log_mult: Vec<f64>) -> Self {
        let max_phi = phi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min_phi = phi.iter().copied().fold(f64::INFINITY, f64::min);
        Self {
            phi,
            log_mult,
            max_phi,
            min_phi,
        }
    }

    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    pub fn max_potential(&self) -> f64 {
        self.max_phi
    }

    pub fn min_potential(&self) -> f64 {
        self.min_phi
    }

    /// `E_pi[phi]` under the closed-form stationary distribution.
    pub fn expected_potential(&self, beta: f64, dynamic: Dynamic) -> Result<f64> {
        let with_mult = match dynamic {
            Dynamic::Mlll => false,
            Dynamic::Lll => true,
            Dynamic::Prior => {
                return Err(Error::UnsupportedDynamic(
                    "the prior variant has no closed-form stationary distribution",
                ))
            }
        };
        let logw = |i: usize| beta * self.phi[i] + if with_mult { self.log_mult[i] } else { 0.0 };
        let max = (0..self.len()).map(logw).fold(f64::NEG_INFINITY, f64::max);
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..self.len() {
            let w = (logw(i) - max).exp();
            num += w * self.phi[i];
            den += w;
        }
        Ok(num / den)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Calibration {
    pub beta: f64,
    pub expected_potential: f64,
    pub target: f64,
    pub fraction: f64,
    pub max_potential: f64,
    pub iterations: usize,
}

/// Bisect `beta >= 0` so that `E_pi(beta)[phi] = fraction * max phi`.
///
/// MLLL and LLL use the closed forms, through the allocation dynamic program
/// for separable welfares and a streamed enumeration otherwise; the prior
/// variant rebuilds its kernel and solves for the stationary distribution at
/// every probe.
pub fn calibrate_beta(game: &GameSpec, dynamic: Dynamic, fraction: f64) -> Result<Calibration> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "fraction must lie in (0,1), got {fraction}"
        )));
    }
    match dynamic {
        Dynamic::Mlll | Dynamic::Lll => match SeparableGibbs::new(game) {
            Some(dp) => bisect_beta(
                |beta| dp.expected_potential(beta, dynamic),
                dp.min_potential(),
                dp.max_potential(),
                fraction,
            ),
            None => calibrate_with(&GibbsEnsemble::from_game(game), dynamic, fraction),
        },
        Dynamic::Prior => {
            let space = Arc::new(StateSpace::enumerate_capped(
                game,
                crate::kernel::DENSE_CAP as u128,
            )?);
            let (lo, hi) = (space.min_potential(), space.max_potential());
            let phi = space.potentials().to_vec();
            let expect = |beta: f64| -> Result<f64> {
                let k = Kernel::build(&game.with_beta(beta)?, Arc::clone(&space), Dynamic::Prior)?;
                Ok(stationary_numeric(&k)?.expectation(&phi))
            };
            bisect_beta(expect, lo, hi, fraction)
        }
    }
}

/// Calibrate against a precomputed ensemble (closed-form dynamics only).
pub fn calibrate_with(ens: &GibbsEnsemble, dynamic: Dynamic, fraction: f64) -> Result<Calibration> {
    bisect_beta(
        |beta| ens.expected_potential(beta, dynamic),
        ens.min_potential(),
        ens.max_potential(),
        fraction,
    )
}

fn bisect_beta<F: FnMut(f64) -> Result<f64>>(
    mut expect: F,
    min_phi: f64,
    max_phi: f64,
    fraction: f64,
) -> Result<Calibration> {
    if max_phi <= min_phi {
        return Err(Error::DegeneratePotential { value: max_phi });
    }
    let target = fraction * max_phi;
    let tol = CALIBRATION_TOLERANCE * max_phi.abs();
    let cap = BETA_CAP_NORMALIZED / (max_phi - min_phi);
    let done = |beta: f64, e: f64, iterations: usize| Calibration {
        beta,
        expected_potential: e,
        target,
        fraction,
        max_potential: max_phi,
        iterations,
    };
    let e0 = expect(0.0)?;
    if e0 >= target - tol {
        return Ok(done(0.0, e0, 0));
    }
    let e_cap = expect(cap)?;
    if e_cap < target - tol {
        return Err(Error::Infeasible {
            fraction,
            best: e_cap / max_phi,
            beta: cap,
        });
    }
    let (mut lo, mut hi) = (0.0, cap);
    let mut best = (cap, e_cap);
    for it in 1..=200 {
        let mid = 0.5 * (lo + hi);
        let e = expect(mid)?;
        if (e - target).abs() <= tol {
            return Ok(done(mid, e, it));
        }
        if e < target {
            lo = mid;
        } else {
            hi = mid;
            best = (mid, e);
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    Ok(done(best.0, best.1, 200))
}
