//! Properties of the potential over an enumerated state space.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};

use super::{GameSpec, StateSpace, Welfare};

/// How a Lipschitz value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LipschitzKind {
    /// Maximum over every single-agent move. Any two states are joined by a
    /// path of `|x - y|_1 / 2` moves along which the L1 distance adds up, so
    /// the neighbor maximum is the global constant.
    Exact,
    /// Maximum over randomly sampled moves; a lower bound.
    SampledLowerBound,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LipschitzEstimate {
    pub lambda: f64,
    pub kind: LipschitzKind,
    pub pairs_checked: u64,
}

/// Lipschitz constant of the potential with respect to the L1 norm on
/// occupancy fractions (counts divided by `n`).
pub fn lipschitz_estimate(space: &StateSpace) -> LipschitzEstimate {
    let game = space.game();
    let step = 2.0 / f64::from(game.n().max(1));
    let phi = space.potentials();
    let mut best = 0.0f64;
    let mut pairs = 0u64;
    for i in 0..space.len() {
        let c = space.counts(i);
        for l in 0..game.m() {
            for from in game.slots(l) {
                if c[from] == 0 {
                    continue;
                }
                for to in game.slots(l) {
                    if to == from {
                        continue;
                    }
                    let j = space.neighbor(i, from, to);
                    best = best.max((phi[j] - phi[i]).abs() / step);
                    pairs += 1;
                }
            }
        }
    }
    LipschitzEstimate {
        lambda: best,
        kind: LipschitzKind::Exact,
        pairs_checked: pairs,
    }
}

/// Sampled Lipschitz lower bound for games too large to enumerate: random
/// states (uniform over each population's compositions is not needed; any
/// valid state works) and random moves.
pub fn lipschitz_sampled<R: Rng>(game: &GameSpec, budget: u64, rng: &mut R) -> LipschitzEstimate {
    let step = 2.0 / f64::from(game.n().max(1));
    let mut best = 0.0f64;
    let mut pairs = 0u64;
    let mut counts = vec![0u32; game.sigma()];
    for _ in 0..budget {
        counts.iter_mut().for_each(|c| *c = 0);
        for (l, p) in game.populations().iter().enumerate() {
            let slots = game.slots(l);
            for _ in 0..p.size {
                counts[rng.gen_range(slots.clone())] += 1;
            }
        }
        let l = rng.gen_range(0..game.m());
        let slots = game.slots(l);
        if slots.len() < 2 || game.populations()[l].size == 0 {
            continue;
        }
        let occupied: Vec<usize> = slots.clone().filter(|&f| counts[f] > 0).collect();
        let from = occupied[rng.gen_range(0..occupied.len())];
        let to = loop {
            let t = rng.gen_range(slots.clone());
            if t != from {
                break t;
            }
        };
        best = best.max(game.move_delta_flat(&counts, from, to).abs() / step);
        pairs += 1;
    }
    LipschitzEstimate {
        lambda: best,
        kind: LipschitzKind::SampledLowerBound,
        pairs_checked: pairs,
    }
}

/// Affine map taking the raw potential onto `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AffineMap {
    pub shift: f64,
    pub scale: f64,
}

impl AffineMap {
    pub fn apply(&self, raw: f64) -> f64 {
        (raw - self.shift) / self.scale
    }

    /// Rationality on the normalized scale giving the same dynamics as
    /// `beta_raw` on the raw scale.
    pub fn beta_normalized(&self, beta_raw: f64) -> f64 {
        beta_raw * self.scale
    }

    pub fn beta_raw(&self, beta_normalized: f64) -> f64 {
        beta_normalized / self.scale
    }
}

/// Game whose potential is `(phi - min) / (max - min)`, with `beta` rescaled
/// so the logit dynamics are unchanged.
pub fn normalize_potential(space: &StateSpace) -> Result<(GameSpec, AffineMap)> {
    let lo = space.min_potential();
    let hi = space.max_potential();
    if hi <= lo {
        return Err(Error::DegeneratePotential { value: hi });
    }
    let map = AffineMap {
        shift: lo,
        scale: hi - lo,
    };
    let game = space.game();
    let normalized = game
        .with_welfare(Welfare::Affine {
            inner: Box::new(game.welfare().clone()),
            shift: map.shift,
            scale: map.scale,
        })?
        .with_beta(map.beta_normalized(game.beta()))?;
    Ok((normalized, map))
}

/// Pure Nash equilibria: states where no single move strictly raises the
/// potential (equivalently, the mover's utility).
pub fn nash_equilibria(space: &StateSpace) -> Vec<usize> {
    let game = space.game();
    let phi = space.potentials();
    (0..space.len())
        .filter(|&i| {
            let c = space.counts(i);
            (0..game.m()).all(|l| {
                game.slots(l).filter(|&f| c[f] > 0).all(|from| {
                    game.slots(l)
                        .filter(|&to| to != from)
                        .all(|to| phi[space.neighbor(i, from, to)] <= phi[i])
                })
            })
        })
        .collect()
}
