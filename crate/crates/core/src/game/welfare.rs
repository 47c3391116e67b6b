//! Welfare (potential) definitions.
//!
//! A welfare is either a sum of per-resource terms, each a function of the
//! occupancy at one resource, or an arbitrary function of the flat count
//! vector. Every example game in the catalog uses the separable form.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::GameSpec;

/// Closed-form welfare of a single resource as a function of its occupancy.
///
/// `k` is the number of agents from the counted populations at the resource,
/// `n` the total player count of the game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum ResourceFn {
    /// `slope * k`
    Linear { slope: f64 },
    /// `min(slope * k, cap_per_player * n_counted)` where `n_counted` is the
    /// combined size of the counted populations.
    MinLinear { slope: f64, cap_per_player: f64 },
    /// `scale * (exp(rate * k / n) - 1)`
    ExpFraction { rate: f64, scale: f64 },
    /// `coef * k^exponent / n^n_power`
    Power {
        coef: f64,
        exponent: i32,
        n_power: i32,
    },
    /// `value * (1 - prod_l (1 - detect[l])^{k_l})` with one detection
    /// probability per population.
    Detection { value: f64, detect: Vec<f64> },
    /// `values[k]`; `k` beyond the table is an evaluation error caught at
    /// game construction.
    Table { values: Vec<f64> },
}

/// One additive welfare term attached to a resource.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceTerm {
    pub resource: usize,
    /// Populations whose agents count toward `k`; `None` counts everyone.
    #[serde(default)]
    pub counted: Option<Vec<usize>>,
    pub func: ResourceFn,
}

pub type DirectFn = Arc<dyn Fn(&[u32]) -> f64 + Send + Sync>;

/// Potential function of a semi-anonymous game.
#[derive(Clone)]
pub enum Welfare {
    Separable(Vec<ResourceTerm>),
    /// Arbitrary function of the flat count vector.
    Direct(DirectFn),
    /// `(inner - shift) / scale`
    Affine {
        inner: Box<Welfare>,
        shift: f64,
        scale: f64,
    },
}

impl fmt::Debug for Welfare {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Welfare::Separable(terms) => f.debug_tuple("Separable").field(terms).finish(),
            Welfare::Direct(_) => f.write_str("Direct(<fn>)"),
            Welfare::Affine {
                inner,
                shift,
                scale,
            } => f
                .debug_struct("Affine")
                .field("inner", inner)
                .field("shift", shift)
                .field("scale", scale)
                .finish(),
        }
    }
}

/// Single-agent move expressed on flat slot indices: one agent leaves
/// `from` and joins `to`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Patch {
    pub from: usize,
    pub to: usize,
}

#[inline]
fn patched(counts: &[u32], idx: usize, patch: Option<Patch>) -> u32 {
    let mut c = counts[idx];
    if let Some(p) = patch {
        if p.from == idx {
            c -= 1;
        }
        if p.to == idx {
            c += 1;
        }
    }
    c
}

impl ResourceFn {
    pub(crate) fn eval(&self, per_pop: &[u32], k: u32, n: u32, n_counted: u32) -> f64 {
        let kf = f64::from(k);
        let nf = f64::from(n.max(1));
        match self {
            ResourceFn::Linear { slope } => slope * kf,
            ResourceFn::MinLinear {
                slope,
                cap_per_player,
            } => (slope * kf).min(cap_per_player * f64::from(n_counted)),
            ResourceFn::ExpFraction { rate, scale } => scale * ((rate * kf / nf).exp() - 1.0),
            ResourceFn::Power {
                coef,
                exponent,
                n_power,
            } => coef * kf.powi(*exponent) / nf.powi(*n_power),
            ResourceFn::Detection { value, detect } => {
                let miss: f64 = per_pop
                    .iter()
                    .zip(detect)
                    .map(|(&c, &p)| (1.0 - p).powi(c as i32))
                    .product();
                value * (1.0 - miss)
            }
            ResourceFn::Table { values } => values.get(k as usize).copied().unwrap_or(f64::NAN),
        }
    }
}

impl Welfare {
    /// Evaluate at a flat count vector, optionally with a pending move applied.
    pub(crate) fn eval_patched(
        &self,
        game: &GameSpec,
        counts: &[u32],
        patch: Option<Patch>,
    ) -> f64 {
        match self {
            Welfare::Separable(terms) => terms
                .iter()
                .map(|t| term_value(game, t, counts, patch))
                .sum(),
            Welfare::Direct(f) => match patch {
                None => f(counts),
                Some(p) => {
                    let mut moved = counts.to_vec();
                    moved[p.from] -= 1;
                    moved[p.to] += 1;
                    f(&moved)
                }
            },
            Welfare::Affine {
                inner,
                shift,
                scale,
            } => (inner.eval_patched(game, counts, patch) - shift) / scale,
        }
    }

    /// `phi(after move) - phi(before)`, touching only the affected terms for
    /// separable welfares.
    pub(crate) fn move_delta(&self, game: &GameSpec, counts: &[u32], patch: Patch) -> f64 {
        if patch.from == patch.to {
            return 0.0;
        }
        match self {
            Welfare::Separable(terms) => {
                let r_from = game.slot_resource(patch.from);
                let r_to = game.slot_resource(patch.to);
                terms
                    .iter()
                    .filter(|t| t.resource == r_from || t.resource == r_to)
                    .map(|t| {
                        term_value(game, t, counts, Some(patch)) - term_value(game, t, counts, None)
                    })
                    .sum()
            }
            Welfare::Direct(_) => {
                self.eval_patched(game, counts, Some(patch)) - self.eval_patched(game, counts, None)
            }
            Welfare::Affine { inner, scale, .. } => inner.move_delta(game, counts, patch) / scale,
        }
    }

    pub fn is_separable(&self) -> bool {
        match self {
            Welfare::Separable(_) => true,
            Welfare::Direct(_) => false,
            Welfare::Affine { inner, .. } => inner.is_separable(),
        }
    }

    /// JSON description for run manifests.
    pub fn describe(&self) -> serde_json::Value {
        match self {
            Welfare::Separable(terms) => serde_json::json!({ "kind": "separable", "terms": terms }),
            Welfare::Direct(_) => serde_json::json!({ "kind": "direct" }),
            Welfare::Affine {
                inner,
                shift,
                scale,
            } => serde_json::json!({
                "kind": "affine",
                "shift": shift,
                "scale": scale,
                "inner": inner.describe(),
            }),
        }
    }
}

fn term_value(game: &GameSpec, term: &ResourceTerm, counts: &[u32], patch: Option<Patch>) -> f64 {
    let m = game.m();
    let mut per_pop = [0u32; 8];
    let mut per_pop_vec;
    let per_pop: &mut [u32] = if m <= per_pop.len() {
        &mut per_pop[..m]
    } else {
        per_pop_vec = vec![0u32; m];
        &mut per_pop_vec[..]
    };
    for &(pop, flat) in game.resource_slots(term.resource) {
        per_pop[pop] = patched(counts, flat, patch);
    }
    term_at(game, term, per_pop)
}

/// Value of one term given the per-population counts at its resource.
pub(crate) fn term_at(game: &GameSpec, term: &ResourceTerm, per_pop: &[u32]) -> f64 {
    let (k, n_counted) = match &term.counted {
        None => (per_pop.iter().sum(), game.n()),
        Some(list) => (
            list.iter().map(|&p| per_pop[p]).sum(),
            list.iter().map(|&p| game.populations()[p].size).sum(),
        ),
    };
    term.func.eval(per_pop, k, game.n(), n_counted)
}
