//! Semi-anonymous potential games.
//!
//! Players are partitioned into populations that share an action set. The
//! dynamics only ever see the aggregate state: for each population, how many
//! of its members play each of its actions. States are integer counts laid out
//! in one flat vector, population by population; a *slot* is the flat index of
//! one (population, action) pair.

pub mod catalog;
pub mod properties;
mod space;
mod welfare;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use space::{binomial, for_each_state, CompositionIter, StateSpace, DEFAULT_STATE_CAP};
pub(crate) use welfare::{term_at, Patch};
pub use welfare::{DirectFn, ResourceFn, ResourceTerm, Welfare};

/// One population: its size and its ordered action set (global action ids).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub size: u32,
    pub actions: Vec<usize>,
}

impl PopulationSpec {
    pub fn new(size: u32, actions: Vec<usize>) -> Self {
        Self { size, actions }
    }
}

/// A static semi-anonymous potential game together with the learning
/// parameters `alpha` (clock-rate scale) and `beta` (rationality).
#[derive(Debug, Clone)]
pub struct GameSpec {
    populations: Vec<PopulationSpec>,
    welfare: Welfare,
    alpha: f64,
    beta: f64,
    offsets: Vec<usize>,
    slot_resource: Vec<usize>,
    slot_population: Vec<usize>,
    union: Vec<usize>,
    // resource id -> [(population, flat slot)]
    resource_slots: Vec<Vec<(usize, usize)>>,
    n: u32,
}

impl GameSpec {
    /// Build a game; every population must be nonempty.
    pub fn new(
        populations: Vec<PopulationSpec>,
        welfare: Welfare,
        alpha: f64,
        beta: f64,
    ) -> Result<Self> {
        Self::build(populations, welfare, alpha, beta, false)
    }

    /// Like [`GameSpec::new`] but tolerates empty populations, which the
    /// time-varying simulator needs between churn events.
    pub fn new_allow_empty(
        populations: Vec<PopulationSpec>,
        welfare: Welfare,
        alpha: f64,
        beta: f64,
    ) -> Result<Self> {
        Self::build(populations, welfare, alpha, beta, true)
    }

    fn build(
        populations: Vec<PopulationSpec>,
        welfare: Welfare,
        alpha: f64,
        beta: f64,
        allow_empty: bool,
    ) -> Result<Self> {
        if populations.is_empty() {
            return Err(Error::InvalidGame("no populations".into()));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidGame(format!(
                "alpha must be positive, got {alpha}"
            )));
        }
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::InvalidGame(format!(
                "beta must be nonnegative, got {beta}"
            )));
        }
        let mut offsets = Vec::with_capacity(populations.len() + 1);
        let mut slot_resource = Vec::new();
        let mut slot_population = Vec::new();
        let mut union = BTreeSet::new();
        let mut n: u32 = 0;
        offsets.push(0);
        for (l, p) in populations.iter().enumerate() {
            if p.size == 0 && !allow_empty {
                return Err(Error::InvalidGame(format!("population {l} is empty")));
            }
            if p.actions.is_empty() {
                return Err(Error::InvalidGame(format!("population {l} has no actions")));
            }
            let distinct: BTreeSet<_> = p.actions.iter().collect();
            if distinct.len() != p.actions.len() {
                return Err(Error::InvalidGame(format!(
                    "population {l} has duplicate actions"
                )));
            }
            for &a in &p.actions {
                slot_resource.push(a);
                slot_population.push(l);
                union.insert(a);
            }
            offsets.push(slot_resource.len());
            n = n
                .checked_add(p.size)
                .ok_or_else(|| Error::InvalidGame("player count overflows".into()))?;
        }
        let max_res = union.iter().copied().max().unwrap_or(0);
        let mut resource_slots = vec![Vec::new(); max_res + 1];
        for (flat, (&r, &l)) in slot_resource.iter().zip(&slot_population).enumerate() {
            resource_slots[r].push((l, flat));
        }
        let game = Self {
            populations,
            welfare,
            alpha,
            beta,
            offsets,
            slot_resource,
            slot_population,
            union: union.into_iter().collect(),
            resource_slots,
            n,
        };
        game.validate_welfare()?;
        Ok(game)
    }

    fn validate_welfare(&self) -> Result<()> {
        fn check(w: &Welfare, game: &GameSpec) -> Result<()> {
            match w {
                Welfare::Separable(terms) => {
                    for t in terms {
                        if let Some(list) = &t.counted {
                            if let Some(&bad) = list.iter().find(|&&p| p >= game.m()) {
                                return Err(Error::InvalidGame(format!(
                                    "welfare term on resource {} counts unknown population {bad}",
                                    t.resource
                                )));
                            }
                        }
                        match &t.func {
                            ResourceFn::Table { values } => {
                                if values.len() <= game.n as usize {
                                    return Err(Error::InvalidGame(format!(
                                        "table for resource {} has {} entries, needs {} (counts 0..={})",
                                        t.resource,
                                        values.len(),
                                        game.n + 1,
                                        game.n
                                    )));
                                }
                            }
                            ResourceFn::Detection { detect, .. } => {
                                if detect.len() != game.m() {
                                    return Err(Error::InvalidGame(format!(
                                        "detection term on resource {} needs {} probabilities",
                                        t.resource,
                                        game.m()
                                    )));
                                }
                            }
                            _ => {}
                        }
                    }
                    Ok(())
                }
                Welfare::Direct(_) => Ok(()),
                Welfare::Affine { inner, scale, .. } => {
                    if !(scale.is_finite() && *scale != 0.0) {
                        return Err(Error::InvalidGame("affine scale must be nonzero".into()));
                    }
                    check(inner, game)
                }
            }
        }
        check(&self.welfare, self)
    }

    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        let mut g = self.clone();
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::InvalidGame(format!(
                "beta must be nonnegative, got {beta}"
            )));
        }
        g.beta = beta;
        Ok(g)
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidGame(format!(
                "alpha must be positive, got {alpha}"
            )));
        }
        let mut g = self.clone();
        g.alpha = alpha;
        Ok(g)
    }

    /// Same game with different population sizes.
    pub fn with_sizes(&self, sizes: &[u32]) -> Result<Self> {
        if sizes.len() != self.m() {
            return Err(Error::InvalidGame(format!(
                "expected {} population sizes, got {}",
                self.m(),
                sizes.len()
            )));
        }
        let pops = self
            .populations
            .iter()
            .zip(sizes)
            .map(|(p, &size)| PopulationSpec::new(size, p.actions.clone()))
            .collect();
        Self::new_allow_empty(pops, self.welfare.clone(), self.alpha, self.beta)
    }

    pub fn with_welfare(&self, welfare: Welfare) -> Result<Self> {
        Self::build(
            self.populations.clone(),
            welfare,
            self.alpha,
            self.beta,
            self.populations.iter().any(|p| p.size == 0),
        )
    }

    pub fn populations(&self) -> &[PopulationSpec] {
        &self.populations
    }

    pub fn welfare(&self) -> &Welfare {
        &self.welfare
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Number of populations.
    pub fn m(&self) -> usize {
        self.populations.len()
    }

    /// Total number of players.
    pub fn n(&self) -> u32 {
        self.n
    }

    /// Size of the union of all action sets.
    pub fn s(&self) -> usize {
        self.union.len()
    }

    /// Sum of the action-set sizes.
    pub fn sigma(&self) -> usize {
        self.slot_resource.len()
    }

    pub fn union_actions(&self) -> &[usize] {
        &self.union
    }

    /// Flat slot range of population `l`.
    pub fn slots(&self, l: usize) -> std::ops::Range<usize> {
        self.offsets[l]..self.offsets[l + 1]
    }

    pub fn slot(&self, l: usize, k: usize) -> usize {
        self.offsets[l] + k
    }

    pub fn slot_resource(&self, flat: usize) -> usize {
        self.slot_resource[flat]
    }

    pub fn slot_population(&self, flat: usize) -> usize {
        self.slot_population[flat]
    }

    /// `(population, flat slot)` pairs of every population that can play `resource`.
    pub fn resource_slots(&self, resource: usize) -> &[(usize, usize)] {
        self.resource_slots
            .get(resource)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Potential of a state.
    pub fn potential(&self, x: &AggregateState) -> f64 {
        self.welfare.eval_patched(self, &x.counts, None)
    }

    pub(crate) fn potential_flat(&self, counts: &[u32]) -> f64 {
        self.welfare.eval_patched(self, counts, None)
    }

    pub(crate) fn move_delta_flat(&self, counts: &[u32], from: usize, to: usize) -> f64 {
        self.welfare.move_delta(self, counts, Patch { from, to })
    }

    /// Utility change of one agent of population `l` moving from its action
    /// slot `from` to slot `to`; equal to the potential difference.
    pub fn marginal_utility(
        &self,
        x: &AggregateState,
        l: usize,
        from: usize,
        to: usize,
    ) -> Result<f64> {
        let s_l = self.populations[l].actions.len();
        if from >= s_l || to >= s_l {
            return Err(Error::InvalidArgument(format!(
                "population {l} has {s_l} actions; got slots {from} -> {to}"
            )));
        }
        let f = self.slot(l, from);
        if x.counts[f] == 0 {
            return Err(Error::EmptySlot {
                population: l,
                slot: from,
            });
        }
        Ok(self.move_delta_flat(&x.counts, f, self.slot(l, to)))
    }

    /// State with every agent of each population on the given slot.
    pub fn concentrated_state(&self, slot_per_population: &[usize]) -> Result<AggregateState> {
        if slot_per_population.len() != self.m() {
            return Err(Error::InvalidState(format!(
                "expected {} slots, got {}",
                self.m(),
                slot_per_population.len()
            )));
        }
        let mut counts = vec![0u32; self.sigma()];
        for (l, &k) in slot_per_population.iter().enumerate() {
            if k >= self.populations[l].actions.len() {
                return Err(Error::InvalidState(format!(
                    "population {l} has no slot {k}"
                )));
            }
            counts[self.slot(l, k)] = self.populations[l].size;
        }
        Ok(AggregateState { counts })
    }
}

/// Occupancy counts, population by population.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AggregateState {
    counts: Vec<u32>,
}

impl AggregateState {
    /// Build from nested per-population counts, validating sums.
    pub fn new(game: &GameSpec, counts: Vec<Vec<u32>>) -> Result<Self> {
        if counts.len() != game.m() {
            return Err(Error::InvalidState(format!(
                "expected {} populations, got {}",
                game.m(),
                counts.len()
            )));
        }
        let flat: Vec<u32> = counts.into_iter().flatten().collect();
        Self::from_flat(game, flat)
    }

    pub fn from_flat(game: &GameSpec, counts: Vec<u32>) -> Result<Self> {
        if counts.len() != game.sigma() {
            return Err(Error::InvalidState(format!(
                "expected {} slots, got {}",
                game.sigma(),
                counts.len()
            )));
        }
        for (l, p) in game.populations().iter().enumerate() {
            let total: u64 = counts[game.slots(l)].iter().map(|&c| u64::from(c)).sum();
            if total != u64::from(p.size) {
                return Err(Error::InvalidState(format!(
                    "population {l} counts sum to {total}, expected {}",
                    p.size
                )));
            }
        }
        Ok(Self { counts })
    }

    pub(crate) fn from_flat_unchecked(counts: Vec<u32>) -> Self {
        Self { counts }
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn population<'a>(&'a self, game: &GameSpec, l: usize) -> &'a [u32] {
        &self.counts[game.slots(l)]
    }

    /// Occupancy fractions `count / n`.
    pub fn fractions(&self, game: &GameSpec) -> Vec<f64> {
        let n = f64::from(game.n().max(1));
        self.counts.iter().map(|&c| f64::from(c) / n).collect()
    }

    /// State after one agent of population `l` moves from slot `from` to `to`.
    pub fn moved(&self, game: &GameSpec, l: usize, from: usize, to: usize) -> Result<Self> {
        let f = game.slot(l, from);
        if self.counts[f] == 0 {
            return Err(Error::EmptySlot {
                population: l,
                slot: from,
            });
        }
        let mut counts = self.counts.clone();
        counts[f] -= 1;
        counts[game.slot(l, to)] += 1;
        Ok(Self { counts })
    }
}
