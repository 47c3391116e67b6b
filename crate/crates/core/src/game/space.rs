use std::sync::Arc;

use crate::error::{Error, Result};

use super::{AggregateState, GameSpec};

/// Default cap on the number of enumerated states.
pub const DEFAULT_STATE_CAP: u128 = 1_000_000;

/// `C(n, k)`, saturating at `u128::MAX`.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // exact at every step: acc * (n - i) is divisible by (i + 1)
        acc = match acc.checked_mul(u128::from(n - i)) {
            Some(v) => v / u128::from(i + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Number of ways to place `n` agents on `s` actions.
fn compositions(n: u32, s: usize) -> u128 {
    binomial(u64::from(n) + s as u64 - 1, s as u64 - 1)
}

/// Visit every aggregate state (flat counts, enumeration order) without
/// storing the space. No cardinality cap.
pub fn for_each_state<F: FnMut(&[u32])>(game: &GameSpec, mut f: F) {
    let m = game.m();
    let lists: Vec<Vec<Vec<u32>>> = game
        .populations()
        .iter()
        .map(|p| CompositionIter::new(p.size, p.actions.len()).collect())
        .collect();
    if lists.iter().any(Vec::is_empty) {
        return;
    }
    let mut digit = vec![0usize; m];
    let mut buf = Vec::with_capacity(game.sigma());
    loop {
        buf.clear();
        for (l, d) in digit.iter().enumerate() {
            buf.extend_from_slice(&lists[l][*d]);
        }
        f(&buf);
        let mut l = m;
        loop {
            if l == 0 {
                return;
            }
            l -= 1;
            digit[l] += 1;
            if digit[l] < lists[l].len() {
                break;
            }
            digit[l] = 0;
        }
    }
}

/// Iterates the compositions of `n` into `s` parts in descending
/// lexicographic order: `(n,0,..,0)` first, `(0,..,0,n)` last.
#[derive(Debug, Clone)]
pub struct CompositionIter {
    current: Option<Vec<u32>>,
}

impl CompositionIter {
    pub fn new(n: u32, s: usize) -> Self {
        let mut first = vec![0; s];
        if s > 0 {
            first[0] = n;
        }
        Self {
            current: (s > 0).then_some(first),
        }
    }
}

fn advance(c: &mut [u32]) -> bool {
    let s = c.len();
    if s < 2 {
        return false;
    }
    let Some(i) = (0..s - 1).rev().find(|&i| c[i] > 0) else {
        return false;
    };
    let tail: u32 = c[i + 1..].iter().sum();
    c[i] -= 1;
    for v in &mut c[i + 1..] {
        *v = 0;
    }
    c[i + 1] = tail + 1;
    true
}

impl Iterator for CompositionIter {
    type Item = Vec<u32>;

    fn next(&mut self) -> Option<Vec<u32>> {
        let out = self.current.take()?;
        let mut next = out.clone();
        if advance(&mut next) {
            self.current = Some(next);
        }
        Some(out)
    }
}

/// Rank of a composition in [`CompositionIter`] order (combinatorial number system).
fn rank_composition(c: &[u32]) -> u128 {
    let s = c.len();
    let mut remaining: u64 = c.iter().map(|&v| u64::from(v)).sum();
    let mut rank = 0u128;
    for (i, &ci) in c.iter().enumerate().take(s.saturating_sub(1)) {
        let parts = (s - i) as u64;
        let ci = u64::from(ci);
        // compositions sharing the prefix whose i-th part exceeds ci
        rank += binomial(remaining - ci + parts - 2, parts - 1);
        remaining -= ci;
    }
    rank
}

fn unrank_composition(mut rank: u128, n: u32, s: usize, out: &mut [u32]) {
    let mut remaining = u64::from(n);
    for i in 0..s {
        if i == s - 1 {
            out[i] = remaining as u32;
            break;
        }
        let parts = (s - i) as u64;
        // largest ci such that the count of larger first parts <= rank
        let mut ci = remaining;
        loop {
            let above = binomial(remaining - ci + parts - 2, parts - 1);
            let upto = binomial(remaining - ci + parts - 1, parts - 1);
            if rank < upto {
                rank -= above;
                break;
            }
            ci -= 1;
        }
        out[i] = ci as u32;
        remaining -= ci;
    }
}

/// All aggregate states of a game with a ranking bijection.
///
/// States are ordered population by population (first population most
/// significant), each population's counts in descending lexicographic order.
#[derive(Debug, Clone)]
pub struct StateSpace {
    game: Arc<GameSpec>,
    width: usize,
    strides: Vec<u128>,
    states: Vec<u32>,
    potential: Vec<f64>,
}

impl StateSpace {
    /// Closed-form cardinality `prod_l C(n_l + s_l - 1, s_l - 1)`, saturating.
    pub fn cardinality(game: &GameSpec) -> u128 {
        game.populations()
            .iter()
            .map(|p| compositions(p.size, p.actions.len()))
            .fold(1u128, |acc, c| acc.saturating_mul(c))
    }

    /// Enumerate with the default cap.
    pub fn enumerate(game: &GameSpec) -> Result<Self> {
        Self::enumerate_capped(game, DEFAULT_STATE_CAP)
    }

    pub fn enumerate_capped(game: &GameSpec, cap: u128) -> Result<Self> {
        let count = Self::cardinality(game);
        if count > cap {
            return Err(Error::CardinalityExceeded { count, cap });
        }
        let len = count as usize;
        let m = game.m();
        let width = game.sigma();
        let mut strides = vec![1u128; m];
        for l in (0..m.saturating_sub(1)).rev() {
            let p = &game.populations()[l + 1];
            strides[l] = strides[l + 1] * compositions(p.size, p.actions.len());
        }

        let mut states = Vec::with_capacity(len * width);
        let mut iters: Vec<Vec<Vec<u32>>> = game
            .populations()
            .iter()
            .map(|p| CompositionIter::new(p.size, p.actions.len()).collect())
            .collect();
        let mut digit = vec![0usize; m];
        for _ in 0..len {
            for (l, d) in digit.iter().enumerate() {
                states.extend_from_slice(&iters[l][*d]);
            }
            for l in (0..m).rev() {
                digit[l] += 1;
                if digit[l] < iters[l].len() {
                    break;
                }
                digit[l] = 0;
            }
        }
        iters.clear();

        let potential = states
            .chunks_exact(width.max(1))
            .take(len)
            .map(|c| game.potential_flat(c))
            .collect();
        Ok(Self {
            game: Arc::new(game.clone()),
            width,
            strides,
            states,
            potential,
        })
    }

    pub fn game(&self) -> &GameSpec {
        &self.game
    }

    pub fn len(&self) -> usize {
        self.potential.len()
    }

    pub fn is_empty(&self) -> bool {
        self.potential.is_empty()
    }

    /// Flat counts of state `i`.
    pub fn counts(&self, i: usize) -> &[u32] {
        &self.states[i * self.width..(i + 1) * self.width]
    }

    pub fn state(&self, i: usize) -> AggregateState {
        AggregateState::from_flat_unchecked(self.counts(i).to_vec())
    }

    /// Potential of every state, in index order.
    pub fn potentials(&self) -> &[f64] {
        &self.potential
    }

    /// Index of a flat count vector; `None` if it is not a state of this game.
    pub fn index_of(&self, counts: &[u32]) -> Option<usize> {
        if counts.len() != self.width {
            return None;
        }
        let mut idx = 0u128;
        for (l, p) in self.game.populations().iter().enumerate() {
            let part = &counts[self.game.slots(l)];
            if part.iter().map(|&c| u64::from(c)).sum::<u64>() != u64::from(p.size) {
                return None;
            }
            idx += rank_composition(part) * self.strides[l];
        }
        Some(idx as usize)
    }

    pub fn index(&self, x: &AggregateState) -> Option<usize> {
        self.index_of(x.counts())
    }

    /// Counts of state `i` recomputed from its rank (inverse of `index_of`).
    pub fn unrank(&self, i: usize) -> Vec<u32> {
        let mut out = vec![0u32; self.width];
        let mut rest = i as u128;
        for (l, p) in self.game.populations().iter().enumerate() {
            let r = rest / self.strides[l];
            rest %= self.strides[l];
            unrank_composition(r, p.size, p.actions.len(), &mut out[self.game.slots(l)]);
        }
        out
    }

    /// Index of the state reached from `i` when one agent moves between two
    /// flat slots of the same population.
    pub fn neighbor(&self, i: usize, from: usize, to: usize) -> usize {
        let mut c = self.counts(i).to_vec();
        c[from] -= 1;
        c[to] += 1;
        self.index_of(&c)
            .expect("move stays inside the state space")
    }

    pub fn max_potential(&self) -> f64 {
        self.potential
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_potential(&self) -> f64 {
        self.potential.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn argmax_potential(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.potential.iter().enumerate() {
            if v > self.potential[best] {
                best = i;
            }
        }
        best
    }
}
