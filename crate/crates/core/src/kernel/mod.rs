//! Discrete transition kernels of the three learning dynamics.
//!
//! Each kernel `M` is row-stochastic over an enumerated [`StateSpace`]; the
//! continuous-time process is `mu(t) = mu(0) exp(r t (M - I))` where `r` is
//! the kernel's `global_rate`.
//!
//! * [`Dynamic::Mlll`]: every agent at a (population, action) pair holding
//!   `z` agents ticks at rate `alpha n / z`, so each occupied pair fires at
//!   rate `alpha n`. Discretely: pick a pair with probability `1/sigma`
//!   (`sigma` = sum of action-set sizes); an empty pair is a self-loop.
//! * [`Dynamic::Lll`]: every agent ticks at rate 1; a pair with `c` agents is
//!   picked with probability `c/n`.
//! * [`Dynamic::Prior`]: rates divide by the number of agents of *any*
//!   population sharing the action. Pick one of the `s` actions of the union
//!   uniformly, then a uniformly random agent playing it; an unplayed action
//!   is a self-loop.
//!
//! The picked agent then re-draws its action from the logit rule over its
//! population's action set.

mod distribution;
mod stationary;

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{GameSpec, StateSpace};

pub use distribution::{Distribution, MASS_TOLERANCE};
pub(crate) use stationary::{ln_factorial, log_multiplicity};
pub use stationary::{
    stationary_closed_form, stationary_numeric, stationary_numeric_with, StationaryMethod,
    DENSE_CAP,
};

/// Tolerance on row sums.
pub const ROW_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dynamic {
    /// Population-local clock rates `alpha n / z_i`.
    Mlll,
    /// Standard log-linear learning, unit clock rates.
    Lll,
    /// Clock rates divided by the cross-population count at the action.
    Prior,
}

impl Dynamic {
    pub const ALL: [Dynamic; 3] = [Dynamic::Mlll, Dynamic::Lll, Dynamic::Prior];

    pub fn name(self) -> &'static str {
        match self {
            Dynamic::Mlll => "mlll",
            Dynamic::Lll => "lll",
            Dynamic::Prior => "prior",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mlll" | "modified" => Some(Dynamic::Mlll),
            "lll" | "standard" => Some(Dynamic::Lll),
            "prior" | "prior_variant" => Some(Dynamic::Prior),
            _ => None,
        }
    }

    /// Continuous-time rate that uniformizes the dynamic on `game`.
    pub fn global_rate(self, game: &GameSpec) -> f64 {
        let n = f64::from(game.n());
        match self {
            Dynamic::Mlll => game.alpha() * game.sigma() as f64 * n,
            Dynamic::Lll => n,
            Dynamic::Prior => game.alpha() * game.s() as f64 * n,
        }
    }
}

impl std::fmt::Display for Dynamic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Sparse row-stochastic kernel (CSR, columns sorted within each row).
#[derive(Debug, Clone)]
pub struct Kernel {
    space: Arc<StateSpace>,
    game: GameSpec,
    dynamic: Dynamic,
    global_rate: f64,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

/// Logit probabilities over the destinations of one mover; `phi` holds the
/// potential after each candidate move.
pub(crate) fn logit(beta: f64, phi: &[f64], out: &mut [f64]) {
    let max = phi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, &p) in out.iter_mut().zip(phi) {
        *o = (beta * (p - max)).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

impl Kernel {
    /// Build the kernel of `dynamic` for `game` over `space`. `space` must be
    /// the enumeration of a game with the same populations and welfare;
    /// `game` supplies `alpha` and `beta`.
    pub fn build(game: &GameSpec, space: Arc<StateSpace>, dynamic: Dynamic) -> Result<Self> {
        let sg = space.game();
        if sg.populations() != game.populations() {
            return Err(Error::InvalidArgument(
                "state space was enumerated for a different population structure".into(),
            ));
        }
        let beta = game.beta();
        let n = f64::from(game.n());
        let sigma = game.sigma() as f64;
        let s = game.s() as f64;
        let phi = space.potentials();

        let rows: Vec<Vec<(usize, f64)>> = (0..space.len())
            .into_par_iter()
            .map(|i| {
                let c = space.counts(i);
                let mut row: Vec<(usize, f64)> = Vec::new();
                let mut dest_phi = Vec::new();
                let mut dest_idx = Vec::new();
                let mut probs = Vec::new();
                let mut push_mover = |pop: usize, from: usize, weight: f64, row: &mut Vec<_>| {
                    dest_phi.clear();
                    dest_idx.clear();
                    for to in game.slots(pop) {
                        let j = if to == from {
                            i
                        } else {
                            space.neighbor(i, from, to)
                        };
                        dest_idx.push(j);
                        dest_phi.push(phi[j]);
                    }
                    probs.resize(dest_phi.len(), 0.0);
                    logit(beta, &dest_phi, &mut probs);
                    for (&j, &p) in dest_idx.iter().zip(probs.iter()) {
                        if j != i {
                            row.push((j, weight * p));
                        }
                    }
                };
                match dynamic {
                    Dynamic::Mlll => {
                        for pop in 0..game.m() {
                            for from in game.slots(pop) {
                                if c[from] > 0 {
                                    push_mover(pop, from, 1.0 / sigma, &mut row);
                                }
                            }
                        }
                    }
                    Dynamic::Lll => {
                        for pop in 0..game.m() {
                            for from in game.slots(pop) {
                                if c[from] > 0 {
                                    push_mover(pop, from, f64::from(c[from]) / n, &mut row);
                                }
                            }
                        }
                    }
                    Dynamic::Prior => {
                        for &a in game.union_actions() {
                            let holders = game.resource_slots(a);
                            let total: u32 = holders.iter().map(|&(_, f)| c[f]).sum();
                            if total == 0 {
                                continue;
                            }
                            for &(pop, from) in holders {
                                if c[from] > 0 {
                                    let w = (1.0 / s) * f64::from(c[from]) / f64::from(total);
                                    push_mover(pop, from, w, &mut row);
                                }
                            }
                        }
                    }
                }
                let off: f64 = row.iter().map(|&(_, v)| v).sum();
                row.push((i, (1.0 - off).max(0.0)));
                row.sort_unstable_by_key(|&(j, _)| j);
                row
            })
            .collect();

        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let nnz: usize = rows.iter().map(Vec::len).sum();
        let mut cols = Vec::with_capacity(nnz);
        let mut vals = Vec::with_capacity(nnz);
        row_ptr.push(0);
        for row in rows {
            for (j, v) in row {
                cols.push(j);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        Ok(Self {
            global_rate: dynamic.global_rate(game),
            space,
            game: game.clone(),
            dynamic,
            row_ptr,
            cols,
            vals,
        })
    }

    /// Enumerate the space (default cap) and build.
    pub fn for_game(game: &GameSpec, dynamic: Dynamic) -> Result<Self> {
        let space = Arc::new(StateSpace::enumerate(game)?);
        Self::build(game, space, dynamic)
    }

    pub fn mlll(game: &GameSpec, space: Arc<StateSpace>) -> Result<Self> {
        Self::build(game, space, Dynamic::Mlll)
    }

    pub fn lll(game: &GameSpec, space: Arc<StateSpace>) -> Result<Self> {
        Self::build(game, space, Dynamic::Lll)
    }

    pub fn prior(game: &GameSpec, space: Arc<StateSpace>) -> Result<Self> {
        Self::build(game, space, Dynamic::Prior)
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn space_arc(&self) -> Arc<StateSpace> {
        Arc::clone(&self.space)
    }

    pub fn game(&self) -> &GameSpec {
        &self.game
    }

    pub fn dynamic(&self) -> Dynamic {
        self.dynamic
    }

    pub fn beta(&self) -> f64 {
        self.game.beta()
    }

    pub fn global_rate(&self) -> f64 {
        self.global_rate
    }

    pub fn len(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// `(column, value)` entries of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()]
            .iter()
            .copied()
            .zip(self.vals[r].iter().copied())
    }

    /// `M(i, j)`.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[r.clone()].binary_search(&j) {
            Ok(pos) => self.vals[r.start + pos],
            Err(_) => 0.0,
        }
    }

    /// `out = mu M` (row vector times kernel).
    pub fn apply_left(&self, mu: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, &m) in mu.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                out[self.cols[k]] += m * self.vals[k];
            }
        }
    }

    /// `out = M f` (kernel times column vector).
    pub fn apply_right(&self, f: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * f[self.cols[k]];
            }
            *o = acc;
        }
    }

    /// Largest deviation of a row sum from 1.
    pub fn max_row_error(&self) -> f64 {
        (0..self.len())
            .map(|i| (self.row(i).map(|(_, v)| v).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Probability that a tick changes the state, from state `i`.
    pub fn move_probability(&self, i: usize) -> f64 {
        1.0 - self.get(i, i)
    }

    /// JSON header describing the kernel for the triplet export.
    pub fn header_json(&self) -> serde_json::Value {
        let states: Vec<&[u32]> = (0..self.len()).map(|i| self.space.counts(i)).collect();
        serde_json::json!({
            "format": "semianon-kernel-triplets",
            "version": 1,
            "dynamic": self.dynamic.name(),
            "beta": self.beta(),
            "alpha": self.game.alpha(),
            "global_rate": self.global_rate,
            "n_states": self.len(),
            "nnz": self.nnz(),
            "populations": self.game.populations(),
            "state_order": "population-major; within a population, descending lexicographic counts",
            "states": states,
        })
    }

    /// Write `row col value` lines (0-based indices, 17 significant digits).
    pub fn write_triplets<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# row\tcol\tvalue")?;
        for i in 0..self.len() {
            for (j, v) in self.row(i) {
                writeln!(w, "{i}\t{j}\t{v:.17e}")?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc as StdArc;

    use super::*;
    use crate::game::{catalog, PopulationSpec, Welfare};

    fn two_state_game(beta: f64, phi0: f64, phi1: f64) -> GameSpec {
        // n = 1 agent, two actions; state (1,0) has phi0, (0,1) has phi1
        GameSpec::new(
            vec![PopulationSpec::new(1, vec![0, 1])],
            Welfare::Direct(StdArc::new(
                move |c: &[u32]| if c[0] == 1 { phi0 } else { phi1 },
            )),
            1.0,
            beta,
        )
        .unwrap()
    }

    #[test]
    fn two_state_mlll_matches_hand_expansion() {
        let (beta, a, b) = (1.7, 0.3, 0.9);
        let k = Kernel::for_game(&two_state_game(beta, a, b), Dynamic::Mlll).unwrap();
        let expect = (beta * b).exp() / (2.0 * ((beta * a).exp() + (beta * b).exp()));
        assert!((k.get(0, 1) - expect).abs() < 1e-15);
        assert!(k.max_row_error() < ROW_TOLERANCE);
    }

    #[test]
    fn beta_zero_spreads_evenly() {
        let g = catalog::example2(4, 1.0, 0.0).unwrap();
        let k = Kernel::for_game(&g, Dynamic::Mlll).unwrap();
        let sigma = g.sigma() as f64;
        for i in 0..k.len() {
            for (j, v) in k.row(i) {
                if j != i {
                    assert!((v - 1.0 / (sigma * 2.0)).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn lll_uniform_two_agents() {
        let g = GameSpec::new(
            vec![PopulationSpec::new(2, vec![0, 1])],
            Welfare::Separable(vec![]),
            1.0,
            0.0,
        )
        .unwrap();
        let k = Kernel::for_game(&g, Dynamic::Lll).unwrap();
        // state 0 = (2,0), state 1 = (1,1)
        assert!((k.get(0, 1) - 0.5).abs() < 1e-15);
        assert!((k.get(0, 0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn prior_equals_mlll_for_one_population() {
        let g = catalog::example4(6, 0.25, 3.0).unwrap();
        let g1 = GameSpec::new(
            vec![PopulationSpec::new(5, vec![0, 1, 2])],
            catalog::example2_welfare(None),
            0.5,
            2.0,
        )
        .unwrap();
        for game in [g1] {
            let a = Kernel::for_game(&game, Dynamic::Mlll).unwrap();
            let b = Kernel::for_game(&game, Dynamic::Prior).unwrap();
            for i in 0..a.len() {
                for j in 0..a.len() {
                    assert!((a.get(i, j) - b.get(i, j)).abs() < 1e-15);
                }
            }
            assert_eq!(a.global_rate(), b.global_rate());
        }
        // disjoint sets but two populations: differ by sigma vs s weights only
        assert_eq!(g.sigma(), 4);
        assert_eq!(g.s(), 3);
    }

    #[test]
    fn sparsity_is_single_moves() {
        let g = catalog::example3(3, 2, 4, 1.0, 1.3).unwrap();
        for d in Dynamic::ALL {
            let k = Kernel::for_game(&g, d).unwrap();
            let sp = k.space();
            for i in 0..k.len() {
                for (j, v) in k.row(i) {
                    assert!(v >= 0.0);
                    if j == i {
                        continue;
                    }
                    let diff: Vec<i64> = sp
                        .counts(i)
                        .iter()
                        .zip(sp.counts(j))
                        .map(|(&a, &b)| i64::from(a) - i64::from(b))
                        .collect();
                    assert_eq!(diff.iter().map(|d| d.abs()).sum::<i64>(), 2);
                    let touched: std::collections::BTreeSet<_> = diff
                        .iter()
                        .enumerate()
                        .filter(|(_, d)| **d != 0)
                        .map(|(f, _)| g.slot_population(f))
                        .collect();
                    assert_eq!(touched.len(), 1);
                }
            }
            assert!(k.max_row_error() < ROW_TOLERANCE);
        }
    }

    #[test]
    fn triplet_export_lists_every_entry() {
        let g = catalog::example2(2, 1.0, 1.0).unwrap();
        let k = Kernel::for_game(&g, Dynamic::Mlll).unwrap();
        let mut buf = Vec::new();
        k.write_triplets(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(lines.len(), k.nnz());
        let mut back = 0.0;
        for l in &lines {
            let parts: Vec<_> = l.split('\t').collect();
            let (i, j, v): (usize, usize, f64) = (
                parts[0].parse().unwrap(),
                parts[1].parse().unwrap(),
                parts[2].parse().unwrap(),
            );
            assert_eq!(v, k.get(i, j));
            back += v;
        }
        assert!((back - k.len() as f64).abs() < 1e-12);
        assert_eq!(k.header_json()["dynamic"], "mlll");
    }
}
