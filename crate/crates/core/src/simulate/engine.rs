//! Event-driven simulation of one replicate at the aggregate level.
//!
//! Agents sharing a (population, action) pair are exchangeable, so their
//! clocks superpose: under the population-local rates every occupied pair
//! fires at rate `alpha n`; under unit rates a pair with `c` agents fires at
//! rate `c`; under the cross-population rates every played action of the
//! union fires at rate `alpha n`, and the waking agent is uniform among the
//! agents playing it.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::{AggregateState, GameSpec};
use crate::kernel::{logit, Dynamic};

/// Default spacing of the sampling grid.
pub const DEFAULT_SAMPLE_DT: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimOptions {
    pub horizon: f64,
    pub sample_dt: f64,
    /// Record the first time the potential reaches this level.
    pub hit_level: Option<f64>,
    /// End the replicate at the hit.
    pub stop_at_hit: bool,
    pub record_states: bool,
    /// End the replicate after this many clock events.
    pub max_events: Option<u64>,
}

impl SimOptions {
    pub fn new(horizon: f64) -> Self {
        Self {
            horizon,
            sample_dt: DEFAULT_SAMPLE_DT,
            hit_level: None,
            stop_at_hit: false,
            record_states: false,
            max_events: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "horizon must be positive and finite, got {}",
                self.horizon
            )));
        }
        if !(self.sample_dt > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "sample spacing must be positive, got {}",
                self.sample_dt
            )));
        }
        Ok(())
    }

    pub fn grid_len(&self) -> usize {
        (self.horizon / self.sample_dt).floor() as usize + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Hit {
    pub time: f64,
    /// Clock events up to and including the hitting one.
    pub events: u64,
}

/// One replicate's path summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trace {
    pub sample_times: Vec<f64>,
    /// Potential at each sample time.
    pub potential: Vec<f64>,
    pub states: Option<Vec<Vec<u32>>>,
    /// Clock events (agent updates, including ones keeping the action).
    pub events: u64,
    /// Events that changed the state.
    pub moves: u64,
    pub hit: Option<Hit>,
    pub final_state: Vec<u32>,
    pub end_time: f64,
    /// `integral_0^end phi(X_t) dt`.
    pub potential_integral: f64,
    /// Clock events per flat slot.
    pub slot_events: Vec<u64>,
    /// Time each flat slot spent occupied.
    pub slot_occupied_time: Vec<f64>,
}

/// Mutable simulation state shared by the static and churn simulators.
pub(crate) struct Engine<'g> {
    pub game: &'g GameSpec,
    pub dynamic: Dynamic,
    pub counts: Vec<u32>,
    pub phi: f64,
    deltas: Vec<f64>,
    probs: Vec<f64>,
}

impl<'g> Engine<'g> {
    pub fn new(game: &'g GameSpec, dynamic: Dynamic, counts: Vec<u32>) -> Self {
        let phi = game.potential_flat(&counts);
        Self {
            game,
            dynamic,
            counts,
            phi,
            deltas: Vec::new(),
            probs: Vec::new(),
        }
    }

    /// Total clock rate in the current state.
    pub fn total_rate(&self) -> f64 {
        let g = self.game;
        let n = f64::from(g.n());
        match self.dynamic {
            Dynamic::Mlll => g.alpha() * n * self.counts.iter().filter(|&&c| c > 0).count() as f64,
            Dynamic::Lll => n,
            Dynamic::Prior => {
                let played = g
                    .union_actions()
                    .iter()
                    .filter(|&&a| g.resource_slots(a).iter().any(|&(_, f)| self.counts[f] > 0))
                    .count();
                g.alpha() * n * played as f64
            }
        }
    }

    /// Flat slot of the agent whose clock fires.
    pub fn pick_mover(&self, rng: &mut ChaCha8Rng) -> usize {
        let g = self.game;
        match self.dynamic {
            Dynamic::Mlll => {
                let occupied = self.counts.iter().filter(|&&c| c > 0).count();
                let mut k = rng.gen_range(0..occupied);
                for (f, &c) in self.counts.iter().enumerate() {
                    if c > 0 {
                        if k == 0 {
                            return f;
                        }
                        k -= 1;
                    }
                }
                unreachable!("occupied slot count out of sync")
            }
            Dynamic::Lll => weighted_slot(&self.counts, g.n(), rng, 0..self.counts.len()),
            Dynamic::Prior => {
                let played: Vec<usize> = g
                    .union_actions()
                    .iter()
                    .copied()
                    .filter(|&a| g.resource_slots(a).iter().any(|&(_, f)| self.counts[f] > 0))
                    .collect();
                let a = played[rng.gen_range(0..played.len())];
                let holders = g.resource_slots(a);
                let total: u32 = holders.iter().map(|&(_, f)| self.counts[f]).sum();
                let mut k = rng.gen_range(0..total);
                for &(_, f) in holders {
                    if k < self.counts[f] {
                        return f;
                    }
                    k -= self.counts[f];
                }
                unreachable!("holder counts out of sync")
            }
        }
    }

    /// Logit re-draw for an agent on flat slot `from`; returns the new slot.
    pub fn logit_move(&mut self, from: usize, rng: &mut ChaCha8Rng) -> usize {
        let g = self.game;
        let pop = g.slot_population(from);
        let slots = g.slots(pop);
        self.deltas.clear();
        for to in slots.clone() {
            self.deltas.push(if to == from {
                0.0
            } else {
                g.move_delta_flat(&self.counts, from, to)
            });
        }
        self.probs.resize(self.deltas.len(), 0.0);
        logit(g.beta(), &self.deltas, &mut self.probs);
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut choice = slots.end - 1;
        for (i, &p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                choice = slots.start + i;
                break;
            }
        }
        if choice != from {
            self.counts[from] -= 1;
            self.counts[choice] += 1;
            self.phi = g.potential_flat(&self.counts);
        }
        choice
    }
}

/// Slot drawn with probability proportional to its count.
pub(crate) fn weighted_slot(
    counts: &[u32],
    total: u32,
    rng: &mut ChaCha8Rng,
    range: std::ops::Range<usize>,
) -> usize {
    let mut k = rng.gen_range(0..total);
    for f in range {
        if k < counts[f] {
            return f;
        }
        k -= counts[f];
    }
    unreachable!("counts do not sum to total")
}

/// Exponential waiting time with the given rate.
pub(crate) fn exp_time(rate: f64, rng: &mut ChaCha8Rng) -> f64 {
    let u: f64 = rng.gen();
    -(1.0 - u).ln() / rate
}

/// Simulate one replicate of `dynamic` from `x0`.
pub fn simulate(
    game: &GameSpec,
    dynamic: Dynamic,
    x0: &AggregateState,
    opts: &SimOptions,
    rng: &mut ChaCha8Rng,
) -> Result<Trace> {
    opts.validate()?;
    let x0 = AggregateState::from_flat(game, x0.counts().to_vec())?;
    let mut eng = Engine::new(game, dynamic, x0.counts().to_vec());
    let width = eng.counts.len();
    let grid = opts.grid_len();
    let mut trace = Trace {
        sample_times: Vec::with_capacity(grid),
        potential: Vec::with_capacity(grid),
        states: opts.record_states.then(Vec::new),
        events: 0,
        moves: 0,
        hit: None,
        final_state: Vec::new(),
        end_time: 0.0,
        potential_integral: 0.0,
        slot_events: vec![0; width],
        slot_occupied_time: vec![0.0; width],
    };
    let hit_now = |phi: f64| opts.hit_level.is_some_and(|h| phi >= h);
    if hit_now(eng.phi) {
        trace.hit = Some(Hit {
            time: 0.0,
            events: 0,
        });
    }
    let mut t = 0.0;
    let mut next_sample = 0usize;
    loop {
        let stop = (trace.hit.is_some() && opts.stop_at_hit)
            || opts.max_events.is_some_and(|m| trace.events >= m);
        let rate = eng.total_rate();
        let t_next = if stop || rate <= 0.0 {
            f64::INFINITY
        } else {
            t + exp_time(rate, rng)
        };
        let seg_end = if stop { t } else { t_next.min(opts.horizon) };
        // the grid stops with the path
        while !stop && next_sample < grid {
            let ts = next_sample as f64 * opts.sample_dt;
            if ts >= t_next {
                break;
            }
            trace.sample_times.push(ts);
            trace.potential.push(eng.phi);
            if let Some(s) = trace.states.as_mut() {
                s.push(eng.counts.clone());
            }
            next_sample += 1;
        }
        let dt = seg_end - t;
        trace.potential_integral += eng.phi * dt;
        for (occ, &c) in trace.slot_occupied_time.iter_mut().zip(&eng.counts) {
            if c > 0 {
                *occ += dt;
            }
        }
        if stop || t_next > opts.horizon {
            trace.end_time = seg_end;
            break;
        }
        t = t_next;
        let from = eng.pick_mover(rng);
        trace.slot_events[from] += 1;
        trace.events += 1;
        if eng.logit_move(from, rng) != from {
            trace.moves += 1;
            if trace.hit.is_none() && hit_now(eng.phi) {
                trace.hit = Some(Hit {
                    time: t,
                    events: trace.events,
                });
            }
        }
    }
    trace.final_state = eng.counts;
    Ok(trace)
}
