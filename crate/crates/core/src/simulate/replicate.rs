//! Independent replicates on a work pool, merged in index order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::game::{AggregateState, GameSpec};
use crate::kernel::Dynamic;

use super::engine::{simulate, SimOptions, Trace};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Generator for replicate `index` under `seed`: ChaCha8 keyed by the seed,
/// one stream per replicate. Streams are independent keystreams, so results
/// do not depend on scheduling.
pub fn replicate_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Mean, standard deviation and 95% half-width of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    pub ci95: f64,
}

impl Summary {
    pub fn of(xs: &[f64]) -> Self {
        let count = xs.len();
        if count == 0 {
            return Self {
                count,
                mean: f64::NAN,
                std: f64::NAN,
                ci95: f64::NAN,
            };
        }
        let mean = xs.iter().sum::<f64>() / count as f64;
        let std = if count > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (count - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self {
            count,
            mean,
            std,
            ci95: Z95 * std / (count as f64).sqrt(),
        }
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.mean - self.ci95, self.mean + self.ci95)
    }
}

/// Replicate-averaged output.
#[derive(Debug, Clone, Serialize)]
pub struct TraceReport {
    pub dynamic: Dynamic,
    pub seed: u64,
    pub replicates: usize,
    pub sample_times: Vec<f64>,
    pub mean_welfare: Vec<f64>,
    pub std_welfare: Vec<f64>,
    /// 95% half-widths of `mean_welfare`.
    pub ci95_welfare: Vec<f64>,
    /// Per replicate hitting time of the hit level, if one was set.
    pub hit_times: Vec<Option<f64>>,
    /// Per replicate clock events up to the hit.
    pub hit_events: Vec<Option<u64>>,
    pub update_counts: Vec<u64>,
    pub move_counts: Vec<u64>,
    /// Per replicate stream index under `seed`.
    pub streams: Vec<u64>,
}

impl TraceReport {
    /// Merge replicate traces given in index order. All traces must share
    /// the grid; replicates that stopped early hold their last value.
    pub fn from_traces(dynamic: Dynamic, seed: u64, traces: &[Trace]) -> Self {
        let grid = traces
            .iter()
            .map(|t| t.sample_times.len())
            .max()
            .unwrap_or(0);
        let sample_times = traces
            .iter()
            .find(|t| t.sample_times.len() == grid)
            .map(|t| t.sample_times.clone())
            .unwrap_or_default();
        let r = traces.len();
        let mut mean_welfare = vec![0.0; grid];
        let mut std_welfare = vec![0.0; grid];
        let mut ci95_welfare = vec![0.0; grid];
        let mut column = Vec::with_capacity(r);
        for g in 0..grid {
            column.clear();
            column.extend(traces.iter().map(|t| {
                t.potential
                    .get(g)
                    .or(t.potential.last())
                    .copied()
                    .unwrap_or(f64::NAN)
            }));
            let s = Summary::of(&column);
            mean_welfare[g] = s.mean;
            std_welfare[g] = s.std;
            ci95_welfare[g] = s.ci95;
        }
        Self {
            dynamic,
            seed,
            replicates: r,
            sample_times,
            mean_welfare,
            std_welfare,
            ci95_welfare,
            hit_times: traces.iter().map(|t| t.hit.map(|h| h.time)).collect(),
            hit_events: traces.iter().map(|t| t.hit.map(|h| h.events)).collect(),
            update_counts: traces.iter().map(|t| t.events).collect(),
            move_counts: traces.iter().map(|t| t.moves).collect(),
            streams: (0..r as u64).collect(),
        }
    }

    /// First grid time at which the replicate-mean welfare reaches `level`.
    pub fn first_crossing(&self, level: f64) -> Option<f64> {
        first_crossing(&self.sample_times, &self.mean_welfare, level)
    }

    /// Summary of hitting times over replicates that hit.
    pub fn hit_summary(&self) -> Summary {
        let xs: Vec<f64> = self.hit_times.iter().flatten().copied().collect();
        Summary::of(&xs)
    }

    pub fn hit_event_summary(&self) -> Summary {
        let xs: Vec<f64> = self
            .hit_events
            .iter()
            .flatten()
            .map(|&e| e as f64)
            .collect();
        Summary::of(&xs)
    }

    pub fn misses(&self) -> usize {
        self.hit_times.iter().filter(|h| h.is_none()).count()
    }
}

/// First `times[i]` with `values[i] >= level`.
pub fn first_crossing(times: &[f64], values: &[f64], level: f64) -> Option<f64> {
    times
        .iter()
        .zip(values)
        .find(|(_, &v)| v >= level)
        .map(|(&t, _)| t)
}

/// Run `replicates` independent paths on the rayon pool.
pub fn run_replicates(
    game: &GameSpec,
    dynamic: Dynamic,
    x0: &AggregateState,
    opts: &SimOptions,
    replicates: usize,
    seed: u64,
) -> Result<TraceReport> {
    let traces = (0..replicates)
        .into_par_iter()
        .map(|i| simulate(game, dynamic, x0, opts, &mut replicate_rng(seed, i as u64)))
        .collect::<Result<Vec<_>>>()?;
    Ok(TraceReport::from_traces(dynamic, seed, &traces))
}

/// Population-local dynamic, one replicate.
pub fn simulate_mlll(
    game: &GameSpec,
    x0: &AggregateState,
    opts: &SimOptions,
    seed: u64,
) -> Result<Trace> {
    simulate(game, Dynamic::Mlll, x0, opts, &mut replicate_rng(seed, 0))
}

/// Unit-rate dynamic, one replicate.
pub fn simulate_lll(
    game: &GameSpec,
    x0: &AggregateState,
    opts: &SimOptions,
    seed: u64,
) -> Result<Trace> {
    simulate(game, Dynamic::Lll, x0, opts, &mut replicate_rng(seed, 0))
}

/// Cross-population dynamic, one replicate.
pub fn simulate_prior(
    game: &GameSpec,
    x0: &AggregateState,
    opts: &SimOptions,
    seed: u64,
) -> Result<Trace> {
    simulate(game, Dynamic::Prior, x0, opts, &mut replicate_rng(seed, 0))
}
