//! Replicated studies on the catalog games: convergence time against player
//! count, action-set size and sensor mix, and the slow-versus-fast churn
//! comparison.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{calibrate_beta, SeparableGibbs};
use crate::bounds::{
    check_theorem2_conditions, churn_spacing, churn_warmup, BoundConstants, ChurnCheck, LogValue,
    TheoremReport,
};
use crate::error::{Error, Result};
use crate::game::properties::{lipschitz_estimate, normalize_potential};
use crate::game::{catalog, AggregateState, GameSpec, StateSpace};
use crate::kernel::Dynamic;

use super::churn::{simulate_time_varying, ChurnEvent, ChurnOptions, ChurnTrace};
use super::engine::SimOptions;
use super::replicate::{replicate_rng, run_replicates, Summary};

/// `n ln ln n`.
pub fn n_log_log(n: u32) -> f64 {
    let nf = f64::from(n);
    nf * nf.ln().ln()
}

fn max_potential(game: &GameSpec) -> f64 {
    match SeparableGibbs::new(game) {
        Some(g) => g.max_potential(),
        None => crate::analysis::GibbsEnsemble::from_game(game).max_potential(),
    }
}

/// Example-4 start: the first population on its first resource, the second
/// on its last.
pub fn example4_start(game: &GameSpec) -> Result<AggregateState> {
    let last = game.populations()[1].actions.len() - 1;
    game.concentrated_state(&[0, last])
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BandParams {
    pub ns: Vec<u32>,
    pub alpha: f64,
    /// Stationary welfare as a fraction of the maximum.
    pub fraction: f64,
    /// Convergence when the mean welfare is within this of the stationary one.
    pub eps: f64,
    pub replicates: usize,
    pub seed: u64,
    /// Simulated time as a multiple of `n ln ln n`.
    pub horizon_factor: f64,
    pub sample_dt: f64,
}

impl Default for BandParams {
    fn default() -> Self {
        Self {
            ns: vec![10, 20, 40, 60],
            alpha: 0.25,
            fraction: 0.9,
            eps: 0.05,
            replicates: 500,
            seed: 4,
            horizon_factor: 12.0,
            sample_dt: 0.1,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BandRow {
    pub n: u32,
    pub beta: f64,
    pub stationary_welfare: f64,
    pub target: f64,
    /// First grid time at which the replicate-mean welfare reaches `target`.
    pub time: Option<f64>,
    pub n_log_log_n: f64,
    pub replicates: usize,
    /// Per-replicate first hitting times of `target`, for spread.
    pub replicate_hits: Summary,
}

impl BandRow {
    pub fn ratio(&self) -> Option<f64> {
        self.time.map(|t| t / self.n_log_log_n)
    }
}

/// Convergence time of the replicate-mean welfare from the inefficient
/// equilibrium, for each `n`.
pub fn example4_band(p: &BandParams) -> Result<Vec<BandRow>> {
    p.ns.iter()
        .map(|&n| {
            let g = catalog::example4(n, p.alpha, 0.0)?;
            let cal = calibrate_beta(&g, Dynamic::Mlll, p.fraction)?;
            let g = g.with_beta(cal.beta)?;
            let target = cal.expected_potential - p.eps;
            let mut opts = SimOptions::new(p.horizon_factor * n_log_log(n).max(1.0));
            opts.sample_dt = p.sample_dt;
            opts.hit_level = Some(target);
            let x0 = example4_start(&g)?;
            let report = run_replicates(
                &g,
                Dynamic::Mlll,
                &x0,
                &opts,
                p.replicates,
                p.seed + u64::from(n),
            )?;
            Ok(BandRow {
                n,
                beta: cal.beta,
                stationary_welfare: cal.expected_potential,
                target,
                time: report.first_crossing(target),
                n_log_log_n: n_log_log(n),
                replicates: p.replicates,
                replicate_hits: report.hit_summary(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepParams {
    pub ks: Vec<usize>,
    pub ns: Vec<u32>,
    pub alpha: f64,
    pub fraction: f64,
    pub replicates: usize,
    pub seed: u64,
    pub max_events: u64,
}

impl Default for SweepParams {
    fn default() -> Self {
        Self {
            ks: vec![5, 10, 15],
            ns: (4..=50).step_by(2).collect(),
            alpha: 0.25,
            fraction: 0.9,
            replicates: 200,
            seed: 5,
            max_events: 50_000_000,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub k: usize,
    pub n: u32,
    pub beta: f64,
    pub max_welfare: f64,
    pub target: f64,
    /// Per-replicate first hitting times of `target`.
    pub hit_times: Summary,
    /// Replicates that did not hit within the event cap.
    pub misses: usize,
}

/// Example-5 start: every agent on the resource farthest from the shared one.
pub fn example5_start(game: &GameSpec) -> Result<AggregateState> {
    let last = game.populations()[1].actions.len() - 1;
    game.concentrated_state(&[0, last])
}

/// Hitting time of a fraction of the maximum welfare for each `(k, n)`.
pub fn example5_sweep(p: &SweepParams) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for &k in &p.ks {
        for &n in &p.ns {
            let g = catalog::example5(n, k, p.alpha, 0.0)?;
            let cal = calibrate_beta(&g, Dynamic::Mlll, p.fraction)?;
            let g = g.with_beta(cal.beta)?;
            let target = p.fraction * cal.max_potential;
            let mut opts = SimOptions::new(f64::MAX / 4.0);
            opts.sample_dt = f64::MAX / 8.0;
            opts.hit_level = Some(target);
            opts.stop_at_hit = true;
            opts.max_events = Some(p.max_events);
            let x0 = example5_start(&g)?;
            let seed = p.seed ^ ((k as u64) << 32) ^ u64::from(n);
            let report = run_replicates(&g, Dynamic::Mlll, &x0, &opts, p.replicates, seed)?;
            rows.push(SweepRow {
                k,
                n,
                beta: cal.beta,
                max_welfare: cal.max_potential,
                target,
                hit_times: report.hit_summary(),
                misses: report.misses(),
            });
        }
    }
    Ok(rows)
}

/// Greedy assignment: populations in `order`, agents one at a time, each to
/// the action with the largest marginal gain given the agents already
/// placed. Ties go to the later action.
pub fn greedy_assignment(game: &GameSpec, order: &[usize]) -> Result<AggregateState> {
    let mut counts = vec![0u32; game.sigma()];
    for &l in order {
        let pop = game
            .populations()
            .get(l)
            .ok_or_else(|| Error::InvalidArgument(format!("no population {l}")))?;
        for _ in 0..pop.size {
            let base = game.potential_flat(&counts);
            let mut best = (f64::NEG_INFINITY, 0);
            for f in game.slots(l) {
                counts[f] += 1;
                let gain = game.potential_flat(&counts) - base;
                counts[f] -= 1;
                if gain >= best.0 {
                    best = (gain, f);
                }
            }
            counts[best.1] += 1;
        }
    }
    AggregateState::from_flat(game, counts)
}

/// Weakest-first greedy start of the sensor game.
pub fn sensor_start(game: &GameSpec, detection: &[f64]) -> Result<AggregateState> {
    let mut order: Vec<usize> = (0..detection.len()).collect();
    order.sort_by(|&a, &b| detection[a].total_cmp(&detection[b]));
    greedy_assignment(game, &order)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorParams {
    pub n_s: u32,
    pub n_m: u32,
    pub n_ws: Vec<u32>,
    pub values: Vec<f64>,
    pub detection: Vec<f64>,
    pub fraction: f64,
    pub replicates: usize,
    pub seed: u64,
    pub max_events: u64,
}

impl Default for SensorParams {
    fn default() -> Self {
        Self {
            n_s: 1,
            n_m: 5,
            n_ws: (2..=40).collect(),
            values: catalog::SENSOR_VALUES.to_vec(),
            detection: catalog::SENSOR_DETECTION.to_vec(),
            fraction: 0.98,
            replicates: 1000,
            seed: 6,
            max_events: 10_000_000,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SensorRow {
    pub n_w: u32,
    pub dynamic: Dynamic,
    pub beta: f64,
    pub max_welfare: f64,
    pub start_welfare: f64,
    /// Per-replicate update events until the welfare first reaches the
    /// target.
    pub iterations: Summary,
    pub misses: usize,
}

/// Iterations to reach a fraction of the maximum welfare under both
/// dynamics, each with its own calibrated rationality.
pub fn example6_sensor(p: &SensorParams) -> Result<Vec<SensorRow>> {
    let mut rows = Vec::new();
    for &n_w in &p.n_ws {
        let g = catalog::sensor_target(&[p.n_s, p.n_m, n_w], &p.values, &p.detection, 1.0, 0.0)?;
        let x0 = sensor_start(&g, &p.detection)?;
        for dynamic in [Dynamic::Mlll, Dynamic::Lll] {
            let cal = calibrate_beta(&g, dynamic, p.fraction)?;
            let g = g.with_beta(cal.beta)?;
            let target = p.fraction * cal.max_potential;
            let mut opts = SimOptions::new(f64::MAX / 4.0);
            opts.sample_dt = f64::MAX / 8.0;
            opts.hit_level = Some(target);
            opts.stop_at_hit = true;
            opts.max_events = Some(p.max_events);
            let seed = p.seed ^ (u64::from(n_w) << 8) ^ dynamic as u64;
            let report = run_replicates(&g, dynamic, &x0, &opts, p.replicates, seed)?;
            rows.push(SensorRow {
                n_w,
                dynamic,
                beta: cal.beta,
                max_welfare: cal.max_potential,
                start_welfare: g.potential(&x0),
                iterations: report.hit_event_summary(),
                misses: report.misses(),
            });
        }
    }
    Ok(rows)
}

/// First `n_w` at which the population-local dynamic needs fewer iterations
/// than standard log-linear learning with disjoint 95% intervals.
pub fn sensor_crossover(rows: &[SensorRow]) -> Option<u32> {
    let mut n_ws: Vec<u32> = rows.iter().map(|r| r.n_w).collect();
    n_ws.dedup();
    n_ws.into_iter().find(|&n_w| {
        let get = |d| rows.iter().find(|r| r.n_w == n_w && r.dynamic == d);
        match (get(Dynamic::Mlll), get(Dynamic::Lll)) {
            (Some(a), Some(b)) => a.iterations.interval().1 < b.iterations.interval().0,
            _ => false,
        }
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChurnStudyParams {
    /// Agents per population at the start (two populations).
    pub half: u32,
    pub beta: f64,
    pub eps: f64,
    pub constants: BoundConstants,
    /// Arrival/departure pairs in the slow schedule.
    pub pairs: usize,
    /// Speed-up of the fast schedule.
    pub speedup: u32,
    pub replicates: usize,
    pub seed: u64,
    /// Total-variation tolerance of the stationary fast-forward.
    pub tolerance: f64,
}

impl Default for ChurnStudyParams {
    fn default() -> Self {
        Self {
            half: 10,
            beta: 9.0,
            eps: 0.2,
            constants: BoundConstants {
                k: 3.0,
                ..BoundConstants::default()
            },
            pairs: 5,
            speedup: 100,
            replicates: 500,
            seed: 8,
            tolerance: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScheduleOutcome {
    pub spacing: f64,
    pub events: usize,
    pub report: TheoremReport,
    /// Stationary part of the time average (identical for every replicate).
    pub baseline: f64,
    /// Per-replicate transient excess integral.
    pub excess: Summary,
    /// `baseline + mean excess / window`.
    pub time_average: f64,
    /// Plain per-replicate time averages.
    pub plain_average: Summary,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChurnStudy {
    pub lambda: f64,
    pub max_potential: f64,
    pub spacing: LogValue,
    pub warmup: LogValue,
    pub horizon: f64,
    pub slow: ScheduleOutcome,
    pub fast: ScheduleOutcome,
}

impl ChurnStudy {
    /// The fast schedule's time average is below the slow one's, with
    /// disjoint 95% intervals on the transient excess.
    pub fn fast_is_worse(&self) -> bool {
        self.fast.excess.interval().1 < self.slow.excess.interval().0
            && self.fast.baseline == self.slow.baseline
    }
}

/// Alternating arrival/departure events in population 0 starting at `start`.
pub fn alternating_schedule(start: f64, spacing: f64, count: usize) -> Vec<ChurnEvent> {
    (0..count)
        .map(|j| {
            let t = start + j as f64 * spacing;
            if j % 2 == 0 {
                ChurnEvent::arrive(t, 0, None)
            } else {
                ChurnEvent::depart(t, 0)
            }
        })
        .collect()
}

/// Compare time-averaged potential after the warm-up under churn at the
/// theoretical spacing and at a multiple of its rate, on the normalized
/// two-population game of the congestion example.
pub fn churn_study(p: &ChurnStudyParams) -> Result<ChurnStudy> {
    let raw = catalog::example2(2 * p.half, 1.0, 1.0)?;
    let (norm, _) = normalize_potential(&StateSpace::enumerate(&raw)?)?;
    let game = norm.with_beta(p.beta)?;
    let lambda = lipschitz_estimate(&StateSpace::enumerate(&game)?).lambda;
    let spacing = churn_spacing(
        p.constants.c0,
        p.eps,
        p.beta,
        lambda,
        p.constants.k,
        game.s(),
    );
    let warmup = churn_warmup(game.n(), game.m(), game.s(), p.beta, p.eps, p.constants.c0);
    let (Some(lam), Some(wu)) = (spacing.value(), warmup.value()) else {
        return Err(Error::InvalidArgument(
            "churn spacing or warm-up overflows; lower beta".into(),
        ));
    };
    // powers of two keep every event time exact
    let fast_spacing = 2f64.powi((lam / f64::from(p.speedup)).log2().ceil() as i32);
    let slow_spacing = f64::from(p.speedup) * fast_spacing;
    let count = 2 * p.pairs;
    let horizon = (count + 2) as f64 * slow_spacing;
    if wu >= slow_spacing {
        return Err(Error::InvalidArgument(format!(
            "warm-up {wu} exceeds the first churn time {slow_spacing}"
        )));
    }
    let slow = alternating_schedule(slow_spacing, slow_spacing, count);
    let fast = alternating_schedule(slow_spacing, fast_spacing, count * p.speedup as usize);
    let mut opts = ChurnOptions::new(horizon);
    opts.sample_dt = slow_spacing;
    opts.normalize = true;
    opts.average_from = wu;
    opts.fast_forward = Some(p.tolerance);
    opts.exact_transients = true;
    let x0 = game.concentrated_state(&[0, 1])?;
    let run = |events: &[ChurnEvent], spacing: f64, seed: u64| -> Result<ScheduleOutcome> {
        let report = check_theorem2_conditions(&ChurnCheck {
            game0: &game,
            churn: events,
            lambda,
            eps: p.eps,
            constants: p.constants,
            spacing_override: None,
        })?;
        let traces = (0..p.replicates as u64)
            .into_par_iter()
            .map(|i| {
                simulate_time_varying(
                    &game,
                    x0.counts(),
                    events,
                    &opts,
                    &mut replicate_rng(seed, i),
                )
            })
            .collect::<Result<Vec<ChurnTrace>>>()?;
        let (baseline, _) = traces[0].window_split().expect("fast-forward is on");
        let excess: Vec<f64> = traces
            .iter()
            .map(|t| t.excess_integral.unwrap_or(0.0))
            .collect();
        let plain: Vec<f64> = traces.iter().map(ChurnTrace::window_average).collect();
        let excess = Summary::of(&excess);
        Ok(ScheduleOutcome {
            spacing,
            events: events.len(),
            report,
            baseline,
            time_average: baseline + excess.mean / traces[0].window_length,
            excess,
            plain_average: Summary::of(&plain),
        })
    };
    Ok(ChurnStudy {
        lambda,
        max_potential: max_potential(&game),
        spacing,
        warmup,
        horizon,
        slow: run(&slow, slow_spacing, p.seed)?,
        fast: run(&fast, fast_spacing, p.seed + 1)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sensor_greedy_start_is_weak_first() {
        let g = catalog::example6(5, 4, 1.0, 0.0).unwrap();
        let x = sensor_start(&g, &catalog::SENSOR_DETECTION).unwrap();
        // weak sensors take the most valuable regions
        let weak = x.population(&g, 2);
        assert_eq!(weak[3] + weak[2], 4);
        assert_eq!(x.population(&g, 0).iter().sum::<u32>(), 1);
        let strong = x.population(&g, 0);
        assert!(
            strong[3] == 0,
            "strong sensor starts away from the top target"
        );
    }

    #[test]
    fn alternating_schedule_times_are_exact() {
        let s = alternating_schedule(400.0, 4.0, 6);
        assert_eq!(s[5].time, 420.0);
        assert_eq!(s[0].kind, super::super::ChurnKind::Arrive);
        assert_eq!(s[1].kind, super::super::ChurnKind::Depart);
    }
}
