//! Time-varying games: agents arrive and depart at scheduled times.
//!
//! Between events the dynamic runs on the game with the current population
//! sizes. An arriving agent plays the event's action, or a uniformly drawn
//! action of its population when none is given. A departing agent is
//! uniform over its population's members.
//!
//! Long quiet stretches can be fast-forwarded. Once a segment has run past
//! the chain's mixing horizon its law is within the requested total
//! variation of the stationary one, so the rest of the segment contributes
//! its stationary mean to the welfare integral and the state at the next
//! event is drawn from the stationary distribution.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{GibbsEnsemble, SeparableGibbs};
use crate::error::{Error, Result};
use crate::game::{GameSpec, StateSpace, Welfare};
use crate::kernel::{stationary_closed_form, stationary_numeric, Distribution, Dynamic, Kernel};

use crate::analysis::FunctionPowers;

use super::engine::{exp_time, weighted_slot, Engine, DEFAULT_SAMPLE_DT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChurnKind {
    Arrive,
    Depart,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChurnEvent {
    pub time: f64,
    pub kind: ChurnKind,
    pub population: usize,
    /// Index into the population's action list; arrivals only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action_on_arrival: Option<usize>,
}

impl ChurnEvent {
    pub fn arrive(time: f64, population: usize, action: Option<usize>) -> Self {
        Self {
            time,
            kind: ChurnKind::Arrive,
            population,
            action_on_arrival: action,
        }
    }

    pub fn depart(time: f64, population: usize) -> Self {
        Self {
            time,
            kind: ChurnKind::Depart,
            population,
            action_on_arrival: None,
        }
    }
}

/// Floats cached for conditional expectations inside a relaxation.
const POWER_CACHE_FLOATS: usize = 1 << 24;

/// Version of the churn schedule file format.
pub const CHURN_SCHEMA_VERSION: u32 = 1;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScheduleFile {
    schema_version: u32,
    #[serde(default)]
    event: Vec<toml::Spanned<ChurnEvent>>,
}

/// Parse a churn schedule:
///
/// ```toml
/// schema_version = 1
///
/// [[event]]
/// time = 50.0
/// kind = "arrive"           # or "depart"
/// population = 0
/// action_on_arrival = 1     # optional, index into the population's actions
/// ```
///
/// Events must be in non-decreasing time order.
pub fn parse_churn_schedule(text: &str) -> Result<Vec<ChurnEvent>> {
    let file: ScheduleFile =
        toml::from_str(text).map_err(|e| crate::config::toml_error(text, &e, "event"))?;
    if file.schema_version != CHURN_SCHEMA_VERSION {
        return Err(Error::Config {
            key: "schema_version".into(),
            line: text
                .find("schema_version")
                .map(|o| crate::config::line_of(text, o)),
            message: format!(
                "unsupported version {} (expected {CHURN_SCHEMA_VERSION})",
                file.schema_version
            ),
        });
    }
    let mut events = Vec::with_capacity(file.event.len());
    let mut last = f64::NEG_INFINITY;
    for (i, sp) in file.event.into_iter().enumerate() {
        let line = Some(crate::config::line_of(text, sp.span().start));
        let ev = sp.into_inner();
        if !(ev.time.is_finite() && ev.time >= 0.0) {
            return Err(Error::Config {
                key: format!("event[{i}].time"),
                line,
                message: format!("time must be finite and >= 0, got {}", ev.time),
            });
        }
        if ev.time < last {
            return Err(Error::Config {
                key: format!("event[{i}].time"),
                line,
                message: format!("events out of order ({} after {last})", ev.time),
            });
        }
        if ev.kind == ChurnKind::Depart && ev.action_on_arrival.is_some() {
            return Err(Error::Config {
                key: format!("event[{i}].action_on_arrival"),
                line,
                message: "only arrivals take an action".into(),
            });
        }
        last = ev.time;
        events.push(ev);
    }
    Ok(events)
}

pub fn load_churn_schedule(path: &Path) -> Result<Vec<ChurnEvent>> {
    parse_churn_schedule(&std::fs::read_to_string(path)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChurnOptions {
    pub horizon: f64,
    pub sample_dt: f64,
    pub dynamic: Dynamic,
    /// Fail when a departure would empty a population.
    pub strict: bool,
    /// Rescale the potential onto `[0, 1]` for every size configuration,
    /// keeping `beta` on that scale.
    pub normalize: bool,
    /// Start of the window over which the time-averaged potential is taken.
    pub average_from: f64,
    /// Fast-forward to within this total variation of stationarity.
    pub fast_forward: Option<f64>,
    /// With fast-forwarding, replace the simulated relaxation at the start
    /// of every long in-window segment by its conditional expectation given
    /// the segment's starting state. Samples taken during the relaxation
    /// then record `E[phi(X_t) | X_start]`.
    pub exact_transients: bool,
}

impl ChurnOptions {
    pub fn new(horizon: f64) -> Self {
        Self {
            horizon,
            sample_dt: DEFAULT_SAMPLE_DT,
            dynamic: Dynamic::Mlll,
            strict: false,
            normalize: false,
            average_from: 0.0,
            fast_forward: None,
            exact_transients: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChurnTrace {
    pub sample_times: Vec<f64>,
    pub potential: Vec<f64>,
    /// `max_x phi` of the game in force at each sample.
    pub max_potential: Vec<f64>,
    pub sizes: Vec<Vec<u32>>,
    pub events: u64,
    pub moves: u64,
    pub churn_applied: usize,
    /// Departures dropped because the population was already empty.
    pub churn_skipped: usize,
    pub final_state: Vec<u32>,
    pub final_sizes: Vec<u32>,
    /// `integral phi dt` over `[average_from, horizon]`.
    pub window_integral: f64,
    pub window_length: f64,
    /// Time covered by stationary fast-forwarding.
    pub fast_forwarded: f64,
    /// With fast-forwarding: in-window time spent in each size configuration.
    pub regime_time: Vec<RegimeTime>,
    /// With fast-forwarding: `integral (phi - E_pi phi) dt` over the
    /// simulated in-window stretches, `pi` being the stationary law of the
    /// configuration in force.
    pub excess_integral: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeTime {
    pub sizes: Vec<u32>,
    pub stationary_mean: f64,
    pub duration: f64,
}

impl ChurnTrace {
    pub fn window_average(&self) -> f64 {
        self.window_integral / self.window_length
    }

    /// Time average split as stationary baseline plus the transient excess
    /// divided by the window length. At long horizons the excess is far
    /// below the rounding of the plain integral, so comparisons between
    /// schedules with equal baselines should use this split.
    pub fn window_split(&self) -> Option<(f64, f64)> {
        let ex = self.excess_integral?;
        let base = self
            .regime_time
            .iter()
            .map(|r| r.stationary_mean * r.duration)
            .sum::<f64>()
            / self.window_length;
        Some((base, ex / self.window_length))
    }
}

/// Game in force, its largest potential and optional stationary model for
/// one size configuration.
struct Regime {
    game: GameSpec,
    max: f64,
    stationary: Option<Stationary>,
}

struct Stationary {
    space: Arc<StateSpace>,
    kernel: Kernel,
    pi: Distribution,
    mean: f64,
    /// `h(x) = integral_0^inf (E_x phi(X_u) - E_pi phi) du`.
    deviation: Vec<f64>,
    /// Time after which every start is within the tolerance.
    horizon: f64,
}

fn potential_range(game: &GameSpec) -> (f64, f64) {
    match SeparableGibbs::new(game) {
        Some(g) => (g.min_potential(), g.max_potential()),
        None => {
            let e = GibbsEnsemble::from_game(game);
            (e.min_potential(), e.max_potential())
        }
    }
}

/// Mixing horizon from the spectral bound
/// `||delta_x P_t - pi||_TV <= 1/2 sqrt((1 - pi_min) / pi_min) e^{-gap t}`
/// of a reversible chain, with `gap = global_rate (1 - lambda_2)`.
fn spectral_horizon(kernel: &Kernel, pi: &Distribution, tol: f64) -> Result<f64> {
    let len = kernel.len();
    if len == 1 {
        return Ok(0.0);
    }
    let p = pi.probs();
    let mut s = DMatrix::<f64>::zeros(len, len);
    for i in 0..len {
        for (j, v) in kernel.row(i) {
            s[(i, j)] += 0.5 * v * (p[i] / p[j]).sqrt();
            s[(j, i)] += 0.5 * v * (p[i] / p[j]).sqrt();
        }
    }
    let mut ev: Vec<f64> = s.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    let gap = kernel.global_rate() * (1.0 - ev[1]);
    if !(gap > 0.0) {
        return Err(Error::NotMixed {
            eps: tol,
            time: f64::INFINITY,
        });
    }
    let pmin = pi.min_prob();
    let c = 0.5 * ((1.0 - pmin) / pmin).sqrt();
    Ok(((c / tol).ln() / gap).max(0.0))
}

/// Solve `rate (I - M) h = phi - E_pi phi` with `E_pi h = 0`. Adding
/// `1 pi^T` makes the system nonsingular without changing the solution.
fn deviation_function(
    kernel: &Kernel,
    pi: &Distribution,
    phi: &[f64],
    mean: f64,
) -> Result<Vec<f64>> {
    let len = kernel.len();
    let p = pi.probs();
    let mut a = DMatrix::<f64>::identity(len, len);
    for i in 0..len {
        for (j, v) in kernel.row(i) {
            a[(i, j)] -= v;
        }
        for j in 0..len {
            a[(i, j)] += p[j];
        }
    }
    let rate = kernel.global_rate();
    let b = nalgebra::DVector::from_iterator(len, phi.iter().map(|f| (f - mean) / rate));
    let h = a.lu().solve(&b).ok_or(Error::NotConverged {
        stage: "deviation solve",
        iterations: 0,
        residual: f64::INFINITY,
    })?;
    Ok(h.iter().copied().collect())
}

struct Regimes<'a> {
    base: &'a GameSpec,
    opts: &'a ChurnOptions,
    cache: HashMap<Vec<u32>, Regime>,
}

impl<'a> Regimes<'a> {
    fn get(&mut self, sizes: &[u32]) -> Result<&Regime> {
        if !self.cache.contains_key(sizes) {
            let r = self.build(sizes)?;
            self.cache.insert(sizes.to_vec(), r);
        }
        Ok(&self.cache[sizes])
    }

    fn build(&self, sizes: &[u32]) -> Result<Regime> {
        let raw = self.base.with_sizes(sizes)?;
        let (lo, hi) = potential_range(&raw);
        let (game, max) = if self.opts.normalize && hi > lo {
            let g = raw.with_welfare(Welfare::Affine {
                inner: Box::new(raw.welfare().clone()),
                shift: lo,
                scale: hi - lo,
            })?;
            (g, 1.0)
        } else {
            (raw, hi)
        };
        let stationary = match self.opts.fast_forward {
            Some(tol) => {
                let space = Arc::new(StateSpace::enumerate(&game)?);
                let kernel = Kernel::build(&game, space.clone(), self.opts.dynamic)?;
                let pi = match self.opts.dynamic {
                    Dynamic::Prior => stationary_numeric(&kernel)?,
                    d => stationary_closed_form(&space, game.beta(), d)?,
                };
                let horizon = spectral_horizon(&kernel, &pi, tol)?;
                let mean = pi.expectation(space.potentials());
                let deviation = deviation_function(&kernel, &pi, space.potentials(), mean)?;
                Some(Stationary {
                    mean,
                    space,
                    kernel,
                    pi,
                    deviation,
                    horizon,
                })
            }
            None => None,
        };
        Ok(Regime {
            game,
            max,
            stationary,
        })
    }
}

fn sample_index(pi: &Distribution, rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in pi.probs().iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    pi.len() - 1
}

struct Recorder<'o> {
    opts: &'o ChurnOptions,
    grid: usize,
    next: usize,
    trace: ChurnTrace,
}

impl Recorder<'_> {
    /// Potential `value` on `[t0 + a, t0 + b)`; offsets are kept apart from
    /// the segment start so short stretches survive at large absolute times.
    fn piece(&mut self, t0: f64, a: f64, b: f64, value: f64, regime: &Regime, sizes: &[u32]) {
        let end = t0 + b;
        while self.next < self.grid {
            let ts = self.next as f64 * self.opts.sample_dt;
            // the grid point at the horizon belongs to the last stretch
            if ts >= end && end < self.opts.horizon {
                break;
            }
            self.trace.sample_times.push(ts);
            self.trace.potential.push(value);
            self.trace.max_potential.push(regime.max);
            self.trace.sizes.push(sizes.to_vec());
            self.next += 1;
        }
        let lo = a.max(self.opts.average_from - t0);
        if b > lo {
            self.trace.window_integral += value * (b - lo);
            if let (Some(st), Some(ex)) = (&regime.stationary, &mut self.trace.excess_integral) {
                *ex += (value - st.mean) * (b - lo);
            }
        }
    }

    /// Long segment from `x` at `t0` with the relaxation integrated exactly.
    /// The whole segment lies in the window.
    fn exact_segment(
        &mut self,
        t0: f64,
        len: f64,
        x: usize,
        st: &Stationary,
        max: f64,
        sizes: &[u32],
    ) -> Result<()> {
        let end = t0 + len;
        let mut powers = None;
        while self.next < self.grid {
            let ts = self.next as f64 * self.opts.sample_dt;
            if ts >= end && end < self.opts.horizon {
                break;
            }
            let u = ts - t0;
            let value = if u < st.horizon {
                let fp = powers.get_or_insert_with(|| {
                    FunctionPowers::new(
                        &st.kernel,
                        st.space.potentials().to_vec(),
                        POWER_CACHE_FLOATS,
                    )
                });
                fp.expectations(st.kernel.global_rate() * u, &[x])?[0]
            } else {
                st.mean
            };
            self.trace.sample_times.push(ts);
            self.trace.potential.push(value);
            self.trace.max_potential.push(max);
            self.trace.sizes.push(sizes.to_vec());
            self.next += 1;
        }
        let h = st.deviation[x];
        self.trace.window_integral += st.mean * len + h;
        if let Some(ex) = &mut self.trace.excess_integral {
            *ex += h;
        }
        Ok(())
    }

    /// Credit the in-window part of `[t0, t1)` to the size configuration.
    fn credit(&mut self, t0: f64, t1: f64, regime: &Regime, sizes: &[u32]) {
        let Some(st) = &regime.stationary else { return };
        let d = t1 - t0.max(self.opts.average_from);
        if d <= 0.0 {
            return;
        }
        let rows = &mut self.trace.regime_time;
        match rows.iter_mut().find(|r| r.sizes == sizes) {
            Some(r) => r.duration += d,
            None => rows.push(RegimeTime {
                sizes: sizes.to_vec(),
                stationary_mean: st.mean,
                duration: d,
            }),
        }
    }
}

/// Simulate a time-varying game. Events at or beyond the horizon are
/// ignored. With fast-forwarding, samples falling in a stationary stretch
/// record the stationary mean of the potential.
pub fn simulate_time_varying(
    game0: &GameSpec,
    x0: &[u32],
    churn: &[ChurnEvent],
    opts: &ChurnOptions,
    rng: &mut ChaCha8Rng,
) -> Result<ChurnTrace> {
    if !(opts.horizon > 0.0 && opts.horizon.is_finite() && opts.sample_dt > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "horizon {} and sample spacing {} must be positive",
            opts.horizon, opts.sample_dt
        )));
    }
    if !(opts.average_from >= 0.0 && opts.average_from < opts.horizon) {
        return Err(Error::InvalidArgument(format!(
            "averaging window start {} must lie in [0, {})",
            opts.average_from, opts.horizon
        )));
    }
    if let Some(tol) = opts.fast_forward {
        if !(tol > 0.0 && tol < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "fast-forward tolerance must lie in (0,1), got {tol}"
            )));
        }
    }
    let m = game0.m();
    for (i, ev) in churn.iter().enumerate() {
        if ev.population >= m {
            return Err(Error::InvalidArgument(format!(
                "churn event {i} names population {} of {m}",
                ev.population
            )));
        }
        if i > 0 && ev.time < churn[i - 1].time {
            return Err(Error::InvalidArgument(format!(
                "churn event {i} at t = {} precedes the previous one",
                ev.time
            )));
        }
        if let Some(k) = ev.action_on_arrival {
            if k >= game0.populations()[ev.population].actions.len() {
                return Err(Error::InvalidArgument(format!(
                    "churn event {i} names action {k} of population {}",
                    ev.population
                )));
            }
        }
    }
    let mut counts = crate::game::AggregateState::from_flat(game0, x0.to_vec())?
        .counts()
        .to_vec();
    let mut sizes: Vec<u32> = game0.populations().iter().map(|p| p.size).collect();
    let mut regimes = Regimes {
        base: game0,
        opts,
        cache: HashMap::new(),
    };
    let mut rec = Recorder {
        opts,
        grid: (opts.horizon / opts.sample_dt).floor() as usize + 1,
        next: 0,
        trace: ChurnTrace {
            sample_times: Vec::new(),
            potential: Vec::new(),
            max_potential: Vec::new(),
            sizes: Vec::new(),
            events: 0,
            moves: 0,
            churn_applied: 0,
            churn_skipped: 0,
            final_state: Vec::new(),
            final_sizes: Vec::new(),
            window_integral: 0.0,
            window_length: opts.horizon - opts.average_from,
            fast_forwarded: 0.0,
            regime_time: Vec::new(),
            excess_integral: opts.fast_forward.map(|_| 0.0),
        },
    };

    let mut t = 0.0;
    let mut pending = churn.iter().filter(|e| e.time < opts.horizon).peekable();
    loop {
        let seg_end = pending.peek().map_or(opts.horizon, |e| e.time);
        let len = seg_end - t;
        let regime = regimes.get(&sizes)?;
        rec.credit(t, seg_end, regime, &sizes);
        let ff = regime.stationary.as_ref().filter(|s| len > s.horizon);
        let run_len = ff.map_or(len, |s| s.horizon);
        if let Some(st) = ff.filter(|_| opts.exact_transients && t >= opts.average_from) {
            let x = st
                .space
                .index_of(&counts)
                .expect("state belongs to its configuration's space");
            rec.exact_segment(t, len, x, st, regime.max, &sizes)?;
            rec.trace.fast_forwarded += len;
            counts = st.space.counts(sample_index(&st.pi, rng)).to_vec();
            t = seg_end;
        } else {
            let mut eng = Engine::new(&regime.game, opts.dynamic, std::mem::take(&mut counts));
            let mut tau = 0.0;
            loop {
                let rate = eng.total_rate();
                let tau_next = if rate > 0.0 {
                    tau + exp_time(rate, rng)
                } else {
                    f64::INFINITY
                };
                rec.piece(t, tau, tau_next.min(run_len), eng.phi, regime, &sizes);
                if tau_next >= run_len {
                    break;
                }
                tau = tau_next;
                let from = eng.pick_mover(rng);
                rec.trace.events += 1;
                if eng.logit_move(from, rng) != from {
                    rec.trace.moves += 1;
                }
            }
            counts = eng.counts;
            if let Some(st) = ff {
                rec.piece(t, run_len, len, st.mean, regime, &sizes);
                rec.trace.fast_forwarded += len - run_len;
                counts = st.space.counts(sample_index(&st.pi, rng)).to_vec();
            }
            t = seg_end;
        }
        let Some(ev) = pending.next() else { break };
        let slots = game0.slots(ev.population);
        match ev.kind {
            ChurnKind::Arrive => {
                let k = match ev.action_on_arrival {
                    Some(k) => k,
                    None => rng.gen_range(0..slots.len()),
                };
                counts[slots.start + k] += 1;
                sizes[ev.population] += 1;
            }
            ChurnKind::Depart => {
                let size = sizes[ev.population];
                if size <= 1 && opts.strict {
                    return Err(Error::EmptyPopulation {
                        population: ev.population,
                        time: ev.time,
                    });
                }
                if size == 0 {
                    rec.trace.churn_skipped += 1;
                    continue;
                }
                let f = weighted_slot(&counts, size, rng, slots);
                counts[f] -= 1;
                sizes[ev.population] -= 1;
            }
        }
        rec.trace.churn_applied += 1;
    }
    let mut trace = rec.trace;
    trace.final_state = counts;
    trace.final_sizes = sizes;
    Ok(trace)
}
