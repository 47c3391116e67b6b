use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::properties::nash_equilibria;
use crate::kernel::{Distribution, Kernel};

use super::evolve::{check_len, evolve, FunctionPowers};
use super::tv_distance;

/// Relative precision of time bisections.
pub const TIME_PRECISION: f64 = 1e-3;
/// Largest uniformized time a bracket may reach.
pub const MAX_TICKS: f64 = 1e8;
/// Worst-case searches scan every state up to this size, otherwise the pure
/// Nash equilibria.
pub const WORST_CASE_ALL_STATES: usize = 10_000;
const POWER_CACHE_FLOATS: usize = 60_000_000;

/// A time reported in the three units used throughout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeUnits {
    /// Uniformized kernel ticks `tau`.
    pub ticks: f64,
    /// Expected clock events, `global_rate * wall` (equal to `ticks`).
    pub updates: f64,
    pub wall: f64,
    pub global_rate: f64,
}

impl TimeUnits {
    pub fn from_ticks(ticks: f64, global_rate: f64) -> Self {
        Self {
            ticks,
            updates: ticks,
            wall: ticks / global_rate,
            global_rate,
        }
    }
}

/// First uniformized time with `TV(mu(t), pi) <= eps`, bracketed by doubling
/// and refined by bisection.
pub fn mixing_time_tv(
    kernel: &Kernel,
    mu0: &Distribution,
    stationary: &Distribution,
    eps: f64,
) -> Result<TimeUnits> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "eps must lie in (0,1), got {eps}"
        )));
    }
    check_len(kernel, mu0)?;
    let rate = kernel.global_rate();
    if tv_distance(mu0, stationary)? <= eps {
        return Ok(TimeUnits::from_ticks(0.0, rate));
    }
    let tv_at = |tau: f64| -> Result<f64> { tv_distance(&evolve(kernel, mu0, tau)?, stationary) };
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut mu_lo = mu0.clone();
    loop {
        let mu_hi = evolve(kernel, &mu_lo, hi - lo)?;
        if tv_distance(&mu_hi, stationary)? <= eps {
            break;
        }
        if hi >= MAX_TICKS {
            return Err(Error::NotMixed { eps, time: hi });
        }
        lo = hi;
        mu_lo = mu_hi;
        hi *= 2.0;
    }
    while hi - lo > TIME_PRECISION * hi {
        let mid = 0.5 * (lo + hi);
        if tv_at(mid)? <= eps {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(TimeUnits::from_ticks(hi, rate))
}

/// Welfare level a convergence time aims for.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "eps", rename_all = "snake_case")]
pub enum WelfareTarget {
    /// `max phi - eps`.
    BelowMax(f64),
    /// `E_pi[phi] - eps`.
    BelowStationary(f64),
    /// A fixed level.
    Absolute(f64),
}

/// Initial conditions for a convergence time.
#[derive(Debug, Clone)]
pub enum Start {
    /// Worst point mass: all states when the space is small enough, else
    /// the pure Nash equilibria.
    WorstCase,
    /// Worst point mass among the given state indices.
    WorstOf(Vec<usize>),
    From(Distribution),
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceTime {
    pub time: TimeUnits,
    pub target: f64,
    pub stationary_expectation: f64,
    /// Slowest initial state at the crossing, for point-mass starts.
    pub slowest_start: Option<usize>,
    pub starts_considered: usize,
}

/// First time the expected potential reaches the target; for point-mass
/// starts, the first time it does so from every start.
///
/// The potential is the space's potential (the welfare for every built-in
/// game). Times are bracketed on a doubling grid, scanned at 1/64 of the
/// bracket, then bisected to [`TIME_PRECISION`].
pub fn welfare_convergence_time(
    kernel: &Kernel,
    stationary: &Distribution,
    target: WelfareTarget,
    start: &Start,
) -> Result<ConvergenceTime> {
    let space = kernel.space();
    let phi = space.potentials().to_vec();
    let e_pi = stationary.expectation(&phi);
    let level = match target {
        WelfareTarget::BelowMax(eps) => space.max_potential() - eps,
        WelfareTarget::BelowStationary(eps) => e_pi - eps,
        WelfareTarget::Absolute(v) => v,
    };
    if e_pi < level {
        return Err(Error::Unreachable {
            target: level,
            stationary: e_pi,
        });
    }
    let rate = kernel.global_rate();
    let starts: Option<Vec<usize>> = match start {
        Start::WorstCase if space.len() <= WORST_CASE_ALL_STATES => {
            Some((0..space.len()).collect())
        }
        Start::WorstCase => Some(nash_equilibria(space)),
        Start::WorstOf(v) => {
            if let Some(&bad) = v.iter().find(|&&i| i >= space.len()) {
                return Err(Error::InvalidArgument(format!(
                    "start index {bad} out of range"
                )));
            }
            Some(v.clone())
        }
        Start::From(mu) => {
            check_len(kernel, mu)?;
            None
        }
    };
    let mut powers = FunctionPowers::new(kernel, phi, POWER_CACHE_FLOATS);
    // returns (min expectation, argmin start)
    let mut eval = |tau: f64| -> Result<(f64, Option<usize>)> {
        match (&starts, start) {
            (Some(ys), _) => {
                let e = powers.expectations(tau, ys)?;
                let (k, v) =
                    e.iter().enumerate().fold(
                        (0, f64::INFINITY),
                        |b, (k, &v)| if v < b.1 { (k, v) } else { b },
                    );
                Ok((v, ys.get(k).copied()))
            }
            (None, Start::From(mu)) => Ok((powers.expectation_from(tau, mu.probs())?, None)),
            _ => unreachable!(),
        }
    };
    let n_starts = starts.as_ref().map_or(1, Vec::len);
    let reached = |v: f64| v >= level;

    let (v0, y0) = eval(0.0)?;
    if reached(v0) {
        return Ok(ConvergenceTime {
            time: TimeUnits::from_ticks(0.0, rate),
            target: level,
            stationary_expectation: e_pi,
            slowest_start: y0,
            starts_considered: n_starts,
        });
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    let (mut lo, mut hi) = loop {
        // scan (lo, hi] for the first crossing
        let mut found = None;
        let mut prev = lo;
        for j in 1..=64 {
            let tau = lo + (hi - lo) * f64::from(j) / 64.0;
            if reached(eval(tau)?.0) {
                found = Some((prev, tau));
                break;
            }
            prev = tau;
        }
        if let Some(b) = found {
            break b;
        }
        if hi >= MAX_TICKS {
            return Err(Error::NotConverged {
                stage: "welfare convergence bracket",
                iterations: 0,
                residual: level - eval(hi)?.0,
            });
        }
        lo = hi;
        hi *= 2.0;
    };
    while hi - lo > TIME_PRECISION * hi {
        let mid = 0.5 * (lo + hi);
        if reached(eval(mid)?.0) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let (_, slowest) = eval(lo)?;
    Ok(ConvergenceTime {
        time: TimeUnits::from_ticks(hi, rate),
        target: level,
        stationary_expectation: e_pi,
        slowest_start: slowest,
        starts_considered: n_starts,
    })
}

/// Convergence times for several kernels in parallel.
pub fn welfare_convergence_times(
    jobs: &[(&Kernel, &Distribution)],
    target: WelfareTarget,
    start: &Start,
) -> Vec<Result<ConvergenceTime>> {
    jobs.par_iter()
        .map(|(k, pi)| welfare_convergence_time(k, pi, target, start))
        .collect()
}
