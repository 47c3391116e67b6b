//! Continuous-time evolution by uniformization.
//!
//! With uniformized time `tau = global_rate * t`, the law at time `t` is
//! `mu0 exp(tau (M - I)) = sum_k Pois(tau; k) mu0 M^k`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::{Distribution, Kernel};

use super::tv_distance;

/// Neglected Poisson tail mass.
pub const TAIL_MASS: f64 = 1e-12;
/// Default cap on the number of kernel powers.
pub const DEFAULT_MAX_TERMS: usize = 50_000_000;

/// Poisson(tau) weights on `start..start + weights.len()`, normalized, with
/// both tails below [`TAIL_MASS`].
#[derive(Debug, Clone)]
pub(crate) struct PoissonWindow {
    pub start: usize,
    pub weights: Vec<f64>,
}

impl PoissonWindow {
    pub fn new(tau: f64, max_terms: usize) -> Result<Self> {
        if !(tau >= 0.0 && tau.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "time must be finite and >= 0, got {tau}"
            )));
        }
        if tau == 0.0 {
            return Ok(Self {
                start: 0,
                weights: vec![1.0],
            });
        }
        let mode = tau.floor() as usize;
        // weights relative to the mode; the tail of a Poisson beyond k is
        // dominated by a geometric series with ratio tau / (k + 2)
        let mut right = vec![1.0];
        let mut k = mode;
        let mut w = 1.0;
        let mut total = 1.0;
        loop {
            w *= tau / (k + 1) as f64;
            k += 1;
            right.push(w);
            total += w;
            let ratio = tau / (k + 2) as f64;
            if ratio < 1.0 && w / (1.0 - ratio) < 0.25 * TAIL_MASS * total {
                break;
            }
            if k > max_terms {
                return Err(Error::TruncationOverflow {
                    needed: k,
                    cap: max_terms,
                });
            }
        }
        let mut left = Vec::new();
        let mut k = mode;
        let mut w = 1.0;
        while k > 0 {
            w *= k as f64 / tau;
            k -= 1;
            left.push(w);
            total += w;
            let ratio = k as f64 / tau;
            if ratio < 1.0 && w / (1.0 - ratio) < 0.25 * TAIL_MASS * total {
                break;
            }
        }
        let start = k;
        let mut weights: Vec<f64> = left.into_iter().rev().chain(right).collect();
        for w in &mut weights {
            *w /= total;
        }
        Ok(Self { start, weights })
    }

    pub fn end(&self) -> usize {
        self.start + self.weights.len()
    }

    pub fn weight(&self, k: usize) -> f64 {
        if k < self.start {
            0.0
        } else {
            self.weights.get(k - self.start).copied().unwrap_or(0.0)
        }
    }
}

/// `mu0 exp(tau (M - I))`, with `tau` in uniformized ticks.
pub fn evolve(kernel: &Kernel, mu0: &Distribution, tau: f64) -> Result<Distribution> {
    evolve_capped(kernel, mu0, tau, DEFAULT_MAX_TERMS)
}

/// [`evolve`] with wall-clock time `t`; `tau = global_rate * t`.
pub fn evolve_wall(kernel: &Kernel, mu0: &Distribution, t: f64) -> Result<Distribution> {
    evolve(kernel, mu0, kernel.global_rate() * t)
}

pub fn evolve_capped(
    kernel: &Kernel,
    mu0: &Distribution,
    tau: f64,
    max_terms: usize,
) -> Result<Distribution> {
    check_len(kernel, mu0)?;
    if tau == 0.0 {
        return Ok(mu0.clone());
    }
    let window = PoissonWindow::new(tau, max_terms)?;
    let mut cur = mu0.probs().to_vec();
    let mut next = vec![0.0; cur.len()];
    let mut acc = vec![0.0; cur.len()];
    for k in 0..window.end() {
        let w = window.weight(k);
        if w > 0.0 {
            for (a, c) in acc.iter_mut().zip(&cur) {
                *a += w * c;
            }
        }
        if k + 1 < window.end() {
            kernel.apply_left(&cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
    }
    Ok(Distribution::from_raw_renormalized(acc))
}

pub(crate) fn check_len(kernel: &Kernel, mu: &Distribution) -> Result<()> {
    if mu.len() != kernel.len() {
        return Err(Error::InvalidArgument(format!(
            "distribution has {} entries but the kernel has {} states",
            mu.len(),
            kernel.len()
        )));
    }
    Ok(())
}

/// Evolution sampled on a grid of uniformized times.
#[derive(Debug, Clone, Serialize)]
pub struct EvolutionResult {
    /// Uniformized times.
    pub times: Vec<f64>,
    pub wall_times: Vec<f64>,
    pub dists: Vec<Distribution>,
    pub expected_potential: Vec<f64>,
    pub tv_to_stationary: Vec<f64>,
}

/// Evolve over an increasing grid of uniformized times, stepping between
/// grid points with the semigroup property.
pub fn evolve_grid(
    kernel: &Kernel,
    mu0: &Distribution,
    times: &[f64],
    stationary: &Distribution,
) -> Result<EvolutionResult> {
    check_len(kernel, mu0)?;
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::InvalidArgument(
            "time grid must be nonnegative and sorted".into(),
        ));
    }
    let phi = kernel.space().potentials();
    let mut out = EvolutionResult {
        times: times.to_vec(),
        wall_times: times.iter().map(|t| t / kernel.global_rate()).collect(),
        dists: Vec::with_capacity(times.len()),
        expected_potential: Vec::with_capacity(times.len()),
        tv_to_stationary: Vec::with_capacity(times.len()),
    };
    let mut cur = mu0.clone();
    let mut last = 0.0;
    for &t in times {
        cur = evolve(kernel, &cur, t - last)?;
        last = t;
        out.expected_potential.push(cur.expectation(phi));
        out.tv_to_stationary.push(tv_distance(&cur, stationary)?);
        out.dists.push(cur.clone());
    }
    Ok(out)
}

/// Cached powers `M^k f` of a function vector, for evaluating
/// `E_y[f(X_tau)] = sum_k Pois(tau; k) (M^k f)(y)` at many `tau`.
pub(crate) struct FunctionPowers<'a> {
    kernel: &'a Kernel,
    powers: Vec<Vec<f64>>,
    max_floats: usize,
}

impl<'a> FunctionPowers<'a> {
    pub fn new(kernel: &'a Kernel, f: Vec<f64>, max_floats: usize) -> Self {
        Self {
            kernel,
            powers: vec![f],
            max_floats,
        }
    }

    fn ensure(&mut self, count: usize) -> Result<()> {
        let len = self.kernel.len();
        if count.saturating_mul(len) > self.max_floats {
            return Err(Error::TruncationOverflow {
                needed: count,
                cap: self.max_floats / len.max(1),
            });
        }
        while self.powers.len() < count {
            let mut next = vec![0.0; len];
            self.kernel
                .apply_right(self.powers.last().expect("nonempty"), &mut next);
            self.powers.push(next);
        }
        Ok(())
    }

    /// `E_y[f(X_tau)]` for each `y` in `starts`.
    pub fn expectations(&mut self, tau: f64, starts: &[usize]) -> Result<Vec<f64>> {
        let window = PoissonWindow::new(tau, usize::MAX / 2)?;
        self.ensure(window.end())?;
        let mut out = vec![0.0; starts.len()];
        for (off, &w) in window.weights.iter().enumerate() {
            let v = &self.powers[window.start + off];
            for (o, &y) in out.iter_mut().zip(starts) {
                *o += w * v[y];
            }
        }
        Ok(out)
    }

    /// `E_mu[f(X_tau)]`.
    pub fn expectation_from(&mut self, tau: f64, mu: &[f64]) -> Result<f64> {
        let window = PoissonWindow::new(tau, usize::MAX / 2)?;
        self.ensure(window.end())?;
        let mut out = 0.0;
        for (off, &w) in window.weights.iter().enumerate() {
            let v = &self.powers[window.start + off];
            out += w * mu.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
        }
        Ok(out)
    }
}
