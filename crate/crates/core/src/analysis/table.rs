//! Rationality and convergence table for the three-population congestion
//! game: for each dynamic and third-population size, the rationality giving
//! a target share of the maximum welfare and the worst-case expected number
//! of updates until the expected welfare is within `eps` of its stationary
//! value.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::game::{catalog, StateSpace};
use crate::kernel::{stationary_closed_form, stationary_numeric, Dynamic, Kernel};

use super::calibrate::calibrate_beta;
use super::mixing::{welfare_convergence_time, Start, WelfareTarget};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TableParams {
    pub n1: u32,
    pub n2: u32,
    pub n3s: Vec<u32>,
    pub fraction: f64,
    pub eps: f64,
    pub dynamics: Vec<Dynamic>,
}

impl Default for TableParams {
    fn default() -> Self {
        Self {
            n1: 7,
            n2: 7,
            n3s: vec![1, 5, 50, 500],
            fraction: 0.98,
            eps: 0.05,
            dynamics: vec![Dynamic::Lll, Dynamic::Prior, Dynamic::Mlll],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub dynamic: Dynamic,
    pub n3: u32,
    pub beta: f64,
    /// Stationary expected welfare as a percentage of the maximum.
    pub welfare_percent: f64,
    /// Worst-case expected updates to convergence.
    pub updates: f64,
    pub wall_time: f64,
    pub states: usize,
}

fn row(p: &TableParams, dynamic: Dynamic, n3: u32) -> Result<TableRow> {
    let alpha = 1.0 / 3.0;
    let base = catalog::example3(p.n1, p.n2, n3, alpha, 0.0)?;
    let cal = calibrate_beta(&base, dynamic, p.fraction)?;
    let game = base.with_beta(cal.beta)?;
    let space = Arc::new(StateSpace::enumerate(&game)?);
    let kernel = Kernel::build(&game, Arc::clone(&space), dynamic)?;
    let pi = match dynamic {
        Dynamic::Prior => stationary_numeric(&kernel)?,
        _ => stationary_closed_form(&space, cal.beta, dynamic)?,
    };
    let ct = welfare_convergence_time(
        &kernel,
        &pi,
        WelfareTarget::BelowStationary(p.eps),
        &Start::WorstCase,
    )?;
    Ok(TableRow {
        dynamic,
        n3,
        beta: cal.beta,
        welfare_percent: 100.0 * ct.stationary_expectation / space.max_potential(),
        updates: ct.time.updates,
        wall_time: ct.time.wall,
        states: space.len(),
    })
}

/// All rows, dynamics in the given order and `n3` ascending within each.
pub fn convergence_table(p: &TableParams) -> Result<Vec<TableRow>> {
    let jobs: Vec<(Dynamic, u32)> = p
        .dynamics
        .iter()
        .flat_map(|&d| p.n3s.iter().map(move |&n3| (d, n3)))
        .collect();
    jobs.par_iter().map(|&(d, n3)| row(p, d, n3)).collect()
}
