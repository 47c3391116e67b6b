//! Exact analysis of the continuous-time chains: evolution, distances,
//! mixing and welfare convergence times, rationality calibration, and
//! Sobolev-type functionals.

mod calibrate;
mod evolve;
mod gibbs;
mod mixing;
mod sobolev;
mod table;

use crate::error::{Error, Result};
use crate::kernel::Distribution;

pub use calibrate::{
    calibrate_beta, calibrate_with, Calibration, GibbsEnsemble, BETA_CAP_NORMALIZED,
    CALIBRATION_TOLERANCE,
};
pub(crate) use evolve::FunctionPowers;
pub use evolve::{
    evolve, evolve_capped, evolve_grid, evolve_wall, EvolutionResult, DEFAULT_MAX_TERMS, TAIL_MASS,
};
pub use gibbs::SeparableGibbs;
pub use mixing::{
    mixing_time_tv, welfare_convergence_time, welfare_convergence_times, ConvergenceTime, Start,
    TimeUnits, WelfareTarget, MAX_TICKS, TIME_PRECISION, WORST_CASE_ALL_STATES,
};
pub use sobolev::{
    mixing_time_bound, sobolev_estimate, sobolev_functionals, SobolevEstimate, SobolevValues,
    SOBOLEV_MAX_STATES,
};
pub use table::{convergence_table, TableParams, TableRow};

fn same_len(mu: &Distribution, nu: &Distribution) -> Result<()> {
    if mu.len() != nu.len() {
        return Err(Error::InvalidArgument(format!(
            "distributions over different spaces ({} vs {} states)",
            mu.len(),
            nu.len()
        )));
    }
    Ok(())
}

/// `1/2 sum |mu_x - nu_x|`.
pub fn tv_distance(mu: &Distribution, nu: &Distribution) -> Result<f64> {
    same_len(mu, nu)?;
    let d: f64 = mu
        .probs()
        .iter()
        .zip(nu.probs())
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok((0.5 * d).min(1.0))
}

/// `(1 + d) ln(1 + d) - d`, accurate near `d = 0` where it is `~ d^2 / 2`.
fn entropy_term(d: f64) -> f64 {
    if d.abs() < 0.1 {
        // sum_{k>=2} (-d)^k / (k (k - 1)); 18 terms reach rounding at |d| = 0.1
        let mut power = d * d;
        let mut total = 0.0;
        for k in 2..20 {
            let kf = f64::from(k);
            total += power / (kf * (kf - 1.0));
            power *= -d;
        }
        total
    } else {
        (1.0 + d) * d.ln_1p() - d
    }
}

/// `sum mu_x log(mu_x / nu_x)`, natural log, `0 log 0 = 0`.
///
/// Summed as `sum nu_x g(mu_x / nu_x - 1)` with `g(d) = (1+d) ln(1+d) - d`,
/// equal for distributions since `sum mu = sum nu`. Every term is
/// nonnegative, so nearly equal distributions do not lose the result to
/// cancellation.
pub fn relative_entropy(mu: &Distribution, nu: &Distribution) -> Result<f64> {
    same_len(mu, nu)?;
    let mut d = 0.0;
    for (i, (&a, &b)) in mu.probs().iter().zip(nu.probs()).enumerate() {
        if b == 0.0 {
            if a > 0.0 {
                return Err(Error::SupportViolation { index: i, mu: a });
            }
            continue;
        }
        d += if a == 0.0 {
            b
        } else {
            b * entropy_term((a - b) / b)
        };
    }
    Ok(d)
}
