//! Closed-form rationality and time bounds for the population-local dynamic,
//! and checkers for their hypotheses.
//!
//! The constants `c0`, `c1` and `a` are not determined by the theory; they
//! are caller inputs with default 1.0. Absolute values of the bounds are
//! therefore only meaningful up to those constants; growth rates are not
//! affected.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::properties::{lipschitz_estimate, LipschitzEstimate};
use crate::game::{GameSpec, StateSpace};
use crate::kernel::ln_factorial;
use crate::simulate::{ChurnEvent, ChurnKind};

const LN_1E300: f64 = 690.775_527_898_213_7;

/// A positive quantity carried as its natural log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogValue {
    pub ln: f64,
}

impl LogValue {
    pub fn from_ln(ln: f64) -> Self {
        Self { ln }
    }

    /// `None` above 1e300.
    pub fn value(&self) -> Option<f64> {
        (self.ln <= LN_1E300).then(|| self.ln.exp())
    }

    pub fn log10(&self) -> f64 {
        self.ln / std::f64::consts::LN_10
    }

    pub fn overflows(&self) -> bool {
        self.ln > LN_1E300
    }
}

impl Serialize for LogValue {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("LogValue", 3)?;
        st.serialize_field("value", &self.value())?;
        st.serialize_field("log10", &self.log10())?;
        st.serialize_field("overflow", &self.overflows())?;
        st.end()
    }
}

fn ln_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// Undetermined constants of the bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundConstants {
    pub c0: f64,
    pub c1: f64,
    pub a: f64,
    /// Population-balance parameter: every population keeps at least `1/k`
    /// of the agents.
    pub k: f64,
}

impl Default for BoundConstants {
    fn default() -> Self {
        Self {
            c0: 1.0,
            c1: 1.0,
            a: 1.0,
            k: 2.0,
        }
    }
}

/// Smallest rationality guaranteeing expected potential within `eps` of its
/// maximum: `max{(4m(s-1)/eps) log 2ms, (4m(s-1)/eps) log(8 m s lambda/eps)}`.
pub fn beta_lower_bound(m: usize, s: usize, lambda: f64, eps: f64) -> f64 {
    let (mf, sf) = (m as f64, s as f64);
    let factor = 4.0 * mf * (sf - 1.0) / eps;
    let first = factor * (2.0 * mf * sf).ln();
    if lambda <= 0.0 {
        return first;
    }
    let second = factor * (8.0 * mf * sf * lambda / eps).ln();
    first.max(second)
}

/// Natural log of the prefactor `2^{2ms} c1 e^{3 beta} m (m(s-1))!^2 n / (4 alpha)`.
fn ln_time_prefactor(m: usize, s: usize, n: f64, alpha: f64, beta: f64, c1: f64) -> f64 {
    let (mf, sf) = (m as f64, s as f64);
    2.0 * mf * sf * std::f64::consts::LN_2
        + c1.ln()
        + 3.0 * beta
        + mf.ln()
        + 2.0 * ln_factorial((m * (s - 1)) as u32)
        + n.ln()
        - (4.0 * alpha).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeBound {
    /// The bound itself; absent when the bracketed factor is not positive, in
    /// which case the bound is vacuous (every `t >= 0` qualifies).
    pub bound: Option<LogValue>,
    pub ln_prefactor: f64,
    /// `log log (n+1)^{ms-m} + log beta + 2 log(1/eps)`.
    pub log_factor: f64,
}

impl TimeBound {
    pub fn value(&self) -> f64 {
        match self.bound {
            Some(b) => b.value().unwrap_or(f64::INFINITY),
            None => 0.0,
        }
    }
}

/// Time after which the expected potential is within `eps` of its maximum:
/// `prefactor * (log((ms - m) log(n+1)) + log beta + 2 log(1/eps))`.
pub fn theorem1_time_bound(
    m: usize,
    s: usize,
    n: u64,
    alpha: f64,
    beta: f64,
    eps: f64,
    c1: f64,
) -> Result<TimeBound> {
    if m == 0
        || s < 2
        || n == 0
        || !(alpha > 0.0)
        || !(beta > 0.0)
        || !(eps > 0.0 && eps < 1.0)
        || !(c1 > 0.0)
    {
        return Err(Error::InvalidArgument(format!(
            "time bound needs m >= 1, s >= 2, n >= 1, alpha, beta, c1 > 0 and eps in (0,1); got m={m} s={s} n={n} alpha={alpha} beta={beta} eps={eps} c1={c1}"
        )));
    }
    let nf = n as f64;
    let log_factor =
        (((m * s - m) as f64) * (nf + 1.0).ln()).ln() + beta.ln() + 2.0 * (1.0 / eps).ln();
    let ln_prefactor = ln_time_prefactor(m, s, nf, alpha, beta, c1);
    Ok(TimeBound {
        bound: (log_factor > 0.0).then(|| LogValue::from_ln(ln_prefactor + log_factor.ln())),
        ln_prefactor,
        log_factor,
    })
}

/// Outcome of one hypothesis check. `margin` is `lhs - rhs` for an
/// inequality `lhs >= rhs` (the worst one over all checked instants).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionResult {
    pub pass: bool,
    pub margin: f64,
    pub detail: String,
}

impl ConditionResult {
    fn geq(lhs: f64, rhs: f64, detail: String) -> Self {
        Self {
            pass: lhs >= rhs,
            margin: lhs - rhs,
            detail,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TheoremReport {
    pub eps: f64,
    pub beta: f64,
    pub beta_lower: f64,
    pub lipschitz: f64,
    pub lipschitz_kind: String,
    pub time_bound: Option<TimeBound>,
    /// Minimum spacing between action-set changes.
    pub spacing: Option<LogValue>,
    /// Time after which the churn guarantee applies.
    pub warmup: Option<LogValue>,
    pub conditions: BTreeMap<String, ConditionResult>,
    pub constants: BoundConstants,
    pub notes: Vec<String>,
}

impl TheoremReport {
    pub fn all_pass(&self) -> bool {
        self.conditions.values().all(|c| c.pass)
    }

    /// Aligned plain-text rendering.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let fmt_log = |v: &Option<LogValue>| match v {
            Some(v) => match v.value() {
                Some(x) => format!("{x:.6e}"),
                None => format!("10^{:.3}", v.log10()),
            },
            None => "-".to_string(),
        };
        out.push_str(&format!("{:<28}{}\n", "eps", self.eps));
        out.push_str(&format!("{:<28}{}\n", "beta", self.beta));
        out.push_str(&format!(
            "{:<28}{:.6}\n",
            "beta lower bound", self.beta_lower
        ));
        out.push_str(&format!(
            "{:<28}{:.6} ({})\n",
            "lipschitz", self.lipschitz, self.lipschitz_kind
        ));
        if let Some(tb) = &self.time_bound {
            out.push_str(&format!("{:<28}{}\n", "time bound", fmt_log(&tb.bound)));
        }
        if self.spacing.is_some() {
            out.push_str(&format!(
                "{:<28}{}\n",
                "churn spacing",
                fmt_log(&self.spacing)
            ));
            out.push_str(&format!(
                "{:<28}{}\n",
                "warm-up time",
                fmt_log(&self.warmup)
            ));
        }
        out.push_str(&format!(
            "{:<28}c0={} c1={} a={} k={}\n",
            "constants", self.constants.c0, self.constants.c1, self.constants.a, self.constants.k
        ));
        for (name, c) in &self.conditions {
            out.push_str(&format!(
                "{:<28}{:<5} margin {:>14.6e}  {}\n",
                name,
                if c.pass { "pass" } else { "FAIL" },
                c.margin,
                c.detail
            ));
        }
        for n in &self.notes {
            out.push_str(&format!("note: {n}\n"));
        }
        out
    }
}

const CONSTANTS_NOTE: &str =
    "c0, c1 and a are not determined by the theory; values shown are caller inputs";

fn size_condition(sizes: &[u32], action_counts: &[usize]) -> ConditionResult {
    let lhs: f64 = sizes.iter().map(|&n| f64::from(n).powi(2)).sum();
    let rhs = (action_counts.iter().sum::<usize>() - action_counts.len()) as f64;
    ConditionResult::geq(
        lhs,
        rhs,
        format!("sum n_i^2 = {lhs} vs sum s_i - m = {rhs}"),
    )
}

/// Check the static hypotheses (Lipschitz potential, population sizes,
/// rationality) and evaluate the time bound.
pub fn check_theorem1_conditions(
    space: &StateSpace,
    eps: f64,
    constants: BoundConstants,
) -> Result<TheoremReport> {
    let lip = lipschitz_estimate(space);
    theorem1_report(space.game(), lip, eps, constants)
}

/// As [`check_theorem1_conditions`] with a precomputed Lipschitz value (for
/// games too large to enumerate).
pub fn theorem1_report(
    game: &GameSpec,
    lip: LipschitzEstimate,
    eps: f64,
    constants: BoundConstants,
) -> Result<TheoremReport> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "eps must lie in (0,1), got {eps}"
        )));
    }
    let (m, s) = (game.m(), game.s());
    let sizes: Vec<u32> = game.populations().iter().map(|p| p.size).collect();
    let actions: Vec<usize> = game.populations().iter().map(|p| p.actions.len()).collect();
    let beta_lower = beta_lower_bound(m, s, lip.lambda, eps);
    let mut conditions = BTreeMap::new();
    conditions.insert(
        "(i) lipschitz".to_string(),
        ConditionResult {
            pass: lip.lambda.is_finite(),
            margin: 0.0,
            detail: format!("lambda = {}", lip.lambda),
        },
    );
    conditions.insert(
        "(ii) population sizes".to_string(),
        size_condition(&sizes, &actions),
    );
    conditions.insert(
        "rationality".to_string(),
        ConditionResult::geq(
            game.beta(),
            beta_lower,
            format!("beta = {} vs {beta_lower}", game.beta()),
        ),
    );
    let time_bound = if s >= 2 && game.beta() > 0.0 {
        Some(theorem1_time_bound(
            m,
            s,
            u64::from(game.n()),
            game.alpha(),
            game.beta(),
            eps,
            constants.c1,
        )?)
    } else {
        None
    };
    Ok(TheoremReport {
        eps,
        beta: game.beta(),
        beta_lower,
        lipschitz: lip.lambda,
        lipschitz_kind: format!("{:?}", lip.kind),
        time_bound,
        spacing: None,
        warmup: None,
        conditions,
        constants,
        notes: vec![CONSTANTS_NOTE.to_string()],
    })
}

/// `8 c0 eps^-2 e^{3 beta} (6 beta lambda + e^beta k (s-1))`.
pub fn churn_spacing(c0: f64, eps: f64, beta: f64, lambda: f64, k: f64, s: usize) -> LogValue {
    let inner = ln_add(
        (6.0 * beta * lambda).ln(),
        beta + (k * (s as f64 - 1.0)).ln(),
    );
    LogValue::from_ln(8f64.ln() + c0.ln() - 2.0 * eps.ln() + 3.0 * beta + inner)
}

/// `|N0| e^{3 beta} c0 ((ms - m)! log(|N0| + 2) + beta) / eps^2`.
pub fn churn_warmup(n0: u32, m: usize, s: usize, beta: f64, eps: f64, c0: f64) -> LogValue {
    let n0f = f64::from(n0);
    let first = ln_factorial((m * s - m) as u32) + (n0f + 2.0).ln().ln();
    let inner = ln_add(first, beta.ln());
    LogValue::from_ln(n0f.ln() + 3.0 * beta + c0.ln() + inner - 2.0 * eps.ln())
}

/// Population-count floor `max{4 alpha m e^{-3 beta} / (2^{2ms} c1 m^2 (m(s-1))!^2), 2 beta lambda + 1}`.
pub fn churn_min_players(m: usize, s: usize, alpha: f64, beta: f64, lambda: f64, c1: f64) -> f64 {
    let (mf, sf) = (m as f64, s as f64);
    let ln_first = (4.0 * alpha * mf).ln()
        - 3.0 * beta
        - (2.0 * mf * sf * std::f64::consts::LN_2
            + c1.ln()
            + 2.0 * mf.ln()
            + 2.0 * ln_factorial((m * (s - 1)) as u32));
    ln_first.exp().max(2.0 * beta * lambda + 1.0)
}

/// Inputs for checking a churn schedule.
#[derive(Debug, Clone)]
pub struct ChurnCheck<'a> {
    pub game0: &'a GameSpec,
    pub churn: &'a [ChurnEvent],
    pub lambda: f64,
    pub eps: f64,
    pub constants: BoundConstants,
    /// Use this spacing instead of the computed one.
    pub spacing_override: Option<f64>,
}

/// Evaluate the churn hypotheses at the initial time and after every event:
/// player-count floor, population balance, and at most one action-set change
/// per spacing window (agents never switch populations in this model).
pub fn check_theorem2_conditions(input: &ChurnCheck<'_>) -> Result<TheoremReport> {
    let game = input.game0;
    let (m, s) = (game.m(), game.s());
    let beta = game.beta();
    let eps = input.eps;
    let c = input.constants;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "eps must lie in (0,1), got {eps}"
        )));
    }
    let lip = LipschitzEstimate {
        lambda: input.lambda,
        kind: crate::game::properties::LipschitzKind::Exact,
        pairs_checked: 0,
    };
    let mut report = theorem1_report(game, lip, eps, c)?;
    report.lipschitz_kind = "supplied".to_string();
    let spacing = match input.spacing_override {
        Some(v) if v > 0.0 => LogValue::from_ln(v.ln()),
        Some(v) => {
            return Err(Error::InvalidArgument(format!(
                "spacing override must be > 0, got {v}"
            )))
        }
        None => churn_spacing(c.c0, eps, beta, input.lambda, c.k, s),
    };
    report.spacing = Some(spacing);
    report.warmup = Some(churn_warmup(game.n(), m, s, beta, eps, c.c0));

    let floor = churn_min_players(m, s, game.alpha(), beta, input.lambda, c.c1);
    let actions: Vec<usize> = game.populations().iter().map(|p| p.actions.len()).collect();
    let mut sizes: Vec<u32> = game.populations().iter().map(|p| p.size).collect();
    let mut players = ConditionResult::geq(f64::from(game.n()), floor, "at t = 0".into());
    let mut balance = balance_condition(&sizes, c.k, 0.0);
    let mut pop_sizes = size_condition(&sizes, &actions);
    let mut order_ok = true;
    let mut last_time = f64::NEG_INFINITY;
    for ev in input.churn {
        if ev.population >= m {
            return Err(Error::InvalidArgument(format!(
                "churn event at t = {} names population {} of {m}",
                ev.time, ev.population
            )));
        }
        if ev.time < last_time {
            order_ok = false;
        }
        last_time = ev.time;
        match ev.kind {
            ChurnKind::Arrive => sizes[ev.population] += 1,
            ChurnKind::Depart => sizes[ev.population] = sizes[ev.population].saturating_sub(1),
        }
        let total: u32 = sizes.iter().sum();
        let here = ConditionResult::geq(f64::from(total), floor, format!("at t = {}", ev.time));
        if here.margin < players.margin {
            players = here;
        }
        let b = balance_condition(&sizes, c.k, ev.time);
        if b.margin < balance.margin {
            balance = b;
        }
        let p = size_condition(&sizes, &actions);
        if p.margin < pop_sizes.margin {
            pop_sizes = ConditionResult {
                detail: format!("{} at t = {}", p.detail, ev.time),
                ..p
            };
        }
    }
    let spacing_value = spacing.value().unwrap_or(f64::INFINITY);
    let mut window = ConditionResult {
        pass: order_ok,
        margin: f64::INFINITY,
        detail: if order_ok {
            "no action-set changes".into()
        } else {
            "events are not sorted by time".into()
        },
    };
    for pair in input.churn.windows(2) {
        let gap = pair[1].time - pair[0].time;
        let margin = gap - spacing_value;
        if margin < window.margin {
            window = ConditionResult {
                pass: order_ok && margin >= 0.0,
                margin,
                detail: format!(
                    "closest changes at t = {} and t = {} (gap {gap}, need {spacing_value:.6e})",
                    pair[0].time, pair[1].time
                ),
            };
        }
    }
    if input.churn.len() == 1 {
        window.detail = "one action-set change".into();
    }
    window.pass = window.pass && window.margin >= 0.0;
    report
        .conditions
        .insert("(ii) population sizes".into(), pop_sizes);
    report
        .conditions
        .insert("(iii) player count".into(), players);
    report
        .conditions
        .insert("(iv) population balance".into(), balance);
    report.conditions.insert("(v) churn spacing".into(), window);
    report
        .notes
        .push("the potential is evaluated on the current player count at every instant".into());
    Ok(report)
}

fn balance_condition(sizes: &[u32], k: f64, t: f64) -> ConditionResult {
    let total: f64 = sizes.iter().map(|&n| f64::from(n)).sum();
    let (i, smallest) = sizes
        .iter()
        .enumerate()
        .min_by_key(|(_, &n)| n)
        .map(|(i, &n)| (i, f64::from(n)))
        .unwrap_or((0, 0.0));
    ConditionResult::geq(
        smallest,
        total / k,
        format!("population {i} has {smallest} of {total} at t = {t}"),
    )
}
