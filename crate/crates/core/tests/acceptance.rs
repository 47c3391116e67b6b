//! One line per acceptance criterion, each `PASS` or `FAIL` with the measured
//! numbers. Run with `--nocapture` to see the lines alongside the results.

mod common;

use std::sync::Arc;
use std::time::Instant;

use common::agent;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use semianon::analysis::{convergence_table, evolve, evolve_grid, relative_entropy, TableParams};
use semianon::bounds::{beta_lower_bound, theorem1_time_bound};
use semianon::game::StateSpace;
use semianon::kernel::{
    stationary_closed_form, stationary_numeric, stationary_numeric_with, Distribution, Dynamic,
    Kernel, StationaryMethod,
};
use semianon::simulate::experiments::{
    churn_study, example4_band, example6_sensor, sensor_crossover, BandParams, ChurnStudyParams,
    SensorParams,
};

fn verdict(number: u32, name: &str, pass: bool, detail: &str, started: Instant) {
    println!(
        "criterion {number} {name}: {} ({detail}; {:.1} s)",
        if pass { "PASS" } else { "FAIL" },
        started.elapsed().as_secs_f64()
    );
    assert!(pass, "criterion {number} {name}: {detail}");
}

#[test]
fn criterion_1_stationary_distribution() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut worst_tv, mut worst_balance, mut largest) = (0.0f64, 0.0f64, 0);
    let games = 24;
    for _ in 0..games {
        let beta = rng.gen_range(0.0..=5.0);
        let game = common::random_game(&mut rng, 500, beta);
        let k = Kernel::for_game(&game, Dynamic::Mlll).unwrap();
        largest = largest.max(k.len());
        let closed = stationary_closed_form(k.space(), beta, Dynamic::Mlll).unwrap();
        let power = stationary_numeric_with(&k, StationaryMethod::Power).unwrap();
        let tv = 0.5
            * closed
                .probs()
                .iter()
                .zip(power.probs())
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>();
        worst_tv = worst_tv.max(tv);
        let p = closed.probs();
        for i in 0..k.len() {
            for (j, v) in k.row(i) {
                let (a, b) = (p[i] * v, p[j] * k.get(j, i));
                if a.max(b) > 0.0 {
                    worst_balance = worst_balance.max((a - b).abs() / a.max(b));
                }
            }
        }
    }
    verdict(
        1,
        "stationary distribution",
        largest <= 500 && worst_tv <= 1e-10 && worst_balance <= 1e-12,
        &format!(
            "{games} games up to {largest} states, closed form vs power iteration TV {worst_tv:.2e} <= 1e-10, detailed balance {worst_balance:.2e} <= 1e-12 relative"
        ),
        started,
    );
}

#[test]
fn criterion_2_convergence_table() {
    let started = Instant::now();
    let rows = convergence_table(&TableParams::default()).unwrap();
    let published: [(Dynamic, u32, f64, f64, f64); 12] = [
        (Dynamic::Lll, 1, 3.77, 9430.0, 0.02),
        (Dynamic::Lll, 5, 3.77, 11947.0, 0.02),
        (Dynamic::Lll, 50, 3.77, 40250.0, 0.02),
        (Dynamic::Lll, 500, 3.77, 323277.0, 0.02),
        (Dynamic::Prior, 1, 2.39, 1325.0, 0.10),
        (Dynamic::Prior, 5, 2.44, 1589.0, 0.10),
        (Dynamic::Prior, 50, 2.83, 3342.0, 0.10),
        (Dynamic::Prior, 500, 3.72, 15550.0, 0.10),
        (Dynamic::Mlll, 1, 1.28, 743.0, 0.02),
        (Dynamic::Mlll, 5, 1.28, 743.0, 0.02),
        (Dynamic::Mlll, 50, 1.28, 743.0, 0.02),
        (Dynamic::Mlll, 500, 1.28, 743.0, 0.02),
    ];
    let mut beta_ok = true;
    let mut updates_ok = true;
    let mut cells = Vec::new();
    for (d, n3, beta, updates, tol) in published {
        let r = rows
            .iter()
            .find(|r| r.dynamic == d && r.n3 == n3)
            .expect("row present");
        let b_ok = (r.beta - beta).abs() <= 0.02;
        let u_ok = (r.updates - updates).abs() <= tol * updates;
        beta_ok &= b_ok;
        updates_ok &= u_ok;
        cells.push(format!(
            "{} n3={n3} beta {:.3}{} updates {:.0}/{updates:.0}{}",
            d.name(),
            r.beta,
            if b_ok { "" } else { "!" },
            r.updates,
            if u_ok { "" } else { "!" },
        ));
    }
    verdict(
        2,
        "convergence table",
        beta_ok && updates_ok,
        &format!(
            "rationality within 0.02: {}; updates within 2% (10% for the prior variant): {}; {}",
            if beta_ok { "yes" } else { "no" },
            if updates_ok { "yes" } else { "no" },
            cells.join(", ")
        ),
        started,
    );
}

#[test]
fn criterion_3_convergence_band() {
    let started = Instant::now();
    let rows = example4_band(&BandParams::default()).unwrap();
    let mut in_band = true;
    let mut cells = Vec::new();
    for r in &rows {
        let ratio = r.ratio();
        in_band &= ratio.is_some_and(|q| (1.5..=5.0).contains(&q));
        cells.push(format!(
            "n={} time {} = {} n lnln n",
            r.n,
            r.time.map_or("none".into(), |t| format!("{t:.1}")),
            ratio.map_or("?".into(), |q| format!("{q:.2}"))
        ));
    }
    let time = |n| rows.iter().find(|r| r.n == n).and_then(|r| r.time);
    let growth = match (time(60), time(20)) {
        (Some(a), Some(b)) => a / b,
        _ => f64::NAN,
    };
    let growth_ok = (2.4..=4.2).contains(&growth);
    verdict(
        3,
        "convergence band",
        in_band && growth_ok,
        &format!(
            "{}; all within [1.5, 5]: {}; n=60/n=20 ratio {growth:.2} in [2.4, 4.2]: {}",
            cells.join(", "),
            if in_band { "yes" } else { "no" },
            if growth_ok { "yes" } else { "no" }
        ),
        started,
    );
}

#[test]
fn criterion_4_sensor_crossover() {
    let started = Instant::now();
    let rows = example6_sensor(&SensorParams::default()).unwrap();
    let misses: usize = rows.iter().map(|r| r.misses).sum();
    let crossover = sensor_crossover(&rows);
    let detail = match crossover {
        Some(n_w) => {
            let get = |d| {
                rows.iter()
                    .find(|r| r.n_w == n_w && r.dynamic == d)
                    .unwrap()
                    .iterations
            };
            let (m, l) = (get(Dynamic::Mlll), get(Dynamic::Lll));
            format!(
                "first at n_w = {n_w}: modified {:.0} +- {:.0} vs standard {:.0} +- {:.0} iterations",
                m.mean, m.ci95, l.mean, l.ci95
            )
        }
        None => "no n_w in 2..40 separates the 95% intervals".into(),
    };
    verdict(
        4,
        "sensor crossover",
        crossover.is_some() && misses == 0,
        &format!("{detail}; {misses} runs missed the target"),
        started,
    );
}

#[test]
fn criterion_5_agent_level_oracle() {
    let started = Instant::now();
    let mut lump: f64 = 0.0;
    for game in agent::lumping_games() {
        for d in Dynamic::ALL {
            lump = lump.max(agent::lumping_error(&game, d));
        }
    }
    let mut tv: f64 = 0.0;
    for (gi, game) in agent::simulation_games().iter().enumerate() {
        for (di, d) in Dynamic::ALL.into_iter().enumerate() {
            tv = tv.max(agent::simulation_tv(
                game,
                d,
                100_000,
                0.7,
                500 + 10 * gi as u64 + di as u64,
            ));
        }
    }
    verdict(
        5,
        "agent-level oracle",
        lump <= 1e-12 && tv <= 0.03,
        &format!(
            "kernel lumping error {lump:.2e} <= 1e-12, simulation two-sample TV {tv:.4} <= 0.03 at 1e5 samples"
        ),
        started,
    );
}

#[test]
fn criterion_6_numerics() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(66);
    let (mut eig, mut semi, mut pinsker, mut entropy) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for round in 0..10 {
        let beta = 0.4 * f64::from(round);
        let game = common::random_game(&mut rng, 200, beta);
        let space = Arc::new(StateSpace::enumerate(&game).unwrap());
        for d in Dynamic::ALL {
            let k = Kernel::build(&game, Arc::clone(&space), d).unwrap();
            let pi = match d {
                Dynamic::Prior => stationary_numeric(&k).unwrap(),
                _ => stationary_closed_form(&space, beta, d).unwrap(),
            };
            let mu0 = Distribution::point_mass(k.len(), round as usize % k.len());
            if d != Dynamic::Prior {
                for tau in [0.5, 7.0, 60.0] {
                    let a = evolve(&k, &mu0, tau).unwrap();
                    let b = common::evolve_by_eigen(&k, &pi, &mu0, tau);
                    for (x, y) in a.probs().iter().zip(&b) {
                        eig = eig.max((x - y).abs());
                    }
                }
            }
            let (t1, t2) = (3.7, 11.2);
            let a = evolve(&k, &evolve(&k, &mu0, t1).unwrap(), t2).unwrap();
            let b = evolve(&k, &mu0, t1 + t2).unwrap();
            for (x, y) in a.probs().iter().zip(b.probs()) {
                semi = semi.max((x - y).abs());
            }
            let grid: Vec<f64> = (0..30).map(|i| 0.75 * f64::from(i)).collect();
            let run = evolve_grid(&k, &mu0, &grid, &pi).unwrap();
            let mut last = f64::INFINITY;
            for (mu, tv) in run.dists.iter().zip(&run.tv_to_stationary) {
                let dkl = relative_entropy(mu, &pi).unwrap();
                pinsker = pinsker.max(tv - (dkl / 2.0).sqrt());
                entropy = entropy.max(dkl - last);
                last = dkl;
            }
        }
    }
    verdict(
        6,
        "numerics",
        eig <= 1e-8 && semi <= 1e-10 && pinsker <= 1e-12 && entropy <= 1e-10,
        &format!(
            "evolution vs eigendecomposition {eig:.2e} <= 1e-8, semigroup {semi:.2e} <= 1e-10, Pinsker excess {pinsker:.2e} <= 0, entropy increase {entropy:.2e} <= 0"
        ),
        started,
    );
}

/// `sum_{k<=n} ln k`.
fn ln_fact(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// The time bound's natural log, grouped term by term.
fn time_bound_ln(m: usize, s: usize, n: u64, alpha: f64, beta: f64, eps: f64) -> Option<f64> {
    let (mf, sf, nf) = (m as f64, s as f64, n as f64);
    let ln_pre =
        (2.0 * mf * sf) * 2f64.ln() + 3.0 * beta + mf.ln() + 2.0 * ln_fact(m * (s - 1)) + nf.ln()
            - 4f64.ln()
            - alpha.ln();
    let factor = ((mf * sf - mf).ln() + nf.ln_1p().ln()) + beta.ln() - 2.0 * eps.ln();
    (factor > 0.0).then(|| ln_pre + factor.ln())
}

fn beta_bound(m: usize, s: usize, lambda: f64, eps: f64) -> f64 {
    let (mf, sf) = (m as f64, s as f64);
    let lead = 4.0 * mf * (sf - 1.0) / eps;
    let a = lead * (2f64.ln() + mf.ln() + sf.ln());
    if lambda <= 0.0 {
        return a;
    }
    let b = lead * (3.0 * 2f64.ln() + mf.ln() + sf.ln() + lambda.ln() - eps.ln());
    a.max(b)
}

#[test]
fn criterion_7_formula_suite() {
    let started = Instant::now();
    let (mut beta_err, mut time_err) = (0.0f64, 0.0f64);
    let mut points = 0;
    let mut monotone = true;
    let epss = [0.01, 0.05, 0.1, 0.2, 0.4];
    let lambdas = [0.0, 0.5, 1.0, 4.0];
    let ns = [2u64, 20, 1_000, 1_000_000, 1u64 << 40];
    let betas = [0.5, 1.0, 3.0, 10.0, 40.0];
    for m in 1..=4usize {
        for s in 2..=5usize {
            for &eps in &epss {
                for &lambda in &lambdas {
                    let ours = beta_lower_bound(m, s, lambda, eps);
                    let reference = beta_bound(m, s, lambda, eps);
                    beta_err = beta_err.max(((ours - reference) / reference).abs());
                    points += 1;
                }
                for w in lambdas.windows(2) {
                    monotone &=
                        beta_lower_bound(m, s, w[1], eps) >= beta_lower_bound(m, s, w[0], eps);
                }
            }
            for w in epss.windows(2) {
                monotone &= beta_lower_bound(m, s, 1.0, w[1]) <= beta_lower_bound(m, s, 1.0, w[0]);
            }
            for &n in &ns {
                for &beta in &betas {
                    for &eps in &[0.01, 0.1] {
                        let alpha = 1.0 / m as f64;
                        let t = theorem1_time_bound(m, s, n, alpha, beta, eps, 1.0).unwrap();
                        let reference = time_bound_ln(m, s, n, alpha, beta, eps);
                        match (t.bound, reference) {
                            (Some(b), Some(r)) => {
                                // relative error of the value is the absolute error of its log
                                time_err = time_err.max((b.ln - r).abs().exp_m1());
                            }
                            (None, None) => {}
                            _ => time_err = f64::INFINITY,
                        }
                        points += 1;
                    }
                }
            }
            let ln_t = |n, beta, eps| {
                theorem1_time_bound(m, s, n, 1.0, beta, eps, 1.0)
                    .unwrap()
                    .bound
                    .map_or(f64::NEG_INFINITY, |b| b.ln)
            };
            for w in ns.windows(2) {
                monotone &= ln_t(w[1], 3.0, 0.05) > ln_t(w[0], 3.0, 0.05);
            }
            for w in betas.windows(2) {
                monotone &= ln_t(1000, w[1], 0.05) > ln_t(1000, w[0], 0.05);
            }
            for w in epss.windows(2) {
                monotone &= ln_t(1000, 3.0, w[1]) < ln_t(1000, 3.0, w[0]);
            }
        }
    }
    verdict(
        7,
        "formula suite",
        points >= 1000 && beta_err <= 1e-12 && time_err <= 1e-12 && monotone,
        &format!(
            "{points} grid points, rationality bound error {beta_err:.2e}, time bound error {time_err:.2e} (both <= 1e-12 relative), monotone: {monotone}"
        ),
        started,
    );
}

#[test]
fn criterion_8_churn_property() {
    let started = Instant::now();
    let p = ChurnStudyParams::default();
    let study = churn_study(&p).unwrap();
    let hypotheses = [
        "(i) lipschitz",
        "(ii) population sizes",
        "(iii) player count",
        "(iv) population balance",
        "(v) churn spacing",
    ];
    let slow_ok = hypotheses
        .iter()
        .all(|h| study.slow.report.conditions[*h].pass);
    let fast_violates = !study.fast.report.conditions["(v) churn spacing"].pass;
    let floor = study.max_potential - p.eps;
    let slow_avg = study.slow.time_average;
    let fast_avg = study.fast.time_average;
    let pass = slow_ok && fast_violates && slow_avg >= floor && study.fast_is_worse();
    verdict(
        8,
        "churn property",
        pass,
        &format!(
            "{} replicates; slow schedule meets churn hypotheses: {slow_ok}, time average {slow_avg:.6} >= {floor:.6}; 100x faster schedule violates spacing: {fast_violates}, excess {:.4e} vs slow {:.4e} (95% intervals disjoint: {})",
            p.replicates,
            study.fast.excess.mean,
            study.slow.excess.mean,
            study.fast_is_worse()
        ),
        started,
    );
}
