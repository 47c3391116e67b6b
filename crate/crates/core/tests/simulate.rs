mod common;

use proptest::prelude::*;
use rayon::ThreadPoolBuilder;
use semianon::analysis::{mixing_time_tv, tv_distance};
use semianon::game::{catalog, GameSpec, StateSpace};
use semianon::kernel::{stationary_closed_form, stationary_numeric, Distribution, Dynamic, Kernel};
use semianon::simulate::{
    replicate_rng, run_replicates, simulate, simulate_time_varying, ChurnEvent, ChurnOptions,
    SimOptions,
};

#[test]
fn population_local_clocks_fire_at_alpha_n_per_occupied_pair() {
    let game = catalog::example3(3, 3, 2, 0.5, 1.0).unwrap();
    let x0 = game.concentrated_state(&[0, 0, 0]).unwrap();
    let trace = simulate(
        &game,
        Dynamic::Mlll,
        &x0,
        &SimOptions::new(3000.0),
        &mut replicate_rng(21, 0),
    )
    .unwrap();
    let rate = game.alpha() * f64::from(game.n());
    for (f, (&events, &occupied)) in trace
        .slot_events
        .iter()
        .zip(&trace.slot_occupied_time)
        .enumerate()
    {
        let expected = rate * occupied;
        let sigma = expected.sqrt().max(1.0);
        assert!(
            (events as f64 - expected).abs() <= 3.0 * sigma,
            "slot {f}: {events} events vs {expected:.1} expected"
        );
    }
}

#[test]
fn unit_clocks_fire_at_n() {
    let game = catalog::example4(12, 0.25, 1.0).unwrap();
    let x0 = game.concentrated_state(&[0, 0]).unwrap();
    let horizon = 2000.0;
    let trace = simulate(
        &game,
        Dynamic::Lll,
        &x0,
        &SimOptions::new(horizon),
        &mut replicate_rng(22, 0),
    )
    .unwrap();
    let expected = f64::from(game.n()) * horizon;
    assert!((trace.events as f64 - expected).abs() <= 3.0 * expected.sqrt());
    // each pair fires in proportion to its occupancy
    let total_occ: f64 = trace.slot_events.iter().map(|&e| e as f64).sum();
    assert_eq!(total_occ as u64, trace.events);
}

fn stationary(k: &Kernel) -> Distribution {
    match k.dynamic() {
        Dynamic::Prior => stationary_numeric(k).unwrap(),
        d => stationary_closed_form(k.space(), k.beta(), d).unwrap(),
    }
}

#[test]
fn long_run_occupancy_matches_stationary() {
    let games: Vec<GameSpec> = vec![
        catalog::example3(2, 2, 1, 0.5, 0.8).unwrap(),
        catalog::example4(4, 0.25, 2.0).unwrap(),
    ];
    let samples = 100_000u64;
    for (gi, game) in games.iter().enumerate() {
        let space = std::sync::Arc::new(StateSpace::enumerate(game).unwrap());
        let x0 = game.concentrated_state(&vec![0; game.m()]).unwrap();
        let i0 = space.index(&x0).unwrap();
        for dynamic in Dynamic::ALL {
            let k = Kernel::build(game, space.clone(), dynamic).unwrap();
            let pi = stationary(&k);
            let t = mixing_time_tv(&k, &Distribution::point_mass(k.len(), i0), &pi, 0.01).unwrap();
            let horizon = 10.0 * t.wall;
            let mut opts = SimOptions::new(horizon);
            opts.sample_dt = horizon;
            let mut hist = vec![0.0; k.len()];
            for r in 0..samples {
                let tr = simulate(
                    game,
                    dynamic,
                    &x0,
                    &opts,
                    &mut replicate_rng(7 + gi as u64, r),
                )
                .unwrap();
                hist[space.index_of(&tr.final_state).unwrap()] += 1.0 / samples as f64;
            }
            let tv = tv_distance(&Distribution::new(hist).unwrap(), &pi).unwrap();
            assert!(tv <= 0.05, "game {gi} {dynamic:?}: TV {tv}");
        }
    }
}

#[test]
fn seeded_runs_are_bit_identical_across_pool_sizes() {
    let game = catalog::example4(10, 0.25, 3.0).unwrap();
    let x0 = game.concentrated_state(&[0, 1]).unwrap();
    let mut opts = SimOptions::new(20.0);
    opts.hit_level = Some(0.5);
    let run = |threads: usize| {
        let pool = ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| run_replicates(&game, Dynamic::Mlll, &x0, &opts, 24, 99).unwrap())
    };
    let a = serde_json::to_string(&run(1)).unwrap();
    let b = serde_json::to_string(&run(3)).unwrap();
    assert_eq!(a, b);
    let c =
        serde_json::to_string(&run_replicates(&game, Dynamic::Mlll, &x0, &opts, 24, 100).unwrap())
            .unwrap();
    assert_ne!(a, c);
    let one = simulate(&game, Dynamic::Prior, &x0, &opts, &mut replicate_rng(5, 3)).unwrap();
    let two = simulate(&game, Dynamic::Prior, &x0, &opts, &mut replicate_rng(5, 3)).unwrap();
    assert_eq!(one, two);
}

#[test]
fn stopping_at_hit_records_the_first_crossing() {
    let game = catalog::example2(6, 0.5, 2.0).unwrap();
    let x0 = game.concentrated_state(&[1, 1]).unwrap();
    let level = 0.9 * StateSpace::enumerate(&game).unwrap().max_potential();
    let mut opts = SimOptions::new(1e4);
    opts.hit_level = Some(level);
    opts.stop_at_hit = true;
    opts.record_states = true;
    let tr = simulate(&game, Dynamic::Mlll, &x0, &opts, &mut replicate_rng(3, 0)).unwrap();
    let hit = tr.hit.expect("hits within the horizon");
    assert_eq!(tr.end_time, hit.time);
    assert_eq!(tr.events, hit.events);
    assert!(tr.potential.iter().all(|&p| p < level));
    let x = semianon::game::AggregateState::from_flat(&game, tr.final_state.clone()).unwrap();
    assert!(game.potential(&x) >= level);
}

fn schedule() -> impl Strategy<Value = Vec<(f64, bool, usize)>> {
    proptest::collection::vec((0.0f64..50.0, any::<bool>(), 0usize..2), 0..12).prop_map(|mut v| {
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        v
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn churn_conserves_players_between_events(events in schedule(), seed in 0u64..1000) {
        let game = catalog::example2(4, 0.5, 1.0).unwrap();
        let x0 = game.concentrated_state(&[0, 0]).unwrap();
        let churn: Vec<ChurnEvent> = events
            .iter()
            .map(|&(t, arrive, pop)| if arrive {
                ChurnEvent::arrive(t, pop, None)
            } else {
                ChurnEvent::depart(t, pop)
            })
            .collect();
        let mut opts = ChurnOptions::new(60.0);
        opts.sample_dt = 0.5;
        let tr = simulate_time_varying(&game, x0.counts(), &churn, &opts, &mut replicate_rng(seed, 0))
            .unwrap();
        prop_assert_eq!(tr.churn_applied + tr.churn_skipped, churn.len());
        // replay the bookkeeping: departures from an empty population are skipped
        let mut sizes = [2i64, 2];
        let mut skipped = 0;
        for &(_, arrive, pop) in &events {
            if arrive {
                sizes[pop] += 1;
            } else if sizes[pop] == 0 {
                skipped += 1;
            } else {
                sizes[pop] -= 1;
            }
        }
        prop_assert_eq!(tr.churn_skipped, skipped);
        prop_assert_eq!(tr.final_sizes.iter().map(|&s| i64::from(s)).collect::<Vec<_>>(), sizes.to_vec());
        let total: u32 = tr.final_state.iter().sum();
        prop_assert_eq!(i64::from(total), sizes[0] + sizes[1]);
        for (t, s) in tr.sample_times.iter().zip(&tr.sizes) {
            let expect: Vec<i64> = {
                let mut z = [2i64, 2];
                for &(te, arrive, pop) in &events {
                    if te > *t { break; }
                    if arrive { z[pop] += 1 } else if z[pop] > 0 { z[pop] -= 1 }
                }
                z.to_vec()
            };
            prop_assert_eq!(s.iter().map(|&v| i64::from(v)).collect::<Vec<_>>(), expect, "at t = {}", t);
        }
    }
}
