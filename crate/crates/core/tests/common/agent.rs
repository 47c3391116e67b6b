//! Per-agent reference model: every agent carries its own clock and action,
//! with nothing lumped. Used to check the aggregate kernels and simulator.

use std::collections::BTreeMap;

use rand::Rng;
use semianon::game::{AggregateState, GameSpec};
use semianon::kernel::Dynamic;

/// Population of each agent, populations in order.
pub fn owners(game: &GameSpec) -> Vec<usize> {
    game.populations()
        .iter()
        .enumerate()
        .flat_map(|(l, p)| std::iter::repeat(l).take(p.size as usize))
        .collect()
}

/// Flat counts of a profile; `profile[i]` indexes agent `i`'s action list.
pub fn counts(game: &GameSpec, owner: &[usize], profile: &[usize]) -> Vec<u32> {
    let mut c = vec![0u32; game.sigma()];
    for (i, &k) in profile.iter().enumerate() {
        c[game.slot(owner[i], k)] += 1;
    }
    c
}

fn phi(game: &GameSpec, c: Vec<u32>) -> f64 {
    game.potential(&AggregateState::from_flat(game, c).unwrap())
}

/// Clock rate of agent `i`.
pub fn rate(
    game: &GameSpec,
    dynamic: Dynamic,
    owner: &[usize],
    profile: &[usize],
    i: usize,
) -> f64 {
    let n = f64::from(game.n());
    let l = owner[i];
    let resource = game.populations()[l].actions[profile[i]];
    match dynamic {
        Dynamic::Lll => 1.0,
        Dynamic::Mlll => {
            let z = (0..profile.len())
                .filter(|&j| owner[j] == l && profile[j] == profile[i])
                .count();
            game.alpha() * n / z as f64
        }
        Dynamic::Prior => {
            let z = (0..profile.len())
                .filter(|&j| game.populations()[owner[j]].actions[profile[j]] == resource)
                .count();
            game.alpha() * n / z as f64
        }
    }
}

/// Logit probabilities of agent `i`'s next action: proportional to
/// `exp(beta U_i)`, and utility differences equal potential differences.
pub fn choice(game: &GameSpec, owner: &[usize], profile: &[usize], i: usize) -> Vec<f64> {
    let acts = game.populations()[owner[i]].actions.len();
    let mut p = profile.to_vec();
    let phis: Vec<f64> = (0..acts)
        .map(|b| {
            p[i] = b;
            phi(game, counts(game, owner, &p))
        })
        .collect();
    let top = phis.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = phis
        .iter()
        .map(|v| (game.beta() * (v - top)).exp())
        .collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

/// Every profile of the game.
pub fn profiles(game: &GameSpec) -> Vec<Vec<usize>> {
    let owner = owners(game);
    let mut out = vec![Vec::new()];
    for &l in &owner {
        let acts = game.populations()[l].actions.len();
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..acts).map(move |b| {
                    let mut q = p.clone();
                    q.push(b);
                    q
                })
            })
            .collect();
    }
    out
}

/// Off-diagonal generator row of a profile, summed by target counts.
pub fn generator_row(
    game: &GameSpec,
    dynamic: Dynamic,
    profile: &[usize],
) -> BTreeMap<Vec<u32>, f64> {
    let owner = owners(game);
    let mut row = BTreeMap::new();
    for i in 0..profile.len() {
        let r = rate(game, dynamic, &owner, profile, i);
        for (b, p) in choice(game, &owner, profile, i).into_iter().enumerate() {
            if b == profile[i] {
                continue;
            }
            let mut q = profile.to_vec();
            q[i] = b;
            *row.entry(counts(game, &owner, &q)).or_insert(0.0) += r * p;
        }
    }
    row
}

/// Agent-level path up to `horizon`; returns the final counts.
pub fn simulate<R: Rng>(
    game: &GameSpec,
    dynamic: Dynamic,
    start: &[usize],
    horizon: f64,
    rng: &mut R,
) -> Vec<u32> {
    let owner = owners(game);
    let mut profile = start.to_vec();
    let mut t = 0.0;
    loop {
        let rates: Vec<f64> = (0..profile.len())
            .map(|i| rate(game, dynamic, &owner, &profile, i))
            .collect();
        let total: f64 = rates.iter().sum();
        let u: f64 = rng.gen();
        t += -(1.0 - u).ln() / total;
        if t > horizon {
            return counts(game, &owner, &profile);
        }
        let mut pick = rng.gen::<f64>() * total;
        let mut i = rates.len() - 1;
        for (j, r) in rates.iter().enumerate() {
            if pick < *r {
                i = j;
                break;
            }
            pick -= r;
        }
        let probs = choice(game, &owner, &profile, i);
        let mut v = rng.gen::<f64>();
        let mut b = probs.len() - 1;
        for (j, p) in probs.iter().enumerate() {
            if v < *p {
                b = j;
                break;
            }
            v -= p;
        }
        profile[i] = b;
    }
}

/// Total variation between two empirical samples of count vectors.
pub fn two_sample_tv(a: &[Vec<u32>], b: &[Vec<u32>]) -> f64 {
    let mut h: BTreeMap<&[u32], (f64, f64)> = BTreeMap::new();
    for x in a {
        h.entry(x).or_default().0 += 1.0 / a.len() as f64;
    }
    for x in b {
        h.entry(x).or_default().1 += 1.0 / b.len() as f64;
    }
    0.5 * h.values().map(|(p, q)| (p - q).abs()).sum::<f64>()
}

/// Largest gap between the aggregate kernel and the lumped agent generator
/// (scaled by the global rate), over every profile. Also fails if the kernel
/// has a move the agents cannot make.
pub fn lumping_error(game: &GameSpec, dynamic: Dynamic) -> f64 {
    let space = std::sync::Arc::new(semianon::game::StateSpace::enumerate(game).unwrap());
    let k = semianon::kernel::Kernel::build(game, space.clone(), dynamic).unwrap();
    let owner = owners(game);
    let mut worst: f64 = 0.0;
    for profile in profiles(game) {
        let i = space.index_of(&counts(game, &owner, &profile)).unwrap();
        let row = generator_row(game, dynamic, &profile);
        for (target, q) in &row {
            let j = space.index_of(target).unwrap();
            worst = worst.max((k.get(i, j) - q / k.global_rate()).abs());
        }
        let off = k.row(i).filter(|&(j, v)| j != i && v > 0.0).count();
        if off != row.len() {
            return f64::INFINITY;
        }
    }
    worst
}

/// Two-sample TV between aggregate and agent-level simulations from the
/// all-first-action start, `samples` paths each up to `horizon`.
pub fn simulation_tv(
    game: &GameSpec,
    dynamic: Dynamic,
    samples: u64,
    horizon: f64,
    seed: u64,
) -> f64 {
    use rand::SeedableRng;
    use semianon::simulate::{replicate_rng, simulate as aggregate, SimOptions};
    let start = vec![0usize; owners(game).len()];
    let x0 = game.concentrated_state(&vec![0; game.m()]).unwrap();
    let opts = SimOptions::new(horizon);
    let agg: Vec<Vec<u32>> = (0..samples)
        .map(|r| {
            aggregate(game, dynamic, &x0, &opts, &mut replicate_rng(seed, r))
                .unwrap()
                .final_state
        })
        .collect();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let agents: Vec<Vec<u32>> = (0..samples)
        .map(|_| simulate(game, dynamic, &start, horizon, &mut rng))
        .collect();
    two_sample_tv(&agg, &agents)
}

/// Small games (at most four agents) spanning the catalog and random tables.
pub fn lumping_games() -> Vec<GameSpec> {
    use rand::SeedableRng;
    use semianon::game::catalog;
    let mut games = vec![
        catalog::example3(1, 2, 1, 0.5, 1.7).unwrap(),
        catalog::example2(4, 0.25, 0.9).unwrap(),
        catalog::example4(4, 0.25, 2.0).unwrap(),
        catalog::example5(4, 2, 0.5, 3.0).unwrap(),
        catalog::sensor_target(
            &[1, 1, 2],
            &catalog::SENSOR_VALUES,
            &catalog::SENSOR_DETECTION,
            1.0,
            1.5,
        )
        .unwrap(),
    ];
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(55);
    while games.len() < 10 {
        let g = super::random_game(&mut rng, 80, 2.2);
        if g.n() <= 4 {
            games.push(g);
        }
    }
    games
}

/// Games for the simulation comparison: a three-population game and one with
/// overlapping action sets of different sizes.
pub fn simulation_games() -> Vec<GameSpec> {
    use semianon::game::{catalog, PopulationSpec};
    vec![
        catalog::example3(1, 2, 1, 0.5, 1.7).unwrap(),
        GameSpec::new(
            vec![
                PopulationSpec::new(2, vec![0, 1, 2]),
                PopulationSpec::new(2, vec![1, 2]),
            ],
            catalog::example2_welfare(None),
            0.5,
            0.8,
        )
        .unwrap(),
    ]
}
