#![allow(dead_code)]

use std::sync::Arc;

pub mod agent;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use semianon::game::{GameSpec, PopulationSpec, ResourceFn, ResourceTerm, StateSpace, Welfare};
use semianon::kernel::{Distribution, Kernel};

/// Random separable game with table welfares, at most `max_states` states.
pub fn random_game<R: Rng>(rng: &mut R, max_states: u128, beta: f64) -> GameSpec {
    loop {
        let resources = rng.gen_range(2..=4usize);
        let m = rng.gen_range(1..=3usize);
        let pops: Vec<PopulationSpec> = (0..m)
            .map(|_| {
                let mut acts: Vec<usize> = (0..resources).filter(|_| rng.gen_bool(0.6)).collect();
                if acts.is_empty() {
                    acts.push(rng.gen_range(0..resources));
                }
                PopulationSpec::new(rng.gen_range(1..=5), acts)
            })
            .collect();
        let n: u32 = pops.iter().map(|p| p.size).sum();
        let terms = (0..resources)
            .map(|r| ResourceTerm {
                resource: r,
                counted: None,
                func: ResourceFn::Table {
                    values: (0..=n).map(|_| rng.gen_range(0.0..1.0)).collect(),
                },
            })
            .collect();
        let game = GameSpec::new(
            pops,
            Welfare::Separable(terms),
            rng.gen_range(0.2..2.0),
            beta,
        )
        .expect("valid random game");
        let card = StateSpace::cardinality(&game);
        if card >= 2 && card <= max_states {
            return game;
        }
    }
}

/// Game with an arbitrary potential over flat counts.
pub fn direct_game(
    pops: Vec<PopulationSpec>,
    f: impl Fn(&[u32]) -> f64 + Send + Sync + 'static,
) -> GameSpec {
    GameSpec::new(pops, Welfare::Direct(Arc::new(f)), 1.0, 1.0).unwrap()
}

pub fn dense(kernel: &Kernel) -> DMatrix<f64> {
    let n = kernel.len();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for (j, v) in kernel.row(i) {
            m[(i, j)] = v;
        }
    }
    m
}

/// `mu0 exp(tau (M - I))` through the symmetrization of a reversible kernel.
pub fn evolve_by_eigen(
    kernel: &Kernel,
    pi: &Distribution,
    mu0: &Distribution,
    tau: f64,
) -> Vec<f64> {
    let m = dense(kernel);
    let n = m.nrows();
    let sq: Vec<f64> = pi.probs().iter().map(|p| p.sqrt()).collect();
    let mut s = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            s[(i, j)] = sq[i] * m[(i, j)] / sq[j];
        }
    }
    let s = (&s + s.transpose()) * 0.5;
    let eig = s.symmetric_eigen();
    let d = DVector::from_iterator(n, eig.eigenvalues.iter().map(|l| (tau * (l - 1.0)).exp()));
    let u = &eig.eigenvectors;
    let expo = u * DMatrix::from_diagonal(&d) * u.transpose();
    // exp(tau(M-I)) = D^{-1/2} expo D^{1/2}
    (0..n)
        .map(|j| {
            (0..n)
                .map(|i| mu0.probs()[i] / sq[i] * expo[(i, j)] * sq[j])
                .sum()
        })
        .collect()
}
