//! Closed-form stationary expectations for separable welfares without
//! enumerating the state space.
//!
//! The Gibbs weight `exp(beta phi(x))` (times the profile multiplicity for
//! standard log-linear learning) factorizes over resources once the
//! per-population counts at each resource are fixed, so the partition
//! function is a sum over allocations that can be accumulated resource by
//! resource. The dynamic program's state is the vector of agents per
//! population not yet placed.

use crate::error::{Error, Result};
use crate::game::{term_at, GameSpec, ResourceTerm, Welfare};
use crate::kernel::{ln_factorial, Dynamic};

#[derive(Debug, Clone)]
pub struct SeparableGibbs {
    game: GameSpec,
    terms: Vec<ResourceTerm>,
    /// `phi = (W - shift) / scale`
    shift: f64,
    scale: f64,
    /// Union resources with the populations holding each.
    resources: Vec<(usize, Vec<usize>)>,
    /// Welfare of terms on resources no population can use.
    constant: f64,
    radix: Vec<usize>,
    last_resource: Vec<usize>,
}

#[derive(Clone, Copy)]
enum Mode {
    Gibbs { beta: f64, multiplicity: bool },
    Max,
    Min,
}

/// Log-weight and weighted mean of the welfare collected so far.
#[derive(Clone, Copy)]
struct Cell {
    lz: f64,
    mean: f64,
}

const EMPTY: Cell = Cell {
    lz: f64::NEG_INFINITY,
    mean: 0.0,
};

impl Cell {
    fn add(&mut self, mode: Mode, lz: f64, value: f64) {
        match mode {
            Mode::Gibbs { .. } => {
                if self.lz == f64::NEG_INFINITY {
                    *self = Cell { lz, mean: value };
                    return;
                }
                let hi = self.lz.max(lz);
                let (a, b) = ((self.lz - hi).exp(), (lz - hi).exp());
                self.mean = (self.mean * a + value * b) / (a + b);
                self.lz = hi + (a + b).ln();
            }
            Mode::Max => {
                if self.lz == f64::NEG_INFINITY || value > self.mean {
                    *self = Cell {
                        lz: 0.0,
                        mean: value,
                    };
                }
            }
            Mode::Min => {
                if self.lz == f64::NEG_INFINITY || value < self.mean {
                    *self = Cell {
                        lz: 0.0,
                        mean: value,
                    };
                }
            }
        }
    }
}

impl SeparableGibbs {
    /// `None` when the welfare is not separable.
    pub fn new(game: &GameSpec) -> Option<Self> {
        let (mut shift, mut scale) = (0.0, 1.0);
        let mut layers = Vec::new();
        let mut w = game.welfare();
        let terms = loop {
            match w {
                Welfare::Separable(t) => break t.clone(),
                Welfare::Direct(_) => return None,
                Welfare::Affine {
                    inner,
                    shift: s,
                    scale: c,
                } => {
                    layers.push((*s, *c));
                    w = inner;
                }
            }
        };
        // innermost layer first
        for (s, c) in layers.into_iter().rev() {
            shift += s * scale;
            scale *= c;
        }
        let m = game.m();
        let resources: Vec<(usize, Vec<usize>)> = game
            .union_actions()
            .iter()
            .map(|&r| {
                let mut holders: Vec<usize> =
                    game.resource_slots(r).iter().map(|&(p, _)| p).collect();
                holders.dedup();
                (r, holders)
            })
            .collect();
        let zeros = vec![0u32; m];
        let constant = terms
            .iter()
            .filter(|t| !game.union_actions().contains(&t.resource))
            .map(|t| term_at(game, t, &zeros))
            .sum();
        let radix = game
            .populations()
            .iter()
            .map(|p| p.size as usize + 1)
            .collect();
        let mut last_resource = vec![0; m];
        for (i, (_, holders)) in resources.iter().enumerate() {
            for &p in holders {
                last_resource[p] = i;
            }
        }
        Some(Self {
            game: game.clone(),
            terms,
            shift,
            scale,
            resources,
            constant,
            radix,
            last_resource,
        })
    }

    fn table_len(&self) -> usize {
        self.radix.iter().product()
    }

    fn decode(&self, mut idx: usize, out: &mut [u32]) {
        for (o, &r) in out.iter_mut().zip(&self.radix).rev() {
            *o = (idx % r) as u32;
            idx /= r;
        }
    }

    fn encode(&self, v: &[u32]) -> usize {
        v.iter()
            .zip(&self.radix)
            .fold(0, |acc, (&x, &r)| acc * r + x as usize)
    }

    fn resource_value(&self, r: usize, per_pop: &[u32]) -> f64 {
        self.terms
            .iter()
            .filter(|t| t.resource == r)
            .map(|t| term_at(&self.game, t, per_pop))
            .sum()
    }

    /// Run the allocation dynamic program; returns the raw-welfare mean (or
    /// extreme) over all states.
    fn run(&self, mode: Mode) -> f64 {
        let m = self.game.m();
        let len = self.table_len();
        let mut table = vec![EMPTY; len];
        let sizes: Vec<u32> = self.game.populations().iter().map(|p| p.size).collect();
        table[self.encode(&sizes)] = Cell { lz: 0.0, mean: 0.0 };
        let (w_scale, multiplicity) = match mode {
            Mode::Gibbs { beta, multiplicity } => (beta / self.scale, multiplicity),
            _ => (0.0, false),
        };
        let mut rem = vec![0u32; m];
        let mut per_pop = vec![0u32; m];
        let mut after = vec![0u32; m];
        for (ri, (r, holders)) in self.resources.iter().enumerate() {
            let mut next = vec![EMPTY; len];
            for (idx, cell) in table.iter().enumerate() {
                if cell.lz == f64::NEG_INFINITY {
                    continue;
                }
                self.decode(idx, &mut rem);
                // odometer over allocations of the holders
                let lo: Vec<u32> = holders
                    .iter()
                    .map(|&p| {
                        if self.last_resource[p] == ri {
                            rem[p]
                        } else {
                            0
                        }
                    })
                    .collect();
                let mut alloc = lo.clone();
                'alloc: loop {
                    per_pop.iter_mut().for_each(|x| *x = 0);
                    after.copy_from_slice(&rem);
                    let mut ln_mult = 0.0;
                    for (&p, &a) in holders.iter().zip(&alloc) {
                        per_pop[p] = a;
                        after[p] -= a;
                        if multiplicity {
                            ln_mult -= ln_factorial(a);
                        }
                    }
                    let v = self.resource_value(*r, &per_pop);
                    next[self.encode(&after)].add(
                        mode,
                        cell.lz + w_scale * v + ln_mult,
                        cell.mean + v,
                    );
                    let mut j = holders.len();
                    loop {
                        if j == 0 {
                            break 'alloc;
                        }
                        j -= 1;
                        if alloc[j] < rem[holders[j]] {
                            alloc[j] += 1;
                            break;
                        }
                        alloc[j] = lo[j];
                    }
                }
            }
            table = next;
        }
        table[0].mean + self.constant
    }

    fn to_phi(&self, w: f64) -> f64 {
        (w - self.shift) / self.scale
    }

    pub fn max_potential(&self) -> f64 {
        self.to_phi(self.run(Mode::Max))
    }

    pub fn min_potential(&self) -> f64 {
        self.to_phi(self.run(Mode::Min))
    }

    pub fn expected_potential(&self, beta: f64, dynamic: Dynamic) -> Result<f64> {
        let multiplicity = match dynamic {
            Dynamic::Mlll => false,
            Dynamic::Lll => true,
            Dynamic::Prior => {
                return Err(Error::UnsupportedDynamic(
                    "the prior variant has no closed-form stationary distribution",
                ))
            }
        };
        Ok(self.to_phi(self.run(Mode::Gibbs { beta, multiplicity })))
    }
}
