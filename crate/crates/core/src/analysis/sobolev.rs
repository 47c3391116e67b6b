//! Dirichlet form and entropy functional of a reversible chain, and a
//! descent-based estimate of their smallest ratio.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::{Distribution, Kernel};

use super::evolve::check_len;

const ENTROPY_FLOOR: f64 = 1e-8;

/// Largest space the estimator accepts.
pub const SOBOLEV_MAX_STATES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SobolevValues {
    /// `1/2 sum_{x,y} (f_x - f_y)^2 M(x,y) pi_x`.
    pub dirichlet: f64,
    /// `E_pi[f^2 log(f^2 / E_pi f^2)]`.
    pub entropy: f64,
}

impl SobolevValues {
    pub fn ratio(&self) -> Result<f64> {
        if self.entropy <= 0.0 {
            return Err(Error::ZeroEntropy);
        }
        Ok(self.dirichlet / self.entropy)
    }
}

/// Directed off-diagonal flows `pi_x M(x,y)`.
struct Flows {
    edges: Vec<(usize, usize, f64)>,
    pi: Vec<f64>,
}

impl Flows {
    fn new(kernel: &Kernel, pi: &Distribution) -> Self {
        let p = pi.probs();
        let mut edges = Vec::with_capacity(kernel.nnz());
        for i in 0..kernel.len() {
            for (j, v) in kernel.row(i) {
                if j != i && v > 0.0 {
                    edges.push((i, j, p[i] * v));
                }
            }
        }
        Self {
            edges,
            pi: p.to_vec(),
        }
    }

    fn values(&self, f: &[f64]) -> SobolevValues {
        let dirichlet = 0.5
            * self
                .edges
                .iter()
                .map(|&(i, j, q)| (f[i] - f[j]).powi(2) * q)
                .sum::<f64>();
        SobolevValues {
            dirichlet,
            entropy: entropy(&self.pi, f),
        }
    }

    /// Ratio and its gradient.
    fn ratio_grad(&self, f: &[f64], grad: &mut [f64]) -> Option<f64> {
        let v = self.values(f);
        let s: f64 = self.pi.iter().zip(f).map(|(p, x)| p * x * x).sum();
        // near-constant f: the entropy is lost to cancellation
        if v.entropy <= ENTROPY_FLOOR * s {
            return None;
        }
        let mut ge = vec![0.0; f.len()];
        for &(i, j, q) in &self.edges {
            let d = (f[i] - f[j]) * q;
            ge[i] += d;
            ge[j] -= d;
        }
        let (e, l) = (v.dirichlet, v.entropy);
        for x in 0..f.len() {
            let gl = if f[x] == 0.0 {
                0.0
            } else {
                2.0 * self.pi[x] * f[x] * (f[x] * f[x] / s).ln()
            };
            grad[x] = (ge[x] * l - e * gl) / (l * l);
        }
        Some(e / l)
    }
}

fn entropy(pi: &[f64], f: &[f64]) -> f64 {
    let s: f64 = pi.iter().zip(f).map(|(p, x)| p * x * x).sum();
    if s <= 0.0 {
        return 0.0;
    }
    let l: f64 = pi
        .iter()
        .zip(f)
        .filter(|(_, x)| **x != 0.0)
        .map(|(p, x)| p * x * x * (x * x / s).ln())
        .sum();
    l.max(0.0)
}

/// Both functionals of `f` under the kernel's stationary distribution `pi`.
pub fn sobolev_functionals(kernel: &Kernel, pi: &Distribution, f: &[f64]) -> Result<SobolevValues> {
    check_len(kernel, pi)?;
    if f.len() != kernel.len() {
        return Err(Error::InvalidArgument(format!(
            "function has {} entries but the kernel has {} states",
            f.len(),
            kernel.len()
        )));
    }
    Ok(Flows::new(kernel, pi).values(f))
}

#[derive(Debug, Clone, Serialize)]
pub struct SobolevEstimate {
    /// Smallest ratio found: an upper bound on the Sobolev constant, never a
    /// certified value.
    pub upper_bound: f64,
    pub minimizer: Vec<f64>,
    pub restarts: usize,
    pub ratios_probed: usize,
}

/// Minimize `E(f,f) / L(f)` by multi-start gradient descent with
/// backtracking. Starts alternate between random functions and small
/// random perturbations of the constant function.
pub fn sobolev_estimate(
    kernel: &Kernel,
    pi: &Distribution,
    budget: usize,
    seed: u64,
) -> Result<SobolevEstimate> {
    check_len(kernel, pi)?;
    let len = kernel.len();
    if len > SOBOLEV_MAX_STATES {
        return Err(Error::CardinalityExceeded {
            count: len as u128,
            cap: SOBOLEV_MAX_STATES as u128,
        });
    }
    if len < 2 {
        return Err(Error::ZeroEntropy);
    }
    let flows = Flows::new(kernel, pi);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = (f64::INFINITY, vec![0.0; len]);
    let mut probes = 0usize;
    let mut grad = vec![0.0; len];
    let mut trial = vec![0.0; len];
    for r in 0..budget.max(1) {
        let mut f: Vec<f64> = if r % 2 == 0 {
            (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
        } else {
            let amp = 10f64.powf(rng.gen_range(-2.0..0.0));
            (0..len)
                .map(|_| 1.0 + amp * rng.gen_range(-1.0..1.0))
                .collect()
        };
        let Some(mut cur) = flows.ratio_grad(&f, &mut grad) else {
            continue;
        };
        probes += 1;
        let mut step = 0.1;
        for _ in 0..3000 {
            let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if gnorm == 0.0 {
                break;
            }
            let fnorm = f.iter().map(|x| x * x).sum::<f64>().sqrt();
            let mut improved = false;
            while step > 1e-14 {
                for ((t, x), g) in trial.iter_mut().zip(&f).zip(&grad) {
                    *t = x - step * fnorm * g / gnorm;
                }
                let mut tg = vec![0.0; len];
                probes += 1;
                match flows.ratio_grad(&trial, &mut tg) {
                    Some(v) if v < cur => {
                        let scale = trial.iter().map(|x| x * x).sum::<f64>().sqrt();
                        f.iter_mut().zip(&trial).for_each(|(a, b)| *a = b / scale);
                        grad = tg.iter().map(|g| g * scale).collect();
                        let rel = (cur - v) / cur.max(1e-300);
                        cur = v;
                        step *= 1.5;
                        improved = rel > 1e-12;
                        break;
                    }
                    _ => step *= 0.5,
                }
            }
            if !improved {
                break;
            }
        }
        if cur < best.0 {
            best = (cur, f);
        }
    }
    if !best.0.is_finite() {
        return Err(Error::ZeroEntropy);
    }
    Ok(SobolevEstimate {
        upper_bound: best.0,
        minimizer: best.1,
        restarts: budget.max(1),
        ratios_probed: probes,
    })
}

/// Right-hand side of the entropy mixing bound
/// `T(eps) <= (log log(1/pi_min) + 2 log(1/eps)) / (4 rho)` in uniformized
/// time. Only meaningful with a certified lower bound on `rho`.
pub fn mixing_time_bound(rho: f64, pi_min: f64, eps: f64) -> f64 {
    ((1.0 / pi_min).ln().ln() + 2.0 * (1.0 / eps).ln()) / (4.0 * rho)
}
