#![allow(dead_code)]

use cmahpo::cmaes::{max_abs_diff, reconstruct, symmetric_eigen, eigendecompose};
use cmahpo::CmaState;

pub fn sphere(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

pub fn rosenbrock(x: &[f64]) -> f64 {
    x.windows(2)
        .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
        .sum()
}

pub fn rastrigin(x: &[f64]) -> f64 {
    10.0 * x.len() as f64
        + x.iter()
            .map(|v| v * v - 10.0 * (2.0 * std::f64::consts::PI * v).cos())
            .sum::<f64>()
}

/// Evaluations until `best < target`, or `None` within `max_evals`.
pub fn evals_to_target(
    f: impl Fn(&[f64]) -> f64,
    m0: Vec<f64>,
    sigma0: f64,
    seed: u64,
    max_evals: usize,
    target: f64,
) -> (Option<usize>, f64) {
    let mut state = CmaState::new(m0, sigma0, seed).unwrap();
    let mut evals = 0;
    let mut best = f64::INFINITY;
    while evals < max_evals {
        let mut pop = state.ask().unwrap();
        for c in &mut pop {
            let v = f(&c.vector);
            c.fitness = Some(v);
            evals += 1;
            best = best.min(v);
            if best < target && evals <= max_evals {
                return (Some(evals), best);
            }
        }
        if state.tell(pop).is_err() {
            break;
        }
    }
    (None, best)
}

/// Every candidate vector of `gens` generations plus the final state.
pub fn trajectory(
    f: impl Fn(&[f64]) -> f64,
    m0: Vec<f64>,
    sigma0: f64,
    seed: u64,
    gens: usize,
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, CmaState) {
    let mut state = CmaState::new(m0, sigma0, seed).unwrap();
    let mut vectors = Vec::new();
    let mut means = Vec::new();
    for _ in 0..gens {
        let mut pop = state.ask().unwrap();
        for c in &mut pop {
            c.fitness = Some(f(&c.vector));
            vectors.push(c.vector.clone());
        }
        state.tell(pop).unwrap();
        means.push(state.mean().to_vec());
    }
    (vectors, means, state)
}

/// Small deterministic generator for test inputs (not the library's RNG).
pub struct Lcg(pub u64);

impl Lcg {
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.0 = self
            .0
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        lo + (hi - lo) * ((self.0 >> 11) as f64 / (1u64 << 53) as f64)
    }

    pub fn vec(&mut self, n: usize, lo: f64, hi: f64) -> Vec<f64> {
        (0..n).map(|_| self.uniform(lo, hi)).collect()
    }
}

/// Same candidates (bitwise) for `f` and `exp(f)` over several seeds/dims.
pub fn check_monotone_invariance(seeds: &[u64], dims: &[usize], gens: usize) -> Result<(), String> {
    for &seed in seeds {
        for &n in dims {
            let m0 = Lcg(seed ^ n as u64).vec(n, -2.0, 2.0);
            // stays well below exp's overflow and far above its ties near 0
            let f = |x: &[f64]| x.iter().enumerate().map(|(i, v)| (v - 1.0).powi(2) * (1.0 + i as f64 / n as f64)).sum::<f64>();
            let (a, _, sa) = trajectory(f, m0.clone(), 0.5, seed, gens);
            let (b, _, sb) = trajectory(|x| f(x).exp(), m0, 0.5, seed, gens);
            let same = a.len() == b.len()
                && a.iter()
                    .flatten()
                    .zip(b.iter().flatten())
                    .all(|(x, y)| x.to_bits() == y.to_bits());
            if !same || sa.sigma().to_bits() != sb.sigma().to_bits() {
                return Err(format!("exp(f) diverged: seed {seed}, dim {n}"));
            }
        }
    }
    Ok(())
}

/// `f(x - t)` from `m0 + t` mirrors `f(x)` from `m0`, shifted by `t`.
pub fn check_translation(seeds: &[u64], dims: &[usize], gens: usize) -> Result<(), String> {
    for &seed in seeds {
        for &n in dims {
            let mut lcg = Lcg(seed.wrapping_mul(31) + n as u64);
            let m0 = lcg.vec(n, -2.0, 2.0);
            let t = lcg.vec(n, -10.0, 10.0);
            let shifted_m0: Vec<f64> = m0.iter().zip(&t).map(|(m, t)| m + t).collect();
            let (a, ma, sa) = trajectory(rosenbrock, m0, 0.5, seed, gens);
            let (b, mb, sb) = trajectory(
                |x| {
                    let y: Vec<f64> = x.iter().zip(&t).map(|(x, t)| x - t).collect();
                    rosenbrock(&y)
                },
                shifted_m0,
                0.5,
                seed,
                gens,
            );
            let close = |u: &[Vec<f64>], v: &[Vec<f64>]| {
                u.iter().zip(v).all(|(u, v)| {
                    u.iter()
                        .zip(v)
                        .zip(&t)
                        .all(|((u, v), t)| (u + t - v).abs() <= 1e-9 * (1.0 + t.abs()))
                })
            };
            if !close(&a, &b) || !close(&ma, &mb) {
                return Err(format!("translated run diverged: seed {seed}, dim {n}"));
            }
            // step size and shape never see the offset
            if sa.sigma().to_bits() != sb.sigma().to_bits()
                || sa.cov().iter().zip(sb.cov()).any(|(x, y)| x.to_bits() != y.to_bits())
            {
                return Err(format!("sigma/C differ under translation: seed {seed}, dim {n}"));
            }
        }
    }
    Ok(())
}

/// Minimum eigenvalue and worst reconstruction residual over a long run.
pub struct SpdReport {
    pub min_eigenvalue: f64,
    pub max_residual: f64,
    pub generations: usize,
}

pub fn spd_run(f: impl Fn(&[f64]) -> f64, n: usize, gens: usize, seed: u64) -> Result<SpdReport, String> {
    let m0 = Lcg(seed).vec(n, -5.0, 5.0);
    let mut state = CmaState::new(m0, 2.0, seed).unwrap();
    let mut min_eig = f64::INFINITY;
    let mut max_res: f64 = 0.0;
    for g in 0..gens {
        let mut pop = state.ask().map_err(|e| format!("ask at {g}: {e}"))?;
        for c in &mut pop {
            c.fitness = Some(f(&c.vector));
        }
        state.tell(pop).map_err(|e| format!("tell at {g}: {e}"))?;
        let cov = state.cov();
        let (values, _) = symmetric_eigen(cov, n).map_err(|e| e.to_string())?;
        min_eig = min_eig.min(*values.last().unwrap());
        let eig = eigendecompose(cov, n).map_err(|e| format!("generation {g}: {e}"))?;
        max_res = max_res.max(max_abs_diff(&reconstruct(&eig.basis, &eig.scale), cov));
    }
    Ok(SpdReport {
        min_eigenvalue: min_eig,
        max_residual: max_res,
        generations: gens,
    })
}
