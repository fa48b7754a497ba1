//! Seedable CMA-ES with an ask/tell interface.
//!
//! Candidates are drawn as `x = m + sigma * B * D * z` with `z ~ N(0, I)`.
//! `tell` ranks them (minimization, ties by index), recombines the best
//! `mu` with positive weights, then applies cumulative step-size adaptation
//! and the rank-one plus rank-mu covariance update. Strategy constants
//! default to the usual tutorial settings and can be overridden.

mod eigen;
mod snapshot;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use eigen::{eigendecompose, max_abs_diff, reconstruct, symmetric_eigen, Eigen};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CmaError {
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("initial mean has {got} components, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("initial step size must be positive and finite, got {0}")]
    InvalidSigma(f64),
    #[error("invalid strategy parameter: {0}")]
    InvalidParams(String),
    #[error("eigendecomposition did not converge within {sweeps} sweeps")]
    EigenNonConvergence { sweeps: usize },
    #[error("covariance lost positive definiteness (eigenvalue {eigenvalue})")]
    NotPositiveDefinite { eigenvalue: f64 },
    #[error("told {got} candidates, population size is {expected}")]
    CountMismatch { expected: usize, got: usize },
    #[error("candidate {index} has no finite fitness")]
    BadFitness { index: usize },
    #[error("candidate {index} was sampled in generation {got}, state is at {expected}")]
    StaleCandidate {
        index: usize,
        expected: u64,
        got: u64,
    },
    #[error("candidate indices do not cover the population exactly once")]
    DuplicateIndex,
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("malformed state snapshot: {0}")]
    Snapshot(String),
}

/// Optional replacements for the default strategy constants.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CmaOverrides {
    pub pop_size: Option<usize>,
    pub parent_count: Option<usize>,
    pub weights: Option<Vec<f64>>,
    pub c_sigma: Option<f64>,
    pub d_sigma: Option<f64>,
    pub c_c: Option<f64>,
    pub c_1: Option<f64>,
    pub c_mu: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CmaParams {
    pub dim: usize,
    pub pop_size: usize,
    pub parent_count: usize,
    pub weights: Vec<f64>,
    pub mu_eff: f64,
    pub c_sigma: f64,
    pub d_sigma: f64,
    pub c_c: f64,
    pub c_1: f64,
    pub c_mu: f64,
}

impl CmaParams {
    pub fn new(dim: usize) -> Result<Self, CmaError> {
        Self::with_overrides(dim, &CmaOverrides::default())
    }

    pub fn default_pop_size(dim: usize) -> usize {
        4 + (3.0 * (dim as f64).ln()).floor() as usize
    }

    pub fn with_overrides(dim: usize, o: &CmaOverrides) -> Result<Self, CmaError> {
        if dim == 0 {
            return Err(CmaError::ZeroDimension);
        }
        let n = dim as f64;
        let pop_size = o.pop_size.unwrap_or_else(|| Self::default_pop_size(dim));
        let parent_count = o
            .parent_count
            .or(o.weights.as_ref().map(Vec::len))
            .unwrap_or(pop_size / 2);
        let weights = match &o.weights {
            Some(w) => w.clone(),
            None => {
                let raw: Vec<f64> = (1..=parent_count)
                    .map(|i| (parent_count as f64 + 0.5).ln() - (i as f64).ln())
                    .collect();
                let sum: f64 = raw.iter().sum();
                raw.into_iter().map(|w| w / sum).collect()
            }
        };
        let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();

        let c_sigma = o.c_sigma.unwrap_or((mu_eff + 2.0) / (n + mu_eff + 5.0));
        let d_sigma = o.d_sigma.unwrap_or(
            1.0 + 2.0 * f64::max(0.0, ((mu_eff - 1.0) / (n + 1.0)).sqrt() - 1.0) + c_sigma,
        );
        let c_c = o
            .c_c
            .unwrap_or((4.0 + mu_eff / n) / (n + 4.0 + 2.0 * mu_eff / n));
        let c_1 = o.c_1.unwrap_or(2.0 / ((n + 1.3).powi(2) + mu_eff));
        let c_mu = o.c_mu.unwrap_or(f64::min(
            1.0 - c_1,
            2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((n + 2.0).powi(2) + mu_eff),
        ));

        let params = CmaParams {
            dim,
            pop_size,
            parent_count,
            weights,
            mu_eff,
            c_sigma,
            d_sigma,
            c_c,
            c_1,
            c_mu,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), CmaError> {
        let bad = |m: String| Err(CmaError::InvalidParams(m));
        if self.dim == 0 {
            return Err(CmaError::ZeroDimension);
        }
        if self.pop_size < 2 {
            return bad(format!("pop_size {} < 2", self.pop_size));
        }
        if self.parent_count < 1 || self.parent_count > self.pop_size {
            return bad(format!(
                "parent_count {} outside 1..={}",
                self.parent_count, self.pop_size
            ));
        }
        if self.weights.len() != self.parent_count {
            return bad("weights length must equal parent_count".into());
        }
        if self.weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return bad("weights must be strictly positive".into());
        }
        if self.weights.windows(2).any(|w| w[1] > w[0]) {
            return bad("weights must be nonincreasing".into());
        }
        let sum: f64 = self.weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return bad(format!("weights sum to {sum}, expected 1"));
        }
        if !(self.mu_eff >= 1.0 - 1e-12 && self.mu_eff <= self.parent_count as f64 + 1e-9) {
            return bad(format!("mu_eff {} outside [1, mu]", self.mu_eff));
        }
        for (name, v) in [
            ("c_sigma", self.c_sigma),
            ("c_c", self.c_c),
            ("c_1", self.c_1),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return bad(format!("{name} = {v} must lie in (0, 1)"));
            }
        }
        // a single parent gives c_mu = 0 (no rank-mu information)
        if !(self.c_mu >= 0.0 && self.c_mu < 1.0) {
            return bad(format!("c_mu = {} must lie in [0, 1)", self.c_mu));
        }
        if self.c_1 + self.c_mu > 1.0 + 1e-12 {
            return bad("c_1 + c_mu must not exceed 1".into());
        }
        if !(self.d_sigma >= 1.0) {
            return bad(format!("d_sigma = {} must be >= 1", self.d_sigma));
        }
        Ok(())
    }

    /// Generations between eigendecomposition refreshes.
    pub fn eigen_refresh_gap(&self) -> u64 {
        let gap = 1.0 / (10.0 * self.dim as f64 * (self.c_1 + self.c_mu));
        (gap.floor() as u64).max(1)
    }

    /// `E||N(0, I)||` approximation.
    pub fn expected_norm(&self) -> f64 {
        let n = self.dim as f64;
        n.sqrt() * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n))
    }
}

/// One sampled point of a generation.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    /// Position within the population, `0..pop_size`.
    pub index: usize,
    pub generation: u64,
    pub vector: Vec<f64>,
    pub z: Vec<f64>,
    pub fitness: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct CmaState {
    params: CmaParams,
    mean: Vec<f64>,
    sigma: f64,
    cov: Vec<f64>,
    path_sigma: Vec<f64>,
    path_c: Vec<f64>,
    generation: u64,
    basis: Vec<f64>,
    scale: Vec<f64>,
    /// Generations since the last refresh of `basis`/`scale`.
    eig_age: u64,
    rng: ChaCha8Rng,
}

impl CmaState {
    pub fn new(mean0: Vec<f64>, sigma0: f64, seed: u64) -> Result<Self, CmaError> {
        Self::with_overrides(mean0, sigma0, seed, &CmaOverrides::default())
    }

    pub fn with_overrides(
        mean0: Vec<f64>,
        sigma0: f64,
        seed: u64,
        overrides: &CmaOverrides,
    ) -> Result<Self, CmaError> {
        let dim = mean0.len();
        if dim == 0 {
            return Err(CmaError::ZeroDimension);
        }
        if !(sigma0 > 0.0 && sigma0.is_finite()) {
            return Err(CmaError::InvalidSigma(sigma0));
        }
        if mean0.iter().any(|x| !x.is_finite()) {
            return Err(CmaError::Numerical("initial mean is not finite".into()));
        }
        let params = CmaParams::with_overrides(dim, overrides)?;
        Ok(CmaState {
            params,
            mean: mean0,
            sigma: sigma0,
            cov: eigen::identity(dim),
            path_sigma: vec![0.0; dim],
            path_c: vec![0.0; dim],
            generation: 0,
            basis: eigen::identity(dim),
            scale: vec![1.0; dim],
            eig_age: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    /// Like [`CmaState::new`] but checks `mean0` against `dim`.
    pub fn init(dim: usize, mean0: Vec<f64>, sigma0: f64, seed: u64) -> Result<Self, CmaError> {
        if dim == 0 {
            return Err(CmaError::ZeroDimension);
        }
        if mean0.len() != dim {
            return Err(CmaError::DimensionMismatch {
                expected: dim,
                got: mean0.len(),
            });
        }
        Self::new(mean0, sigma0, seed)
    }

    pub fn params(&self) -> &CmaParams {
        &self.params
    }
    pub fn dim(&self) -> usize {
        self.params.dim
    }
    pub fn pop_size(&self) -> usize {
        self.params.pop_size
    }
    pub fn mean(&self) -> &[f64] {
        &self.mean
    }
    pub fn sigma(&self) -> f64 {
        self.sigma
    }
    /// Row-major covariance matrix.
    pub fn cov(&self) -> &[f64] {
        &self.cov
    }
    pub fn path_sigma(&self) -> &[f64] {
        &self.path_sigma
    }
    pub fn path_c(&self) -> &[f64] {
        &self.path_c
    }
    pub fn generation(&self) -> u64 {
        self.generation
    }
    pub fn eig_basis(&self) -> &[f64] {
        &self.basis
    }
    pub fn eig_scale(&self) -> &[f64] {
        &self.scale
    }

    /// Replaces the covariance (e.g. to start from a non-isotropic shape).
    pub fn set_cov(&mut self, cov: Vec<f64>) -> Result<(), CmaError> {
        let n = self.dim();
        if cov.len() != n * n {
            return Err(CmaError::DimensionMismatch {
                expected: n * n,
                got: cov.len(),
            });
        }
        self.cov = cov;
        self.refresh_eigen()
    }

    fn refresh_eigen(&mut self) -> Result<(), CmaError> {
        let n = self.dim();
        let e = eigendecompose(&self.cov, n)?;
        if e.floored {
            self.cov = reconstruct(&e.basis, &e.scale);
        }
        self.basis = e.basis;
        self.scale = e.scale;
        self.eig_age = 0;
        Ok(())
    }

    /// `B * diag(D) * z`
    fn transform(&self, z: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|i| (0..n).map(|k| self.basis[i * n + k] * self.scale[k] * z[k]).sum())
            .collect()
    }

    /// `C^{-1/2} * y` via the cached eigenbasis.
    fn inv_sqrt_times(&self, y: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let bt_y: Vec<f64> = (0..n)
            .map(|k| (0..n).map(|i| self.basis[i * n + k] * y[i]).sum::<f64>() / self.scale[k])
            .collect();
        (0..n)
            .map(|i| (0..n).map(|k| self.basis[i * n + k] * bt_y[k]).sum())
            .collect()
    }

    /// Samples a full population from `N(m, sigma^2 C)`.
    pub fn ask(&mut self) -> Result<Vec<Candidate>, CmaError> {
        if self.eig_age >= self.params.eigen_refresh_gap() {
            self.refresh_eigen()?;
        }
        let n = self.dim();
        let mut out = Vec::with_capacity(self.pop_size());
        for index in 0..self.pop_size() {
            let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut self.rng)).collect();
            let y = self.transform(&z);
            let vector = self
                .mean
                .iter()
                .zip(&y)
                .map(|(m, y)| m + self.sigma * y)
                .collect();
            out.push(Candidate {
                index,
                generation: self.generation,
                vector,
                z,
                fitness: None,
            });
        }
        Ok(out)
    }

    /// Updates the distribution from an evaluated population, in any order.
    pub fn tell(&mut self, mut candidates: Vec<Candidate>) -> Result<(), CmaError> {
        let lambda = self.pop_size();
        if candidates.len() != lambda {
            return Err(CmaError::CountMismatch {
                expected: lambda,
                got: candidates.len(),
            });
        }
        let mut seen = vec![false; lambda];
        for c in &candidates {
            if c.generation != self.generation {
                return Err(CmaError::StaleCandidate {
                    index: c.index,
                    expected: self.generation,
                    got: c.generation,
                });
            }
            match c.fitness {
                Some(f) if f.is_finite() => {}
                _ => return Err(CmaError::BadFitness { index: c.index }),
            }
            if c.index >= lambda || seen[c.index] || c.z.len() != self.dim() {
                return Err(CmaError::DuplicateIndex);
            }
            seen[c.index] = true;
        }
        candidates.sort_by(|a, b| {
            a.fitness
                .unwrap()
                .total_cmp(&b.fitness.unwrap())
                .then(a.index.cmp(&b.index))
        });

        let n = self.dim();
        let p = &self.params;
        let steps: Vec<Vec<f64>> = candidates[..p.parent_count]
            .iter()
            .map(|c| self.transform(&c.z))
            .collect();

        let mut y_w = steps[0].iter().map(|y| p.weights[0] * y).collect::<Vec<_>>();
        for (w, y) in p.weights.iter().zip(&steps).skip(1) {
            for (acc, yi) in y_w.iter_mut().zip(y) {
                *acc += w * yi;
            }
        }
        let new_mean: Vec<f64> = self
            .mean
            .iter()
            .zip(&y_w)
            .map(|(m, y)| m + self.sigma * y)
            .collect();

        let cs = p.c_sigma;
        let ps_coeff = (cs * (2.0 - cs) * p.mu_eff).sqrt();
        let whitened = self.inv_sqrt_times(&y_w);
        let path_sigma: Vec<f64> = self
            .path_sigma
            .iter()
            .zip(&whitened)
            .map(|(ps, w)| (1.0 - cs) * ps + ps_coeff * w)
            .collect();
        let ps_norm = path_sigma.iter().map(|x| x * x).sum::<f64>().sqrt();
        let chi_n = p.expected_norm();

        let decay = 1.0 - (1.0 - cs).powf(2.0 * (self.generation + 1) as f64);
        let h_sigma = ps_norm / decay.sqrt() / chi_n < 1.4 + 2.0 / (n as f64 + 1.0);
        let h = if h_sigma { 1.0 } else { 0.0 };

        let cc = p.c_c;
        let pc_coeff = h * (cc * (2.0 - cc) * p.mu_eff).sqrt();
        let path_c: Vec<f64> = self
            .path_c
            .iter()
            .zip(&y_w)
            .map(|(pc, y)| (1.0 - cc) * pc + pc_coeff * y)
            .collect();

        let old_weight = 1.0 - p.c_1 - p.c_mu + (1.0 - h) * p.c_1 * cc * (2.0 - cc);
        let mut cov = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let rank_mu: f64 = p
                    .weights
                    .iter()
                    .zip(&steps)
                    .map(|(w, y)| w * y[i] * y[j])
                    .sum();
                let v = old_weight * self.cov[i * n + j]
                    + p.c_1 * path_c[i] * path_c[j]
                    + p.c_mu * rank_mu;
                cov[i * n + j] = v;
                cov[j * n + i] = v;
            }
        }

        let sigma = self.sigma * ((cs / p.d_sigma) * (ps_norm / chi_n - 1.0)).exp();
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(CmaError::Numerical(format!("step size became {sigma}")));
        }
        if cov.iter().any(|x| !x.is_finite()) || new_mean.iter().any(|x| !x.is_finite()) {
            return Err(CmaError::Numerical("non-finite mean or covariance".into()));
        }

        self.mean = new_mean;
        self.path_sigma = path_sigma;
        self.path_c = path_c;
        self.cov = cov;
        self.sigma = sigma;
        self.generation += 1;
        self.eig_age += 1;
        Ok(())
    }
}
