//! Versioned plain-text record of a [`CmaState`], one `key values...` line
//! per field. Reals use 17 significant digits so a restored state
//! continues bit-for-bit.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{CmaError, CmaParams, CmaState};
use crate::fmt_f64;

const HEADER: &str = "cmaes-state";
const VERSION: u32 = 1;

fn join(values: &[f64]) -> String {
    values.iter().map(|&v| fmt_f64(v)).collect::<Vec<_>>().join(" ")
}

impl CmaState {
    pub fn to_snapshot(&self) -> String {
        let p = &self.params;
        let mut out = String::new();
        let _ = writeln!(out, "{HEADER} {VERSION}");
        let _ = writeln!(out, "dim {}", p.dim);
        let _ = writeln!(out, "pop_size {}", p.pop_size);
        let _ = writeln!(out, "parent_count {}", p.parent_count);
        let _ = writeln!(out, "weights {}", join(&p.weights));
        let _ = writeln!(out, "mu_eff {}", fmt_f64(p.mu_eff));
        let _ = writeln!(out, "c_sigma {}", fmt_f64(p.c_sigma));
        let _ = writeln!(out, "d_sigma {}", fmt_f64(p.d_sigma));
        let _ = writeln!(out, "c_c {}", fmt_f64(p.c_c));
        let _ = writeln!(out, "c_1 {}", fmt_f64(p.c_1));
        let _ = writeln!(out, "c_mu {}", fmt_f64(p.c_mu));
        let _ = writeln!(out, "generation {}", self.generation);
        let _ = writeln!(out, "sigma {}", fmt_f64(self.sigma));
        let _ = writeln!(out, "mean {}", join(&self.mean));
        let _ = writeln!(out, "cov {}", join(&self.cov));
        let _ = writeln!(out, "path_sigma {}", join(&self.path_sigma));
        let _ = writeln!(out, "path_c {}", join(&self.path_c));
        let _ = writeln!(out, "eig_basis {}", join(&self.basis));
        let _ = writeln!(out, "eig_scale {}", join(&self.scale));
        let _ = writeln!(out, "eig_age {}", self.eig_age);
        let seed: String = self.rng.get_seed().iter().map(|b| format!("{b:02x}")).collect();
        let _ = writeln!(out, "rng_seed {seed}");
        let _ = writeln!(out, "rng_stream {}", self.rng.get_stream());
        let _ = writeln!(out, "rng_word_pos {}", self.rng.get_word_pos());
        out
    }

    pub fn from_snapshot(text: &str) -> Result<Self, CmaError> {
        let err = |m: String| CmaError::Snapshot(m);
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| err("empty snapshot".into()))?;
        match header.split_whitespace().collect::<Vec<_>>().as_slice() {
            [HEADER, v] if v.parse::<u32>() == Ok(VERSION) => {}
            _ => return Err(err(format!("unsupported header `{header}`"))),
        }
        let fields: HashMap<&str, &str> = lines
            .map(|l| l.split_once(' ').unwrap_or((l, "")))
            .collect();
        let get = |k: &str| fields.get(k).copied().ok_or_else(|| err(format!("missing `{k}`")));
        let int = |k: &str| -> Result<u64, CmaError> {
            get(k)?.trim().parse().map_err(|e| err(format!("`{k}`: {e}")))
        };
        let reals = |k: &str, len: usize| -> Result<Vec<f64>, CmaError> {
            let v = get(k)?
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|e| err(format!("`{k}`: {e}"))))
                .collect::<Result<Vec<_>, _>>()?;
            if v.len() != len {
                return Err(err(format!("`{k}` has {} values, expected {len}", v.len())));
            }
            Ok(v)
        };
        let real = |k: &str| reals(k, 1).map(|v| v[0]);

        let dim = int("dim")? as usize;
        let parent_count = int("parent_count")? as usize;
        let params = CmaParams {
            dim,
            pop_size: int("pop_size")? as usize,
            parent_count,
            weights: reals("weights", parent_count)?,
            mu_eff: real("mu_eff")?,
            c_sigma: real("c_sigma")?,
            d_sigma: real("d_sigma")?,
            c_c: real("c_c")?,
            c_1: real("c_1")?,
            c_mu: real("c_mu")?,
        };
        params.validate()?;

        let seed_hex = get("rng_seed")?.trim();
        if seed_hex.len() != 64 {
            return Err(err("`rng_seed` must be 64 hex digits".into()));
        }
        let mut seed = [0u8; 32];
        for (i, byte) in seed.iter_mut().enumerate() {
            *byte = u8::from_str_radix(&seed_hex[2 * i..2 * i + 2], 16)
                .map_err(|e| err(format!("`rng_seed`: {e}")))?;
        }
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(int("rng_stream")?);
        rng.set_word_pos(
            get("rng_word_pos")?
                .trim()
                .parse::<u128>()
                .map_err(|e| err(format!("`rng_word_pos`: {e}")))?,
        );

        let sigma = real("sigma")?;
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(CmaError::InvalidSigma(sigma));
        }
        Ok(CmaState {
            mean: reals("mean", dim)?,
            sigma,
            cov: reals("cov", dim * dim)?,
            path_sigma: reals("path_sigma", dim)?,
            path_c: reals("path_c", dim)?,
            generation: int("generation")?,
            basis: reals("eig_basis", dim * dim)?,
            scale: reals("eig_scale", dim)?,
            eig_age: int("eig_age")?,
            rng,
            params,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn restored_state_continues_identically() {
        let mut a = CmaState::new(vec![1.0, 2.0, -1.0, 0.5], 0.8, 77).unwrap();
        for _ in 0..7 {
            let mut pop = a.ask().unwrap();
            for c in &mut pop {
                c.fitness = Some(c.vector.iter().map(|x| x * x).sum());
            }
            a.tell(pop).unwrap();
        }
        let mut b = CmaState::from_snapshot(&a.to_snapshot()).unwrap();
        assert_eq!(b.to_snapshot(), a.to_snapshot());
        for _ in 0..5 {
            let pa = a.ask().unwrap();
            let pb = b.ask().unwrap();
            assert_eq!(pa, pb);
            for (mut pop, s) in [(pa, &mut a), (pb, &mut b)] {
                for c in &mut pop {
                    c.fitness = Some(c.vector.iter().map(|x| x.abs()).sum());
                }
                s.tell(pop).unwrap();
            }
        }
        assert_eq!(a.mean(), b.mean());
        assert_eq!(a.cov(), b.cov());
    }

    #[test]
    fn rejects_garbage() {
        assert!(CmaState::from_snapshot("").is_err());
        assert!(CmaState::from_snapshot("cmaes-state 9\n").is_err());
        let good = CmaState::new(vec![0.0; 2], 1.0, 1).unwrap().to_snapshot();
        let broken = good.replace("sigma ", "sigma x");
        assert!(CmaState::from_snapshot(&broken).is_err());
        let missing: String = good
            .lines()
            .filter(|l| !l.starts_with("cov"))
            .map(|l| format!("{l}\n"))
            .collect();
        assert!(CmaState::from_snapshot(&missing).is_err());
    }
}
