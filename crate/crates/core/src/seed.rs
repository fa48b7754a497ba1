//! Portable seed derivation and the noise generator.
//!
//! Both are small enough to reimplement in any language:
//!
//! - `splitmix64(x)`: `x += 0x9E3779B97F4A7C15`, then
//!   `x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9`,
//!   `x = (x ^ (x >> 27)) * 0x94D049BB133111EB`, `x ^ (x >> 31)`
//!   (wrapping arithmetic).
//! - `derive_seed(base, [p1, p2, ...])`: `h = splitmix64(base)`, then for
//!   each part `h = splitmix64(h ^ splitmix64(p))`.
//! - [`XorShift64Star`]: state `splitmix64(seed)` (or `0x9E3779B97F4A7C15`
//!   if that is zero); step `x ^= x >> 12; x ^= x << 25; x ^= x >> 27`,
//!   output `x * 0x2545F4914F6CDD1D`. Uniforms are `(out >> 11) * 2^-53`.
//! - [`gaussian`]: Box-Muller on the first two uniforms `u1, u2` of a fresh
//!   generator, first variate only: `sqrt(-2 ln(1 - u1)) * cos(2 pi u2)`.

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(base), |h, &p| splitmix64(h ^ splitmix64(p)))
}

/// Seed for repeat `repeat` of trial `trial` in a study seeded `study_seed`.
pub fn repeat_seed(study_seed: u64, trial: u64, repeat: u32) -> u64 {
    derive_seed(study_seed, &[trial, u64::from(repeat)])
}

#[derive(Debug, Clone)]
pub struct XorShift64Star {
    state: u64,
}

impl XorShift64Star {
    pub fn new(seed: u64) -> Self {
        let s = splitmix64(seed);
        XorShift64Star {
            state: if s == 0 { 0x9E37_79B9_7F4A_7C15 } else { s },
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.state;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.state = x;
        x.wrapping_mul(0x2545_F491_4F6C_DD1D)
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// Standard normal variate determined entirely by `seed`.
pub fn gaussian(seed: u64) -> f64 {
    let mut rng = XorShift64Star::new(seed);
    let u1 = 1.0 - rng.next_f64();
    let u2 = rng.next_f64();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}
