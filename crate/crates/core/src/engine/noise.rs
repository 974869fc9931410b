//! Gradient noise `ξ`, annealing noise `w`, and the counter-based random
//! streams behind them.
//!
//! Every draw comes from a stream keyed by `(seed_root, purpose, agent)` and
//! positioned by the round number, so any agent can regenerate its noise for
//! any round without shared state. This is what makes the synchronous driver
//! and the message-passing runtime bit-identical.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Purpose {
    GradientNoise = 1,
    Annealing = 2,
    Initial = 3,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent, reproducible stream for one `(purpose, agent, round)` triple.
///
/// The ChaCha key is derived from `(seed_root, purpose, agent)`; the round
/// selects the ChaCha stream id.
pub fn derive_stream(seed_root: u64, purpose: Purpose, agent: u32, round: u64) -> ChaCha8Rng {
    let mut state = seed_root;
    let salt = splitmix64(&mut state) ^ ((purpose as u64) << 32 | agent as u64);
    let mut state = salt;
    let mut key = [0u8; 32];
    for chunk in key.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(round);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GradientNoise {
    #[default]
    None,
    /// Each coordinate uniform on `[−bound, bound]`.
    Uniform { bound: f64 },
    /// Each coordinate `N(0, sigma²)` clamped to `[−clip, clip]`. The clamp
    /// is symmetric, so the clamped law keeps mean exactly zero.
    TruncatedGaussian { sigma: f64, clip: f64 },
}

impl GradientNoise {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            GradientNoise::None => true,
            GradientNoise::Uniform { bound } => bound > 0.0 && bound.is_finite(),
            GradientNoise::TruncatedGaussian { sigma, clip } => {
                sigma > 0.0 && sigma.is_finite() && clip > 0.0 && clip.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidSpec(format!("gradient noise parameters out of range: {self:?}")))
        }
    }

    pub fn is_active(&self) -> bool {
        !matches!(self, GradientNoise::None)
    }

    /// Bound `B` on `E‖ξ‖²` for a `dim`-dimensional block.
    pub fn second_moment_bound(&self, dim: usize) -> f64 {
        let d = dim as f64;
        match *self {
            GradientNoise::None => 0.0,
            GradientNoise::Uniform { bound } => d * bound * bound / 3.0,
            GradientNoise::TruncatedGaussian { sigma, clip } => d * (sigma * sigma).min(clip * clip),
        }
    }

    pub fn sample_into(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        match *self {
            GradientNoise::None => out.fill(0.0),
            GradientNoise::Uniform { bound } => {
                for o in out {
                    *o = rng.random_range(-bound..=bound);
                }
            }
            GradientNoise::TruncatedGaussian { sigma, clip } => {
                for o in out {
                    let z: f64 = rng.sample(StandardNormal);
                    *o = (sigma * z).clamp(-clip, clip);
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    #[serde(default)]
    pub gradient: GradientNoise,
    /// Whether the annealing term `gamma_t w_n(t)` is injected.
    #[serde(default = "yes")]
    pub annealing: bool,
    #[serde(default)]
    pub seed_root: u64,
}

fn yes() -> bool {
    true
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            gradient: GradientNoise::None,
            annealing: true,
            seed_root: 0,
        }
    }
}

impl NoiseModel {
    pub fn silent() -> Self {
        Self {
            gradient: GradientNoise::None,
            annealing: false,
            seed_root: 0,
        }
    }

    pub fn gradient_noise(&self, stream_id: u32, round: u64, out: &mut [f64]) {
        if self.gradient.is_active() {
            let mut rng = derive_stream(self.seed_root, Purpose::GradientNoise, stream_id, round);
            self.gradient.sample_into(&mut rng, out);
        } else {
            out.fill(0.0);
        }
    }

    /// Standard Gaussian block `w_n(t)`.
    pub fn annealing_noise(&self, stream_id: u32, round: u64, out: &mut [f64]) {
        let mut rng = derive_stream(self.seed_root, Purpose::Annealing, stream_id, round);
        for o in out {
            *o = rng.sample(StandardNormal);
        }
    }
}
