//! Seed-reproducible Gaussian noise indexed by absolute time.
//!
//! Every increment is a pure function of `(seed, channel, cell index)`.
//! Cells are grouped in chunks of [`CHUNK`] values; each chunk is drawn from
//! a ChaCha8 stream whose key packs the seed, channel and chunk index, so any
//! window can be replayed without generating its prefix.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Normals per generated chunk.
pub const CHUNK: usize = 64;

const DOMAIN: u64 = 0x6e6f_6973_6573_796e;

/// Intensities and grid of the noise sources.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Common external forcing intensity D_ext.
    #[serde(default)]
    pub d_ext: f64,
    /// Intrinsic field noise intensity D_E.
    #[serde(default)]
    pub d_e: f64,
    /// Intrinsic inversion noise intensity D_N.
    #[serde(default)]
    pub d_n: f64,
    pub seed: u64,
    /// Spacing of the increment grid in model time units.
    pub dt_grid: f64,
}

impl NoiseSpec {
    /// External forcing only.
    pub fn external(d_ext: f64, seed: u64, dt_grid: f64) -> Self {
        Self {
            d_ext,
            d_e: 0.0,
            d_n: 0.0,
            seed,
            dt_grid,
        }
    }

    /// No noise at all; still carries a grid so it can drive a stepper.
    pub fn silent(dt_grid: f64) -> Self {
        Self::external(0.0, 0, dt_grid)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("d_ext", self.d_ext), ("d_e", self.d_e), ("d_n", self.d_n)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(invalid(name, format!("intensity must be finite and >= 0, got {v}")));
            }
        }
        if !(self.dt_grid > 0.0) || !self.dt_grid.is_finite() {
            return Err(invalid("dt_grid", format!("must be positive, got {}", self.dt_grid)));
        }
        Ok(())
    }

    pub fn is_silent(&self) -> bool {
        self.d_ext == 0.0 && self.d_e == 0.0 && self.d_n == 0.0
    }
}

/// Intensities divided by gγ, for driving the Landau–Stuart model in
/// rescaled time with forcing comparable to the laser's.
pub fn scale_for_rescaled_time(spec: &NoiseSpec, g_gamma: f64) -> Result<NoiseSpec> {
    if !(g_gamma > 0.0) || !g_gamma.is_finite() {
        return Err(invalid("g_gamma", "must be positive"));
    }
    Ok(NoiseSpec {
        d_ext: spec.d_ext / g_gamma,
        d_e: spec.d_e / g_gamma,
        d_n: spec.d_n / g_gamma,
        ..*spec
    })
}

/// Inverse of [`scale_for_rescaled_time`].
pub fn unscale_from_rescaled_time(spec: &NoiseSpec, g_gamma: f64) -> Result<NoiseSpec> {
    if !(g_gamma > 0.0) || !g_gamma.is_finite() {
        return Err(invalid("g_gamma", "must be positive"));
    }
    Ok(NoiseSpec {
        d_ext: spec.d_ext * g_gamma,
        d_e: spec.d_e * g_gamma,
        d_n: spec.d_n * g_gamma,
        ..*spec
    })
}

/// Deterministically derive an independent child seed (SplitMix64 finaliser).
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A noise channel. Oscillator indices select independent intrinsic streams.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    ExtRe,
    ExtIm,
    FieldRe(u32),
    FieldIm(u32),
    Inversion(u32),
}

impl Channel {
    /// Dense integer id: 0, 1 for the external pair, then three per oscillator.
    pub fn id(self) -> usize {
        match self {
            Channel::ExtRe => 0,
            Channel::ExtIm => 1,
            Channel::FieldRe(j) => 2 + 3 * j as usize,
            Channel::FieldIm(j) => 3 + 3 * j as usize,
            Channel::Inversion(j) => 4 + 3 * j as usize,
        }
    }
}

/// An immutable, query-order independent noise realisation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoisePath {
    spec: NoiseSpec,
}

fn chunk_key(seed: u64, channel: usize, chunk: i64, split: u64) -> [u8; 32] {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(channel as u64).to_le_bytes());
    key[16..24].copy_from_slice(&chunk.to_le_bytes());
    key[24..].copy_from_slice(&(DOMAIN ^ split).to_le_bytes());
    key
}

fn fill_chunk(seed: u64, channel: usize, chunk: i64, split: u64, out: &mut [f64; CHUNK]) {
    let mut rng = ChaCha8Rng::from_seed(chunk_key(seed, channel, chunk, split));
    for v in out.iter_mut() {
        *v = rng.sample(StandardNormal);
    }
}

impl NoisePath {
    pub fn new(spec: NoiseSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self { spec })
    }

    pub fn spec(&self) -> &NoiseSpec {
        &self.spec
    }

    pub fn dt_grid(&self) -> f64 {
        self.spec.dt_grid
    }

    /// Grid cell containing time `t` (nearest grid point at or below, with
    /// rounding to absorb floating-point drift).
    pub fn time_index(&self, t: f64) -> i64 {
        (t / self.spec.dt_grid).round() as i64
    }

    /// Increment variance per grid cell.
    pub fn variance(&self, channel: Channel) -> f64 {
        let dt = self.spec.dt_grid;
        match channel {
            Channel::ExtRe | Channel::ExtIm => self.spec.d_ext * dt,
            Channel::FieldRe(_) | Channel::FieldIm(_) => self.spec.d_e * dt,
            Channel::Inversion(_) => 2.0 * self.spec.d_n * dt,
        }
    }

    /// The unit normal assigned to a cell.
    pub fn standard_normal(&self, channel: Channel, index: i64) -> f64 {
        let chunk = index.div_euclid(CHUNK as i64);
        let mut buf = [0.0; CHUNK];
        fill_chunk(self.spec.seed, channel.id(), chunk, 0, &mut buf);
        buf[index.rem_euclid(CHUNK as i64) as usize]
    }

    /// The Gaussian increment of one grid cell. Exactly zero for a silent channel.
    pub fn sample_increment(&self, channel: Channel, index: i64) -> f64 {
        let var = self.variance(channel);
        if var == 0.0 {
            return 0.0;
        }
        var.sqrt() * self.standard_normal(channel, index)
    }

    /// A caching reader for sequential access.
    pub fn cursor(&self) -> NoiseCursor {
        NoiseCursor::new(*self)
    }
}

struct Cached {
    channel: usize,
    split: u64,
    chunk: i64,
    values: [f64; CHUNK],
}

/// Sequential reader over a [`NoisePath`], caching one chunk per channel.
///
/// Values are identical to the uncached queries on the path.
pub struct NoiseCursor {
    path: NoisePath,
    cache: Vec<Option<Box<Cached>>>,
}

impl NoiseCursor {
    fn new(path: NoisePath) -> Self {
        Self { path, cache: Vec::new() }
    }

    pub fn path(&self) -> &NoisePath {
        &self.path
    }

    fn normal(&mut self, channel: usize, split: u64, index: i64) -> f64 {
        let chunk = index.div_euclid(CHUNK as i64);
        let pos = index.rem_euclid(CHUNK as i64) as usize;
        if self.cache.len() <= channel {
            self.cache.resize_with(channel + 1, || None);
        }
        let slot = &mut self.cache[channel];
        match slot {
            Some(c) if c.chunk == chunk && c.split == split => c.values[pos],
            Some(c) => {
                c.chunk = chunk;
                c.split = split;
                fill_chunk(self.path.spec.seed, channel, chunk, split, &mut c.values);
                c.values[pos]
            }
            None => {
                let mut c = Box::new(Cached {
                    channel,
                    split,
                    chunk,
                    values: [0.0; CHUNK],
                });
                fill_chunk(self.path.spec.seed, c.channel, chunk, split, &mut c.values);
                let v = c.values[pos];
                *slot = Some(c);
                v
            }
        }
    }

    /// Increment of one grid cell.
    pub fn increment(&mut self, channel: Channel, index: i64) -> f64 {
        let var = self.path.variance(channel);
        if var == 0.0 {
            return 0.0;
        }
        var.sqrt() * self.normal(channel.id(), 0, index)
    }

    /// Sum of the increments of `cells` consecutive grid cells starting at `start`.
    pub fn span_increment(&mut self, channel: Channel, start: i64, cells: u32) -> f64 {
        let var = self.path.variance(channel);
        if var == 0.0 {
            return 0.0;
        }
        let id = channel.id();
        let mut z = 0.0;
        for k in 0..cells as i64 {
            z += self.normal(id, 0, start + k);
        }
        var.sqrt() * z
    }

    /// Increment over part `part` of `parts` equal sub-cells of grid cell `index`.
    ///
    /// Sub-cells are independent with variance `cell variance / parts`; a
    /// partition with `parts == 1` is the cell increment itself.
    pub fn sub_increment(&mut self, channel: Channel, index: i64, part: u32, parts: u32) -> f64 {
        if parts <= 1 {
            return self.increment(channel, index);
        }
        let var = self.path.variance(channel) / parts as f64;
        if var == 0.0 {
            return 0.0;
        }
        let sub = index * parts as i64 + part as i64;
        var.sqrt() * self.normal(channel.id(), parts as u64, sub)
    }
}
