//! Counter-keyed random streams.
//!
//! A stream is named by a master seed plus a path of 64-bit labels. The path
//! is folded through SplitMix64 into a 256-bit ChaCha8 key, so two streams
//! with different paths never share state and a stream can be re-created
//! anywhere (any thread, any order) and yields the same values.
//!
//! Normal variates use the Box-Muller transform with `libm` transcendental
//! functions, which keeps the output bit-identical across platforms.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A named, reproducible random stream.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RngStream {
    master_seed: u64,
    path: Vec<u64>,
}

impl RngStream {
    pub fn new(master_seed: u64) -> Self {
        Self {
            master_seed,
            path: Vec::new(),
        }
    }

    pub fn with_path(master_seed: u64, path: &[u64]) -> Self {
        Self {
            master_seed,
            path: path.to_vec(),
        }
    }

    /// Sub-stream obtained by appending one label to the path.
    pub fn child(&self, label: u64) -> Self {
        let mut path = self.path.clone();
        path.push(label);
        Self {
            master_seed: self.master_seed,
            path,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn path(&self) -> &[u64] {
        &self.path
    }

    fn key(&self) -> u64 {
        // Length is mixed in so that [a] and [a, 0] differ.
        let mut k = splitmix64(self.master_seed ^ 0x5EED);
        for &label in &self.path {
            k = splitmix64(k ^ splitmix64(label));
        }
        splitmix64(k ^ self.path.len() as u64)
    }

    /// Fresh generator positioned at the start of this stream.
    pub fn generator(&self) -> StreamRng {
        let mut k = self.key();
        let mut seed = [0u8; 32];
        for chunk in seed.chunks_exact_mut(8) {
            k = splitmix64(k);
            chunk.copy_from_slice(&k.to_le_bytes());
        }
        StreamRng {
            inner: ChaCha8Rng::from_seed(seed),
            spare: None,
        }
    }

    /// A single 64-bit value derived from this stream (e.g. a sub-seed).
    pub fn derive_u64(&self) -> u64 {
        self.generator().next_u64()
    }

    /// `count` independent standard normal draws.
    pub fn standard_normals(&self, count: usize) -> Vec<f64> {
        let mut g = self.generator();
        (0..count).map(|_| g.standard_normal()).collect()
    }
}

/// Generator state for one stream.
pub struct StreamRng {
    inner: ChaCha8Rng,
    spare: Option<f64>,
}

impl StreamRng {
    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on (0, 1], 53-bit resolution.
    pub fn uniform_open0(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on [0, 1), 53-bit resolution.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..bound` by rejection (no modulo bias).
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0);
        let zone = u64::MAX - (u64::MAX % bound) - 1;
        loop {
            let v = self.next_u64();
            if v <= zone {
                return v % bound;
            }
        }
    }

    /// Box-Muller; both variates of each pair are used.
    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.uniform_open0();
        let u2 = self.uniform();
        let r = libm::sqrt(-2.0 * libm::log(u1));
        let theta = 2.0 * std::f64::consts::PI * u2;
        let (s, c) = (libm::sin(theta), libm::cos(theta));
        self.spare = Some(r * s);
        r * c
    }
}
