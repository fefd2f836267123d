//! Seed-reproducible Brownian paths on dyadic grids.
//!
//! Every Gaussian draw is keyed by `(seed, stream_id, node)` where the node
//! identifies one dyadic point, so a path at any level is a pure function of
//! its key and level, and refinement never disturbs existing values.

use std::io::{self, Write};

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};

pub const MAX_LEVEL: u32 = 30;

/// Standard normal draw attached to one dyadic node.
///
/// Node 1 carries `W(T)`; the odd point `k` at level `l >= 1` is node
/// `2^l + k`. Each node owns four 32-bit words of the ChaCha stream.
pub fn node_normal(seed: u64, stream_id: u64, level: u32, k: u64) -> f64 {
    let node = (1u64 << level) + k;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng.set_word_pos(u128::from(node) * 4);
    let a = rng.next_u64();
    let b = rng.next_u64();
    // Box-Muller on (0, 1] x [0, 1)
    let u1 = ((a >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
    let u2 = (b >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// `W` at `t_j = j T / 2^level`, `j = 0..=2^level`.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    pub seed: u64,
    pub stream_id: u64,
    pub final_time: f64,
    level: u32,
    values: Vec<f64>,
}

impl BrownianPath {
    pub fn sample(seed: u64, stream_id: u64, final_time: f64, level: u32) -> Result<Self> {
        if level > MAX_LEVEL {
            return Err(Error::LevelTooDeep(level));
        }
        if !(final_time > 0.0) {
            return Err(Error::MalformedSpec(format!(
                "final time must be positive, got {final_time}"
            )));
        }
        let mut path = Self {
            seed,
            stream_id,
            final_time,
            level: 0,
            values: vec![0.0, final_time.sqrt() * node_normal(seed, stream_id, 0, 0)],
        };
        while path.level < level {
            path = path.refine()?;
        }
        Ok(path)
    }

    /// Brownian-bridge midpoints between every pair of nodes.
    pub fn refine(&self) -> Result<Self> {
        if self.level >= MAX_LEVEL {
            return Err(Error::LevelTooDeep(self.level + 1));
        }
        let level = self.level + 1;
        let sd = (self.dt() / 4.0).sqrt();
        let mut values = Vec::with_capacity(2 * self.values.len() - 1);
        for (j, w) in self.values.windows(2).enumerate() {
            values.push(w[0]);
            let z = node_normal(self.seed, self.stream_id, level, 2 * j as u64 + 1);
            values.push(0.5 * (w[0] + w[1]) + sd * z);
        }
        values.push(*self.values.last().unwrap());
        Ok(Self {
            values,
            level,
            ..*self
        })
    }

    /// Refines (or subsamples) to `level`.
    pub fn at_level(&self, level: u32) -> Result<Self> {
        if level > MAX_LEVEL {
            return Err(Error::LevelTooDeep(level));
        }
        if level <= self.level {
            let stride = 1usize << (self.level - level);
            return Ok(Self {
                values: self.values.iter().step_by(stride).copied().collect(),
                level,
                ..*self
            });
        }
        let mut p = self.refine()?;
        while p.level < level {
            p = p.refine()?;
        }
        Ok(p)
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn steps(&self) -> usize {
        self.values.len() - 1
    }

    pub fn dt(&self) -> f64 {
        self.final_time / self.steps() as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn time(&self, j: usize) -> f64 {
        self.final_time * j as f64 / self.steps() as f64
    }

    pub fn value(&self, j: usize) -> Result<f64> {
        self.values.get(j).copied().ok_or(Error::IndexOutOfRange {
            index: j,
            len: self.values.len(),
        })
    }

    pub fn terminal(&self) -> f64 {
        self.values[self.steps()]
    }

    /// `W(t_{j+1}) - W(t_j)`.
    pub fn increment(&self, j: usize) -> Result<f64> {
        if j >= self.steps() {
            return Err(Error::IndexOutOfRange {
                index: j,
                len: self.steps(),
            });
        }
        Ok(self.values[j + 1] - self.values[j])
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &w| {
                (lo.min(w), hi.max(w))
            })
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "t,W")?;
        for (j, w) in self.values.iter().enumerate() {
            writeln!(out, "{:.17e},{:.17e}", self.time(j), w)?;
        }
        Ok(())
    }
}

pub fn sample_path(seed: u64, stream_id: u64, final_time: f64, level: u32) -> Result<BrownianPath> {
    BrownianPath::sample(seed, stream_id, final_time, level)
}

pub fn refine(path: &BrownianPath) -> Result<BrownianPath> {
    path.refine()
}

pub fn increment(path: &BrownianPath, j: usize) -> Result<f64> {
    path.increment(j)
}
