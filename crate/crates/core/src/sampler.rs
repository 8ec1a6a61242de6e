//! Mini-batch index sets under full-batch, static and dynamic sub-sampling.
//!
//! Batches are drawn uniformly with replacement. Duplicates are kept, so a
//! batch always has exactly `batch_size` entries.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SamplerMode {
    /// Every evaluation sees all M observations.
    Full,
    /// One batch pinned per outer iteration; replaced by [`BatchSampler::refresh`].
    Static { batch_size: usize },
    /// A fresh batch for every evaluation.
    Dynamic { batch_size: usize },
}

impl SamplerMode {
    pub fn batch_size(&self) -> Option<usize> {
        match *self {
            SamplerMode::Full => None,
            SamplerMode::Static { batch_size } | SamplerMode::Dynamic { batch_size } => Some(batch_size),
        }
    }
}

impl fmt::Display for SamplerMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SamplerMode::Full => write!(f, "full"),
            SamplerMode::Static { batch_size } => write!(f, "static:{batch_size}"),
            SamplerMode::Dynamic { batch_size } => write!(f, "dynamic:{batch_size}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BatchSampler {
    mode: SamplerMode,
    m: usize,
    rng: Rng,
    pinned: Option<Vec<usize>>,
    pinned_iteration: Option<usize>,
    batch_seq: u64,
}

impl BatchSampler {
    pub fn new(mode: SamplerMode, m: usize, seed: u64) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument("sampler over an empty dataset".into()));
        }
        if let Some(b) = mode.batch_size() {
            if b == 0 || b > m {
                return Err(Error::InvalidArgument(format!("batch size {b} outside 1..={m}")));
            }
        }
        Ok(Self { mode, m, rng: rng::seeded(seed), pinned: None, pinned_iteration: None, batch_seq: 0 })
    }

    pub fn mode(&self) -> SamplerMode {
        self.mode
    }

    pub fn population(&self) -> usize {
        self.m
    }

    /// Sequence number of the batch most recently returned by [`draw`](Self::draw).
    /// Constant 0 in full-batch mode.
    pub fn batch_seq(&self) -> u64 {
        self.batch_seq
    }

    /// Iteration passed to the last [`refresh`](Self::refresh), if any.
    pub fn pinned_iteration(&self) -> Option<usize> {
        self.pinned_iteration
    }

    fn sample(&mut self, size: usize) -> Vec<usize> {
        (0..size).map(|_| rng::uniform_index(&mut self.rng, self.m)).collect()
    }

    pub fn draw(&mut self) -> Vec<usize> {
        match self.mode {
            SamplerMode::Full => (0..self.m).collect(),
            SamplerMode::Static { batch_size } => {
                if self.pinned.is_none() {
                    self.pinned = Some(self.sample(batch_size));
                    self.batch_seq += 1;
                }
                self.pinned.clone().unwrap()
            }
            SamplerMode::Dynamic { batch_size } => {
                self.batch_seq += 1;
                self.sample(batch_size)
            }
        }
    }

    /// Pins a new static batch for outer iteration `iteration`.
    pub fn refresh(&mut self, iteration: usize) -> Result<()> {
        let SamplerMode::Static { batch_size } = self.mode else {
            return Err(Error::Mode(format!("refresh called in {} mode", self.mode)));
        };
        self.pinned = Some(self.sample(batch_size));
        self.pinned_iteration = Some(iteration);
        self.batch_seq += 1;
        Ok(())
    }
}
