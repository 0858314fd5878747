//! Streaming extra-negative pool.
//!
//! Each test sample is scored against the current pool. A sample scoring at
//! or below `beta` is inverted into a text embedding; if that embedding clears
//! the strict all-classes distance criterion it joins the pool, the pool is
//! trimmed to `capacity` by deviation degree, and the sample is rescored.
//! Earlier samples are never revisited.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Embedding;
use crate::inversion::{invert, InversionConfig, ToyEncoder};
use crate::proxy::ProxySet;
use crate::scorer::{score, ScoreRecord, ScorerConfig};
use crate::selection::evaluate_text;
use crate::store::{write_rows, write_sidecar, LabelSet};

pub const DEFAULT_BETA: f64 = 0.35;
pub const DEFAULT_CAPACITY: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoolConfig {
    pub beta: f64,
    pub capacity: usize,
}

impl Default for PoolConfig {
    fn default() -> Self {
        PoolConfig {
            beta: DEFAULT_BETA,
            capacity: DEFAULT_CAPACITY,
        }
    }
}

impl PoolConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::Config(format!(
                "beta must be in (0, 1), got {}",
                self.beta
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoolEntry {
    pub embedding: Embedding,
    pub deviation: f64,
    pub origin_sample: String,
    pub insertion_seq: u64,
}

/// Capacity-bounded set of extra negatives, kept sorted by deviation
/// (descending) and then insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicPool {
    capacity: usize,
    entries: Vec<PoolEntry>,
    next_seq: u64,
    evicted: usize,
    max_evicted_deviation: f64,
}

impl DynamicPool {
    pub fn new(capacity: usize) -> Self {
        DynamicPool {
            capacity,
            entries: Vec::new(),
            next_seq: 0,
            evicted: 0,
            max_evicted_deviation: f64::NEG_INFINITY,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn evicted(&self) -> usize {
        self.evicted
    }

    /// Largest deviation of any evicted entry, `-inf` if none.
    pub fn max_evicted_deviation(&self) -> f64 {
        self.max_evicted_deviation
    }

    pub fn min_retained_deviation(&self) -> Option<f64> {
        self.entries.last().map(|e| e.deviation)
    }

    pub fn embeddings(&self) -> impl Iterator<Item = &Embedding> {
        self.entries.iter().map(|e| &e.embedding)
    }

    /// Inserts an entry and evicts down to capacity. Returns whether the new
    /// entry survived.
    pub fn insert(&mut self, embedding: Embedding, deviation: f64, origin_sample: &str) -> bool {
        let seq = self.next_seq;
        self.next_seq += 1;
        let entry = PoolEntry {
            embedding,
            deviation,
            origin_sample: origin_sample.to_string(),
            insertion_seq: seq,
        };
        // first position whose entry ranks below the new one; equal
        // deviations rank by insertion order, so the new entry goes last
        let pos = self.entries.partition_point(|e| e.deviation >= deviation);
        self.entries.insert(pos, entry);
        let mut survived = true;
        while self.entries.len() > self.capacity {
            let gone = self.entries.pop().expect("nonempty");
            if gone.insertion_seq == seq {
                survived = false;
            }
            self.evicted += 1;
            self.max_evicted_deviation = self.max_evicted_deviation.max(gone.deviation);
        }
        survived
    }

    /// Copy of the entries, deviation descending.
    pub fn snapshot(&self) -> Vec<PoolEntry> {
        self.entries.clone()
    }

    /// Writes pool embeddings as `EMB1` plus a sidecar of
    /// `origin_sample<TAB>deviation` lines.
    pub fn export(
        &self,
        dim: usize,
        emb: impl AsRef<Path>,
        sidecar: impl AsRef<Path>,
    ) -> Result<()> {
        let rows: Vec<&[f64]> = self.entries.iter().map(|e| e.embedding.values()).collect();
        write_rows(emb, dim, &rows)?;
        write_sidecar(
            sidecar,
            self.entries
                .iter()
                .map(|e| format!("{}\t{:?}", e.origin_sample, e.deviation)),
        )
    }
}

/// What happened to one sample in the stream.
#[derive(Debug, Clone, PartialEq)]
pub struct StepTrace {
    pub sample_id: String,
    pub first_score: f64,
    pub triggered: bool,
    /// The inverted embedding passed the filter.
    pub admitted: bool,
    pub pool_len: usize,
}

#[derive(Debug, Clone)]
pub struct StreamOutcome {
    /// Final scores in stream order.
    pub records: Vec<ScoreRecord>,
    pub trace: Vec<StepTrace>,
    pub pool: DynamicPool,
}

impl StreamOutcome {
    pub fn pool_state(&self) -> Vec<PoolEntry> {
        self.pool.snapshot()
    }
}

/// Fixed inputs of a streaming run.
pub struct StreamContext<'a> {
    pub labels: &'a LabelSet,
    pub negatives: &'a [Embedding],
    pub proxies: &'a ProxySet,
    pub scorer: ScorerConfig,
    pub pool: PoolConfig,
    pub encoder: &'a ToyEncoder,
    pub inversion: InversionConfig,
}

pub fn process_stream(test: &[Embedding], ctx: &StreamContext<'_>) -> Result<StreamOutcome> {
    ctx.pool.validate()?;
    ctx.scorer.validate()?;
    ctx.inversion.validate()?;
    let mut pool = DynamicPool::new(ctx.pool.capacity);
    let mut records = Vec::with_capacity(test.len());
    let mut trace = Vec::with_capacity(test.len());

    for h in test {
        let step = |e: Error| e.in_sample(&h.id);
        let first =
            score(h, ctx.labels, ctx.negatives, pool.embeddings(), &ctx.scorer).map_err(step)?;
        let first_score = first.score;
        let triggered = first.score <= ctx.pool.beta;
        let mut admitted = false;
        let mut record = first;
        if triggered {
            let inv = invert(h, ctx.encoder, &ctx.inversion).map_err(step)?;
            if let Some((_, deviation)) =
                evaluate_text(&inv.embedding, ctx.proxies).map_err(step)?
            {
                admitted = true;
                pool.insert(inv.embedding, deviation, &h.id);
                record = score(h, ctx.labels, ctx.negatives, pool.embeddings(), &ctx.scorer)
                    .map_err(step)?;
            }
        }
        trace.push(StepTrace {
            sample_id: h.id.clone(),
            first_score,
            triggered,
            admitted,
            pool_len: pool.len(),
        });
        records.push(record);
    }
    Ok(StreamOutcome {
        records,
        trace,
        pool,
    })
}

/// Scores every sample with an empty extra pool.
pub fn score_batch(
    test: &[Embedding],
    labels: &LabelSet,
    negatives: &[Embedding],
    config: &ScorerConfig,
) -> Result<Vec<ScoreRecord>> {
    use rayon::prelude::*;
    test.par_iter()
        .map(|h| score(h, labels, negatives, [], config).map_err(|e| e.in_sample(&h.id)))
        .collect()
}
