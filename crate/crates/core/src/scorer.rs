//! OOD scoring with ID labels, selected negatives and extra negatives,
//! zero-shot classification and the threshold detector.
//!
//! `S(x) = A / (A + B + E)` where each component is a sum of
//! `exp(cos(h, t) / tau)` over its text set: `A` the ID labels, `B` the
//! selected negatives and `E` the dynamic extra negatives. With `E` empty
//! this is the plain negative-label score.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{cosine, Embedding, Modality};
use crate::store::{LabelSet, Verdict};

pub const DEFAULT_TEMPERATURE: f64 = 1.0;
/// Smallest accepted temperature; keeps `exp(1 / tau)` finite for unit inputs.
pub const MIN_TEMPERATURE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScorerConfig {
    pub temperature: f64,
    pub threshold: f64,
}

impl Default for ScorerConfig {
    fn default() -> Self {
        ScorerConfig {
            temperature: DEFAULT_TEMPERATURE,
            threshold: 0.5,
        }
    }
}

impl ScorerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature >= MIN_TEMPERATURE) || !self.temperature.is_finite() {
            return Err(Error::Config(format!(
                "temperature must be finite and at least {MIN_TEMPERATURE}, got {}",
                self.temperature
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRecord {
    pub sample_id: String,
    pub score: f64,
    pub sum_id: f64,
    pub sum_selected_neg: f64,
    pub sum_extra_neg: f64,
    pub max_id_cos: f64,
    /// Over selected and extra negatives; `-inf` when there are none.
    pub max_neg_cos: f64,
}

impl ScoreRecord {
    pub fn sum_neg(&self) -> f64 {
        self.sum_selected_neg + self.sum_extra_neg
    }
}

struct Component {
    sum: f64,
    max_cos: f64,
}

/// Exponential sum over `set`, accumulated in id order so the result does not
/// depend on how the caller ordered the set.
fn component(h: &Embedding, set: &[&Embedding], tau: f64) -> Result<Component> {
    let mut terms = Vec::with_capacity(set.len());
    let mut max_cos = f64::NEG_INFINITY;
    for t in set {
        if t.dim() != h.dim() {
            return Err(Error::DimMismatch {
                expected: h.dim(),
                found: t.dim(),
            });
        }
        let c = cosine(h.values(), t.values())?;
        max_cos = max_cos.max(c);
        terms.push((t.id.as_str(), (c / tau).exp()));
    }
    terms.sort_by(|a, b| a.0.cmp(b.0));
    let sum = terms.iter().fold(0.0, |acc, (_, x)| acc + x);
    Ok(Component { sum, max_cos })
}

/// Scores one image against labels, selected negatives and extras.
pub fn score<'a>(
    h: &Embedding,
    labels: &LabelSet,
    negatives: &[Embedding],
    extras: impl IntoIterator<Item = &'a Embedding>,
    config: &ScorerConfig,
) -> Result<ScoreRecord> {
    config.validate()?;
    h.expect_modality(Modality::Image)?;
    let tau = config.temperature;
    let id = component(h, &labels.embeddings.iter().collect::<Vec<_>>(), tau)?;
    let neg = component(h, &negatives.iter().collect::<Vec<_>>(), tau)?;
    let extra = component(h, &extras.into_iter().collect::<Vec<_>>(), tau)?;
    Ok(ScoreRecord {
        sample_id: h.id.clone(),
        score: id.sum / (id.sum + neg.sum + extra.sum),
        sum_id: id.sum,
        sum_selected_neg: neg.sum,
        sum_extra_neg: extra.sum,
        max_id_cos: id.max_cos,
        max_neg_cos: neg.max_cos.max(extra.max_cos),
    })
}

/// Zero-shot prediction: the label with the highest cosine, lowest index on
/// ties.
pub fn classify(h: &Embedding, labels: &LabelSet) -> Result<usize> {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, e) in labels.embeddings.iter().enumerate() {
        let c = cosine(h.values(), e.values())?;
        if c > best.1 {
            best = (i, c);
        }
    }
    Ok(best.0)
}

/// ID iff `score >= gamma`.
pub fn detect(record: &ScoreRecord, gamma: f64) -> Verdict {
    if record.score >= gamma {
        Verdict::Id
    } else {
        Verdict::Ood
    }
}
