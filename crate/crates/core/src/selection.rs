//! Static negative-text selection from a pre-embedded corpus.
//!
//! The inter-modal mode admits a text only when its distance to every class
//! proxy strictly exceeds that class's base distance, then keeps the top `m`
//! by deviation degree. The intra-modal baseline ranks texts by a low
//! quantile of their distances to the ID label embeddings.

use std::cmp::Ordering;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{cosine, inter_modal_distance, Embedding};
use crate::proxy::ProxySet;
use crate::store::{write_rows, write_sidecar, LabelSet};

pub const DEFAULT_M: usize = 2000;
pub const DEFAULT_INTRA_PERCENTILE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMode {
    InterModal,
    IntraModalBaseline,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub m: usize,
    pub mode: SelectionMode,
    pub intra_percentile: f64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            m: DEFAULT_M,
            mode: SelectionMode::InterModal,
            intra_percentile: DEFAULT_INTRA_PERCENTILE,
        }
    }
}

/// A corpus text that passes the all-classes criterion.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub embedding: Embedding,
    pub corpus_index: usize,
    pub distances: Vec<f64>,
    pub deviation: f64,
}

/// One member of a selected negative set. `rank_key` is the deviation
/// degree for inter-modal selection and the quantile distance for the
/// intra-modal baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectedNegative {
    pub embedding: Embedding,
    pub corpus_index: usize,
    pub rank_key: f64,
}

/// Ordered negative set, best first.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NegativeSet {
    pub entries: Vec<SelectedNegative>,
}

impl NegativeSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn embeddings(&self) -> Vec<Embedding> {
        self.entries.iter().map(|e| e.embedding.clone()).collect()
    }

    pub fn corpus_indices(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.corpus_index).collect()
    }

    /// Writes the set as `EMB1` plus a sidecar of `corpus_index<TAB>rank_key`
    /// lines.
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
                .map(|e| format!("{}\t{:?}", e.corpus_index, e.rank_key)),
        )
    }
}

/// Per-class distances and deviation degree, or `None` when the text fails
/// the strict criterion at some class.
pub fn evaluate_text(text: &Embedding, proxies: &ProxySet) -> Result<Option<(Vec<f64>, f64)>> {
    if text.dim() != proxies.dim() {
        return Err(Error::DimMismatch {
            expected: proxies.dim(),
            found: text.dim(),
        });
    }
    let mut distances = Vec::with_capacity(proxies.num_classes());
    let mut deviation = 0.0;
    for (p, &base) in proxies.proxies.iter().zip(&proxies.base_distances) {
        let d = inter_modal_distance(text, p)?;
        if !(d > base) {
            return Ok(None);
        }
        deviation += d - base;
        distances.push(d);
    }
    Ok(Some((distances, deviation)))
}

pub fn inter_modal_candidates(corpus: &[Embedding], proxies: &ProxySet) -> Result<Vec<Candidate>> {
    let evaluated = corpus
        .par_iter()
        .map(|t| evaluate_text(t, proxies))
        .collect::<Result<Vec<_>>>()?;
    Ok(evaluated
        .into_iter()
        .zip(corpus)
        .enumerate()
        .filter_map(|(corpus_index, (r, t))| {
            r.map(|(distances, deviation)| Candidate {
                embedding: t.clone(),
                corpus_index,
                distances,
                deviation,
            })
        })
        .collect())
}

fn by_key_then_index(a: (f64, usize), b: (f64, usize)) -> Ordering {
    b.0.total_cmp(&a.0).then(a.1.cmp(&b.1))
}

/// Top `m` candidates by deviation (descending), ties by corpus index.
pub fn select_top_m(mut candidates: Vec<Candidate>, m: usize) -> Vec<Candidate> {
    if candidates.len() < m {
        log::warn!(
            "only {} inter-modal candidates available for m = {m}",
            candidates.len()
        );
    }
    candidates.sort_by(|a, b| {
        by_key_then_index((a.deviation, a.corpus_index), (b.deviation, b.corpus_index))
    });
    candidates.truncate(m);
    candidates
}

/// Linear-interpolation quantile of unsorted values, `p` in `[0, 1]`.
pub fn quantile(values: &[f64], p: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Intra-modal ranking key of one text: the `percentile` quantile of its
/// distances to every ID label.
pub fn intra_modal_key(text: &Embedding, labels: &LabelSet, percentile: f64) -> Result<f64> {
    if text.dim() != labels.dim() {
        return Err(Error::DimMismatch {
            expected: labels.dim(),
            found: text.dim(),
        });
    }
    let d = labels
        .embeddings
        .iter()
        .map(|e| cosine(text.values(), e.values()).map(|c| 1.0 - c))
        .collect::<Result<Vec<_>>>()?;
    Ok(quantile(&d, percentile))
}

pub fn intra_modal_baseline(
    corpus: &[Embedding],
    labels: &LabelSet,
    m: usize,
    percentile: f64,
) -> Result<NegativeSet> {
    if !(percentile > 0.0 && percentile <= 1.0) {
        return Err(Error::Config(format!(
            "intra percentile must be in (0, 1], got {percentile}"
        )));
    }
    let keys = corpus
        .par_iter()
        .map(|t| intra_modal_key(t, labels, percentile))
        .collect::<Result<Vec<_>>>()?;
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    order.sort_by(|&a, &b| by_key_then_index((keys[a], a), (keys[b], b)));
    order.truncate(m);
    Ok(NegativeSet {
        entries: order
            .into_iter()
            .map(|k| SelectedNegative {
                embedding: corpus[k].clone(),
                corpus_index: k,
                rank_key: keys[k],
            })
            .collect(),
    })
}

/// Selects the static negative set according to `config`.
pub fn select(
    corpus: &[Embedding],
    labels: &LabelSet,
    proxies: &ProxySet,
    config: &SelectionConfig,
) -> Result<NegativeSet> {
    match config.mode {
        SelectionMode::InterModal => {
            let chosen = select_top_m(inter_modal_candidates(corpus, proxies)?, config.m);
            Ok(NegativeSet {
                entries: chosen
                    .into_iter()
                    .map(|c| SelectedNegative {
                        embedding: c.embedding,
                        corpus_index: c.corpus_index,
                        rank_key: c.deviation,
                    })
                    .collect(),
            })
        }
        SelectionMode::IntraModalBaseline => {
            intra_modal_baseline(corpus, labels, config.m, config.intra_percentile)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn text(id: &str, v: &[f64]) -> Embedding {
        Embedding::text(id, v).unwrap()
    }

    fn cand(idx: usize, dev: f64) -> Candidate {
        Candidate {
            embedding: text(&format!("c{idx}"), &[1.0, 0.0]),
            corpus_index: idx,
            distances: vec![],
            deviation: dev,
        }
    }

    #[test]
    fn label_text_is_excluded() {
        let labels = LabelSet::from_rows(&[vec![1.0, 0.2, 0.0], vec![0.0, 1.0, 0.3]]).unwrap();
        let proxies = ProxySet {
            proxies: vec![vec![0.8, 0.1, 0.5], vec![0.1, 0.7, 0.6]],
            base_distances: vec![],
            images_per_class: 1,
        };
        let proxies = crate::proxy::base_distances(
            &labels,
            crate::proxy::ImageProxies {
                proxies: proxies.proxies,
                images_per_class: 1,
            },
        )
        .unwrap();
        let corpus = vec![labels.embeddings[1].clone()];
        assert!(inter_modal_candidates(&corpus, &proxies)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn deviation_is_surplus_sum() {
        let proxies = ProxySet {
            proxies: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            base_distances: vec![0.3, 0.4],
            images_per_class: 1,
        };
        let t = text("t", &[-0.6, -0.8]);
        let (d, dev) = evaluate_text(&t, &proxies).unwrap().unwrap();
        assert!((d[0] - 1.6).abs() < 1e-12 && (d[1] - 1.8).abs() < 1e-12);
        assert!((dev - (1.6 - 0.3 + 1.8 - 0.4)).abs() < 1e-10);

        // distances [0.5, 0.7] against bases [0.3, 0.4] -> deviation 0.5
        let c0: f64 = 0.5;
        let c1: f64 = 0.3;
        let v = [c0, (1.0 - c0 * c0).sqrt()];
        let theta = v[1].atan2(v[0]) - c1.acos();
        let proxies = ProxySet {
            proxies: vec![vec![1.0, 0.0], vec![theta.cos(), theta.sin()]],
            base_distances: vec![0.3, 0.4],
            images_per_class: 1,
        };
        let (d, dev) = evaluate_text(&text("t", &v), &proxies).unwrap().unwrap();
        assert!((d[0] - 0.5).abs() < 1e-12 && (d[1] - 0.7).abs() < 1e-12);
        assert!((dev - 0.5).abs() < 1e-10);
    }

    #[test]
    fn antipodal_text_gets_max_deviation() {
        let proxies = ProxySet {
            proxies: vec![vec![1.0, 0.0, 0.0], vec![0.6, 0.0, 0.0]],
            base_distances: vec![0.2, 1.1],
            images_per_class: 1,
        };
        let c = inter_modal_candidates(&[text("t", &[-1.0, 0.0, 0.0])], &proxies).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].distances, vec![2.0, 2.0]);
        assert!((c[0].deviation - (1.8 + 0.9)).abs() < 1e-12);
    }

    #[test]
    fn top_m_tie_break_and_bounds() {
        let cands = vec![cand(7, 0.5), cand(2, 0.9), cand(5, 0.9)];
        let top = select_top_m(cands.clone(), 2);
        assert_eq!(
            top.iter().map(|c| c.corpus_index).collect::<Vec<_>>(),
            vec![2, 5]
        );
        assert!(select_top_m(cands.clone(), 0).is_empty());
        let all = select_top_m(cands, 10);
        assert_eq!(
            all.iter().map(|c| c.corpus_index).collect::<Vec<_>>(),
            vec![2, 5, 7]
        );
    }

    #[test]
    fn quantile_oracle_two_elements() {
        // Interpolated quantile of a two-element set {lo, hi} is lo + p (hi - lo).
        let oracle = |a: f64, b: f64, p: f64| a.min(b) + p * (a.max(b) - a.min(b));
        let q1 = quantile(&[0.9, 0.9], 0.05);
        let q2 = quantile(&[0.9, 0.1], 0.05);
        assert!((q1 - oracle(0.9, 0.9, 0.05)).abs() < 1e-15);
        assert!((q2 - oracle(0.9, 0.1, 0.05)).abs() < 1e-15);
        assert!((q2 - 0.14).abs() < 1e-12);
        assert!(q1 > q2);
    }

    #[test]
    fn intra_baseline_ranks_label_copy_last() {
        let labels = LabelSet::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]).unwrap();
        let corpus = vec![
            labels.embeddings[0].clone(),
            text("a", &[0.0, 0.0, 1.0]),
            text("b", &[-1.0, -1.0, 0.2]),
        ];
        let set = intra_modal_baseline(&corpus, &labels, 3, 0.05).unwrap();
        assert_eq!(set.corpus_indices(), vec![2, 1, 0]);
        // distances {0, 1}: 0.05 quantile is 0.05
        assert!((set.entries[2].rank_key - 0.05).abs() < 1e-12);
    }

    #[test]
    fn intra_baseline_single_class_is_farthest_first() {
        let labels = LabelSet::from_rows(&[vec![1.0, 0.0]]).unwrap();
        let corpus = vec![
            text("a", &[1.0, 1.0]),
            text("b", &[-1.0, 0.1]),
            text("c", &[0.0, 1.0]),
        ];
        let set = intra_modal_baseline(&corpus, &labels, 2, 0.05).unwrap();
        assert_eq!(set.corpus_indices(), vec![1, 2]);
        assert!(matches!(
            intra_modal_baseline(&corpus, &labels, 2, 0.0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn intra_ranks_label_sets_by_quantile() {
        // Two texts whose distance sets to two labels are {0.9, 0.9} and
        // {0.9, 0.1}; labels at angle chosen so both are realizable.
        let labels = LabelSet::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]).unwrap();
        // cos = 0.1 to both labels
        let a = text("a", &[0.1, 0.1, (1.0f64 - 0.02).sqrt()]);
        // cos = 0.1 to label 0, 0.9 to label 1
        let b = text("b", &[0.1, 0.9, (1.0f64 - 0.82).sqrt()]);
        let ka = intra_modal_key(&a, &labels, 0.05).unwrap();
        let kb = intra_modal_key(&b, &labels, 0.05).unwrap();
        assert!((ka - 0.9).abs() < 1e-12);
        assert!((kb - 0.14).abs() < 1e-12);
        let set = intra_modal_baseline(&[b, a], &labels, 2, 0.05).unwrap();
        assert_eq!(set.corpus_indices(), vec![1, 0]);
    }

    proptest! {
        #[test]
        fn top_m_prefix_property(devs in prop::collection::vec(0.0f64..3.0, 0..40), m in 0usize..45) {
            let cands: Vec<Candidate> = devs.iter().enumerate().map(|(i, &d)| cand(i, d)).collect();
            let small = select_top_m(cands.clone(), m);
            let big = select_top_m(cands, m + 3);
            prop_assert_eq!(&big[..small.len()], &small[..]);
            for w in big.windows(2) {
                prop_assert!(w[0].deviation >= w[1].deviation);
            }
        }
    }
}
