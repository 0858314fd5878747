//! Class-wise ID image proxies and the per-class inter-modal base distance.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{inter_modal_distance, Embedding, Modality};
use crate::store::{write_rows, write_sidecar, LabelSet};

/// Default number of ID images sampled per class.
pub const DEFAULT_SAMPLE_N: usize = 16;

/// Raw per-class mean image embeddings. Proxies are not re-normalized, so
/// anything comparing them by raw distance must not assume unit length.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageProxies {
    pub proxies: Vec<Vec<f64>>,
    pub images_per_class: usize,
}

/// Proxies together with `d_base[i] = 1 - cos(e_i, p_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxySet {
    pub proxies: Vec<Vec<f64>>,
    pub base_distances: Vec<f64>,
    pub images_per_class: usize,
}

fn class_rng(seed: u64, class: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(class as u64);
    rng
}

/// Samples `min(sample_n, available)` images per class without replacement
/// and averages them.
pub fn build_proxies(
    images: &[Vec<Embedding>],
    sample_n: usize,
    seed: u64,
) -> Result<ImageProxies> {
    if sample_n == 0 {
        return Err(Error::Config("sample_n must be at least 1".into()));
    }
    let mut proxies = Vec::with_capacity(images.len());
    for (class, imgs) in images.iter().enumerate() {
        let first = imgs.first().ok_or(Error::EmptyClass(class))?;
        let dim = first.dim();
        for img in imgs {
            img.expect_modality(Modality::Image)?;
            if img.dim() != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    found: img.dim(),
                });
            }
        }
        let take = sample_n.min(imgs.len());
        if take < sample_n {
            log::warn!(
                "class {class} has {} images, fewer than sample_n = {sample_n}; using all",
                imgs.len()
            );
        }
        let mut chosen =
            rand::seq::index::sample(&mut class_rng(seed, class), imgs.len(), take).into_vec();
        chosen.sort_unstable();

        let mut mean = vec![0.0; dim];
        for &k in &chosen {
            for (m, x) in mean.iter_mut().zip(imgs[k].values()) {
                *m += x;
            }
        }
        let n = take as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        proxies.push(mean);
    }
    Ok(ImageProxies {
        proxies,
        images_per_class: sample_n,
    })
}

/// Completes a proxy set with base distances against `labels`.
pub fn base_distances(labels: &LabelSet, proxies: ImageProxies) -> Result<ProxySet> {
    if labels.len() != proxies.proxies.len() {
        return Err(Error::CountMismatch(format!(
            "{} labels but {} proxies",
            labels.len(),
            proxies.proxies.len()
        )));
    }
    let base_distances = labels
        .embeddings
        .iter()
        .zip(&proxies.proxies)
        .map(|(e, p)| {
            if e.dim() != p.len() {
                return Err(Error::DimMismatch {
                    expected: e.dim(),
                    found: p.len(),
                });
            }
            inter_modal_distance(e, p)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ProxySet {
        proxies: proxies.proxies,
        base_distances,
        images_per_class: proxies.images_per_class,
    })
}

impl ProxySet {
    pub fn build(
        labels: &LabelSet,
        images: &[Vec<Embedding>],
        sample_n: usize,
        seed: u64,
    ) -> Result<Self> {
        base_distances(labels, build_proxies(images, sample_n, seed)?)
    }

    pub fn num_classes(&self) -> usize {
        self.proxies.len()
    }

    pub fn dim(&self) -> usize {
        self.proxies.first().map_or(0, Vec::len)
    }

    /// Writes proxies as `EMB1` and base distances one per line to
    /// `sidecar`.
    pub fn export(&self, emb: impl AsRef<Path>, sidecar: impl AsRef<Path>) -> Result<()> {
        write_rows(emb, self.dim(), &self.proxies)?;
        write_sidecar(
            sidecar,
            self.base_distances.iter().map(|d| format!("{d:?}")),
        )
    }
}
