//! Seeded synthetic embedding worlds with a controllable modality gap.
//!
//! Text anchors `t_i` are uniform on the sphere. Image clusters sit at
//! `m_i = normalize(alpha * t_i + (1 - alpha) * g)` for one global gap
//! direction `g`, so images of a class are further from their own label than
//! from each other. Trap texts are placed right on image clusters: far from
//! most label anchors in text space, but inter-modally closer to a class's
//! images than that class's own label is.
//!
//! Noise is Gaussian-perturb-then-normalize: `normalize(center + n / kappa)`
//! with `n ~ N(0, I)`. `kappa` is an inverse noise scale, not a von Mises-Fisher
//! concentration.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::normalize;
use crate::store::{EmbeddingFile, Manifest, RawSession, Roles, Session, Verdict};

/// Per-coordinate perturbation of near-OOD centers around an ID cluster.
pub const NEAR_OOD_SCALE: f64 = 0.1;

pub const LABELS_FILE: &str = "labels.emb";
pub const IMAGES_FILE: &str = "id_images.emb";
pub const CORPUS_FILE: &str = "corpus.emb";
pub const TEST_FILE: &str = "test.emb";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const WORLD_FILE: &str = "world.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OodMode {
    /// OOD clusters around fresh text anchors, unrelated to any ID class.
    Far,
    /// OOD clusters around perturbed ID image clusters.
    Near,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldSpec {
    pub dim: usize,
    pub classes: usize,
    pub images_per_class: usize,
    pub modality_gap: f64,
    pub concentration: f64,
    pub corpus_far: usize,
    pub corpus_trap: usize,
    pub trap_epsilon: f64,
    pub n_test_id: usize,
    pub n_test_ood: usize,
    pub ood_mode: OodMode,
    pub seed: u64,
}

impl WorldSpec {
    /// The reference fixture used by the acceptance suite.
    pub fn reference() -> Self {
        WorldSpec {
            dim: 64,
            classes: 10,
            images_per_class: 32,
            modality_gap: 0.6,
            concentration: 20.0,
            corpus_far: 200,
            corpus_trap: 50,
            trap_epsilon: 0.05,
            n_test_id: 1000,
            n_test_ood: 1000,
            ood_mode: OodMode::Far,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 4 {
            return Err(Error::Config(format!(
                "dim must be at least 4, got {}",
                self.dim
            )));
        }
        if self.classes == 0 || self.images_per_class == 0 {
            return Err(Error::Config(
                "classes and images_per_class must be at least 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.modality_gap) {
            return Err(Error::Config(format!(
                "modality_gap must be in [0, 1], got {}",
                self.modality_gap
            )));
        }
        if !(self.concentration > 0.0) || !(self.trap_epsilon > 0.0) {
            return Err(Error::Config(
                "concentration and trap_epsilon must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// A generated world: the raw session plus construction metadata.
#[derive(Debug, Clone)]
pub struct World {
    pub spec: WorldSpec,
    pub raw: RawSession,
    /// Corpus indices of trap texts, ascending.
    pub trap_indices: Vec<usize>,
    /// Class each trap sits on, aligned with `trap_indices`.
    pub trap_classes: Vec<usize>,
    /// ID class of each test sample, `None` for OOD.
    pub test_classes: Vec<Option<usize>>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct WorldMeta {
    pub spec: WorldSpec,
    pub trap_indices: Vec<usize>,
    pub trap_classes: Vec<usize>,
    pub test_classes: Vec<Option<usize>>,
}

struct Sampler {
    rng: ChaCha8Rng,
    dim: usize,
}

impl Sampler {
    fn gaussian(&mut self) -> Vec<f64> {
        (0..self.dim)
            .map(|_| StandardNormal.sample(&mut self.rng))
            .collect()
    }

    fn sphere(&mut self) -> Vec<f64> {
        loop {
            if let Ok(v) = normalize(&self.gaussian()) {
                return v;
            }
        }
    }

    /// `normalize(center + scale * n)`.
    fn around(&mut self, center: &[f64], scale: f64) -> Vec<f64> {
        loop {
            let n = self.gaussian();
            let v: Vec<f64> = center.iter().zip(&n).map(|(c, x)| c + scale * x).collect();
            if let Ok(v) = normalize(&v) {
                return v;
            }
        }
    }
}

fn blend(alpha: f64, t: &[f64], g: &[f64]) -> Vec<f64> {
    let v: Vec<f64> = t
        .iter()
        .zip(g)
        .map(|(a, b)| alpha * a + (1.0 - alpha) * b)
        .collect();
    normalize(&v).unwrap_or_else(|_| g.to_vec())
}

fn to_file(dim: usize, rows: &[Vec<f64>]) -> EmbeddingFile {
    EmbeddingFile::from_rows(dim, rows).expect("finite rows of matching dim")
}

pub fn generate(spec: &WorldSpec) -> Result<World> {
    spec.validate()?;
    let d = spec.dim;
    let alpha = spec.modality_gap;
    let noise = 1.0 / spec.concentration;
    let mut s = Sampler {
        rng: ChaCha8Rng::seed_from_u64(spec.seed),
        dim: d,
    };

    let anchors: Vec<Vec<f64>> = (0..spec.classes).map(|_| s.sphere()).collect();
    let gap = s.sphere();
    let centers: Vec<Vec<f64>> = anchors.iter().map(|t| blend(alpha, t, &gap)).collect();

    let mut images = Vec::with_capacity(spec.classes * spec.images_per_class);
    for m in &centers {
        for _ in 0..spec.images_per_class {
            images.push(s.around(m, noise));
        }
    }

    // corpus: (row, trap class)
    let mut corpus: Vec<(Vec<f64>, Option<usize>)> =
        Vec::with_capacity(spec.corpus_far + spec.corpus_trap);
    for _ in 0..spec.corpus_far {
        corpus.push((s.sphere(), None));
    }
    for _ in 0..spec.corpus_trap {
        let j = s.rng.random_range(0..spec.classes);
        corpus.push((s.around(&centers[j], spec.trap_epsilon), Some(j)));
    }
    corpus.shuffle(&mut s.rng);

    let ood_centers: Vec<Vec<f64>> = (0..spec.classes)
        .map(|k| match spec.ood_mode {
            OodMode::Far => {
                let fresh = s.sphere();
                blend(alpha, &fresh, &gap)
            }
            OodMode::Near => s.around(&centers[k], NEAR_OOD_SCALE),
        })
        .collect();

    let mut test: Vec<(Vec<f64>, Option<usize>)> =
        Vec::with_capacity(spec.n_test_id + spec.n_test_ood);
    for _ in 0..spec.n_test_id {
        let j = s.rng.random_range(0..spec.classes);
        test.push((s.around(&centers[j], noise), Some(j)));
    }
    for _ in 0..spec.n_test_ood {
        let k = s.rng.random_range(0..spec.classes);
        test.push((s.around(&ood_centers[k], noise), None));
    }
    test.shuffle(&mut s.rng);

    let mut trap_indices = Vec::new();
    let mut trap_classes = Vec::new();
    for (k, (_, cls)) in corpus.iter().enumerate() {
        if let Some(j) = cls {
            trap_indices.push(k);
            trap_classes.push(*j);
        }
    }
    let corpus_rows: Vec<Vec<f64>> = corpus.into_iter().map(|(r, _)| r).collect();
    let test_classes: Vec<Option<usize>> = test.iter().map(|(_, c)| *c).collect();
    let ground_truth = test_classes
        .iter()
        .map(|c| {
            if c.is_some() {
                Verdict::Id
            } else {
                Verdict::Ood
            }
        })
        .collect();
    let test_rows: Vec<Vec<f64>> = test.into_iter().map(|(r, _)| r).collect();

    let raw = RawSession {
        class_names: (0..spec.classes).map(|i| format!("class{i:03}")).collect(),
        per_class_counts: vec![spec.images_per_class; spec.classes],
        id_labels: to_file(d, &anchors),
        id_images: to_file(d, &images),
        corpus_texts: to_file(d, &corpus_rows),
        test_images: to_file(d, &test_rows),
        test_ground_truth: Some(ground_truth),
    };
    Ok(World {
        spec: *spec,
        raw,
        trap_indices,
        trap_classes,
        test_classes,
    })
}

impl World {
    /// The session exactly as `store::load` would produce it from the files
    /// this world writes.
    pub fn session(&self) -> Result<Session> {
        self.raw.clone().into_session(self.spec.dim)
    }

    pub fn manifest(&self) -> Manifest {
        Manifest {
            dim: self.spec.dim,
            roles: Roles {
                id_labels: Some(LABELS_FILE.into()),
                id_images: Some(IMAGES_FILE.into()),
                corpus_texts: Some(CORPUS_FILE.into()),
                test_images: Some(TEST_FILE.into()),
            },
            class_names: self.raw.class_names.clone(),
            per_class_counts: self.raw.per_class_counts.clone(),
            test_ground_truth: self.raw.test_ground_truth.clone(),
        }
    }

    /// Writes the four `EMB1` files, `manifest.json` and `world.json` into
    /// `dir`, creating it if needed.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.raw.id_labels.write(dir.join(LABELS_FILE))?;
        self.raw.id_images.write(dir.join(IMAGES_FILE))?;
        self.raw.corpus_texts.write(dir.join(CORPUS_FILE))?;
        self.raw.test_images.write(dir.join(TEST_FILE))?;
        self.manifest().write(dir.join(MANIFEST_FILE))?;
        let meta = WorldMeta {
            spec: self.spec,
            trap_indices: self.trap_indices.clone(),
            trap_classes: self.trap_classes.clone(),
            test_classes: self.test_classes.clone(),
        };
        let path = dir.join(WORLD_FILE);
        let mut text = serde_json::to_string_pretty(&meta)?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| Error::io(path, e))
    }
}

pub fn read_meta(dir: impl AsRef<Path>) -> Result<WorldMeta> {
    let path = dir.as_ref().join(WORLD_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format {
        path,
        reason: e.to_string(),
    })
}
