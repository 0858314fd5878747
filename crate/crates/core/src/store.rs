//! The `EMB1` embedding file format and manifest-driven session loading.
//!
//! Layout, little-endian throughout:
//!
//! ```text
//! offset 0   magic  "EMB1"  (0x45 0x4D 0x42 0x31)
//! offset 4   dim    u32
//! offset 8   count  u64
//! offset 16  rows   count * dim * f32
//! ```
//!
//! Rows are stored raw; normalization happens when a session is loaded.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Embedding, Modality};

pub const MAGIC: [u8; 4] = *b"EMB1";
pub const HEADER_LEN: usize = 16;

/// Raw contents of an `EMB1` file.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingFile {
    dim: u32,
    data: Vec<f32>,
}

impl EmbeddingFile {
    pub fn new(dim: u32) -> Self {
        EmbeddingFile {
            dim,
            data: Vec::new(),
        }
    }

    /// Builds a file from rows, narrowing each value to `f32`.
    pub fn from_rows<R: AsRef<[f64]>>(dim: usize, rows: &[R]) -> Result<Self> {
        let mut file = EmbeddingFile::new(dim as u32);
        for row in rows {
            file.push_row(row.as_ref())?;
        }
        Ok(file)
    }

    pub fn push_row(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.dim as usize {
            return Err(Error::DimMismatch {
                expected: self.dim as usize,
                found: row.len(),
            });
        }
        if row.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        self.data.extend(row.iter().map(|&x| x as f32));
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn count(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.data.len() / self.dim as usize
        }
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.dim.max(1) as usize)
    }

    pub fn row(&self, k: usize) -> &[f32] {
        let d = self.dim as usize;
        &self.data[k * d..(k + 1) * d]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.data.len() * 4);
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&self.dim.to_le_bytes());
        out.extend_from_slice(&(self.count() as u64).to_le_bytes());
        for x in &self.data {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let bad = |reason: String| Error::Format {
            path: path.to_path_buf(),
            reason,
        };
        if bytes.len() < HEADER_LEN {
            return Err(bad(format!(
                "{} bytes is shorter than the header",
                bytes.len()
            )));
        }
        if bytes[..4] != MAGIC {
            return Err(bad(format!("bad magic {:02x?}", &bytes[..4])));
        }
        let dim = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        let count = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
        let expected = (count as u128) * (dim as u128) * 4 + HEADER_LEN as u128;
        if expected != bytes.len() as u128 {
            return Err(bad(format!(
                "size {} does not match 16 + {count}*{dim}*4 = {expected}",
                bytes.len()
            )));
        }
        let data = bytes[HEADER_LEN..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(EmbeddingFile { dim, data })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }
}

/// Writes `rows` as an `EMB1` file.
pub fn write_rows<R: AsRef<[f64]>>(path: impl AsRef<Path>, dim: usize, rows: &[R]) -> Result<()> {
    EmbeddingFile::from_rows(dim, rows)?.write(path)
}

/// Writes one real per line, formatted with `{:?}` (shortest round-trip repr).
pub fn write_sidecar(
    path: impl AsRef<Path>,
    lines: impl IntoIterator<Item = String>,
) -> Result<()> {
    let path = path.as_ref();
    let mut text = String::new();
    for line in lines {
        text.push_str(&line);
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "ID")]
    Id,
    #[serde(rename = "OOD")]
    Ood,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Roles {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub id_labels: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub id_images: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub corpus_texts: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub test_images: Option<PathBuf>,
}

/// JSON manifest naming the files of one embedding session. Relative paths
/// resolve against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub dim: usize,
    pub roles: Roles,
    pub class_names: Vec<String>,
    pub per_class_counts: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub test_ground_truth: Option<Vec<Verdict>>,
}

impl Manifest {
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// ID label embeddings in class order.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelSet {
    pub class_names: Vec<String>,
    pub embeddings: Vec<Embedding>,
}

impl LabelSet {
    pub fn new(class_names: Vec<String>, embeddings: Vec<Embedding>) -> Result<Self> {
        if class_names.is_empty() {
            return Err(Error::CountMismatch("label set has no classes".into()));
        }
        if class_names.len() != embeddings.len() {
            return Err(Error::CountMismatch(format!(
                "{} class names but {} label embeddings",
                class_names.len(),
                embeddings.len()
            )));
        }
        if let Some(e) = embeddings.iter().find(|e| e.modality != Modality::Text) {
            e.expect_modality(Modality::Text)?;
        }
        let dim = embeddings[0].dim();
        if let Some(e) = embeddings.iter().find(|e| e.dim() != dim) {
            return Err(Error::DimMismatch {
                expected: dim,
                found: e.dim(),
            });
        }
        Ok(LabelSet {
            class_names,
            embeddings,
        })
    }

    /// Labels named `class{i}` from raw vectors.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let names: Vec<String> = (0..rows.len()).map(|i| format!("class{i}")).collect();
        let embs = rows
            .iter()
            .zip(&names)
            .map(|(r, n)| Embedding::text(n.clone(), r.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        LabelSet::new(names, embs)
    }

    pub fn len(&self) -> usize {
        self.embeddings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.embeddings.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.embeddings[0].dim()
    }
}

/// Everything a pipeline run needs, loaded and normalized.
#[derive(Debug, Clone)]
pub struct Session {
    pub dim: usize,
    pub labels: LabelSet,
    /// ID images grouped by class.
    pub id_images: Vec<Vec<Embedding>>,
    pub corpus: Vec<Embedding>,
    pub test: Vec<Embedding>,
    pub ground_truth: Option<Vec<Verdict>>,
}

/// Raw (un-normalized) role contents, the common input of file loading and
/// in-memory world construction.
#[derive(Debug, Clone)]
pub struct RawSession {
    pub class_names: Vec<String>,
    pub per_class_counts: Vec<usize>,
    pub id_labels: EmbeddingFile,
    pub id_images: EmbeddingFile,
    pub corpus_texts: EmbeddingFile,
    pub test_images: EmbeddingFile,
    pub test_ground_truth: Option<Vec<Verdict>>,
}

fn embed_rows(
    file: &EmbeddingFile,
    role: &str,
    modality: Modality,
    id: impl Fn(usize) -> String,
) -> Result<Vec<Embedding>> {
    file.rows()
        .take(file.count())
        .enumerate()
        .map(|(k, row)| {
            let wide: Vec<f64> = row.iter().map(|&x| f64::from(x)).collect();
            Embedding::new(id(k), modality, &wide).map_err(|e| match e {
                Error::ZeroVector => Error::ZeroRow {
                    role: role.to_string(),
                    row: k,
                },
                Error::NonFinite => Error::NonFiniteRow {
                    role: role.to_string(),
                    row: k,
                },
                other => other,
            })
        })
        .collect()
}

impl RawSession {
    pub fn into_session(self, dim: usize) -> Result<Session> {
        if dim < 2 {
            return Err(Error::Config(format!("dim must be at least 2, got {dim}")));
        }
        for file in [
            &self.id_labels,
            &self.id_images,
            &self.corpus_texts,
            &self.test_images,
        ] {
            if file.dim() != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    found: file.dim(),
                });
            }
        }
        let c = self.class_names.len();
        if c == 0 {
            return Err(Error::CountMismatch("class_names is empty".into()));
        }
        if self.id_labels.count() != c {
            return Err(Error::CountMismatch(format!(
                "{c} class names but {} id_labels rows",
                self.id_labels.count()
            )));
        }
        if self.per_class_counts.len() != c {
            return Err(Error::CountMismatch(format!(
                "{c} class names but {} per_class_counts",
                self.per_class_counts.len()
            )));
        }
        if let Some(i) = self.per_class_counts.iter().position(|&n| n == 0) {
            return Err(Error::EmptyClass(i));
        }
        let total: usize = self.per_class_counts.iter().sum();
        if total != self.id_images.count() {
            return Err(Error::CountMismatch(format!(
                "per_class_counts sum to {total} but id_images has {} rows",
                self.id_images.count()
            )));
        }
        if let Some(gt) = &self.test_ground_truth {
            if gt.len() != self.test_images.count() {
                return Err(Error::CountMismatch(format!(
                    "test_ground_truth has {} flags but test_images has {} rows",
                    gt.len(),
                    self.test_images.count()
                )));
            }
        }

        let labels = embed_rows(&self.id_labels, "id_labels", Modality::Text, |k| {
            self.class_names[k].clone()
        })?;
        let labels = LabelSet::new(self.class_names.clone(), labels)?;

        let flat = embed_rows(&self.id_images, "id_images", Modality::Image, |k| {
            format!("image:{k}")
        })?;
        let mut id_images = Vec::with_capacity(c);
        let mut rest = flat.into_iter();
        for &n in &self.per_class_counts {
            id_images.push(rest.by_ref().take(n).collect());
        }

        let corpus = embed_rows(&self.corpus_texts, "corpus_texts", Modality::Text, |k| {
            format!("corpus:{k:06}")
        })?;
        let test = embed_rows(&self.test_images, "test_images", Modality::Image, |k| {
            format!("test:{k:06}")
        })?;

        Ok(Session {
            dim,
            labels,
            id_images,
            corpus,
            test,
            ground_truth: self.test_ground_truth,
        })
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Loads a session from a manifest path.
pub fn load(manifest_path: impl AsRef<Path>) -> Result<Session> {
    let manifest_path = manifest_path.as_ref();
    let manifest = Manifest::read(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let role = |name: &str, p: &Option<PathBuf>| -> Result<EmbeddingFile> {
        let p = p
            .as_ref()
            .ok_or_else(|| Error::MissingRole(name.to_string()))?;
        EmbeddingFile::read(resolve(base, p))
    };
    let raw = RawSession {
        class_names: manifest.class_names.clone(),
        per_class_counts: manifest.per_class_counts.clone(),
        id_labels: role("id_labels", &manifest.roles.id_labels)?,
        id_images: role("id_images", &manifest.roles.id_images)?,
        corpus_texts: role("corpus_texts", &manifest.roles.corpus_texts)?,
        test_images: role("test_images", &manifest.roles.test_images)?,
        test_ground_truth: manifest.test_ground_truth.clone(),
    };
    raw.into_session(manifest.dim)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_row_encoding() {
        let file = EmbeddingFile::from_rows(2, &[vec![1.0, 0.0]]).unwrap();
        let bytes = file.to_bytes();
        assert_eq!(bytes.len(), 24);
        assert_eq!(&bytes[..4], b"EMB1");
        assert_eq!(&bytes[4..8], &[2, 0, 0, 0]);
        assert_eq!(&bytes[8..16], &[1, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(
            &bytes[16..],
            &[0x00, 0x00, 0x80, 0x3F, 0x00, 0x00, 0x00, 0x00]
        );
    }

    #[test]
    fn empty_file_is_header_only() {
        let file = EmbeddingFile::from_rows::<Vec<f64>>(8, &[]).unwrap();
        let bytes = file.to_bytes();
        assert_eq!(bytes.len(), 16);
        let back = EmbeddingFile::from_bytes(&bytes, Path::new("x")).unwrap();
        assert_eq!(back.count(), 0);
        assert_eq!(back.dim(), 8);
    }

    #[test]
    fn rejects_bad_magic_and_size() {
        let mut bytes = EmbeddingFile::from_rows(2, &[vec![1.0, 0.0]])
            .unwrap()
            .to_bytes();
        let p = Path::new("f.emb");
        assert!(matches!(
            EmbeddingFile::from_bytes(&bytes[..23], p),
            Err(Error::Format { .. })
        ));
        bytes.push(0);
        assert!(matches!(
            EmbeddingFile::from_bytes(&bytes, p),
            Err(Error::Format { .. })
        ));
        bytes.pop();
        bytes[0] = b'X';
        assert!(matches!(
            EmbeddingFile::from_bytes(&bytes, p),
            Err(Error::Format { .. })
        ));
        assert!(matches!(
            EmbeddingFile::from_bytes(&[0; 5], p),
            Err(Error::Format { .. })
        ));
    }

    #[test]
    fn push_row_checks_dim() {
        let mut f = EmbeddingFile::new(3);
        assert!(matches!(
            f.push_row(&[1.0, 2.0]),
            Err(Error::DimMismatch { .. })
        ));
        assert!(matches!(
            f.push_row(&[1.0, 2.0, f64::NAN]),
            Err(Error::NonFinite)
        ));
    }

    proptest! {
        #[test]
        fn write_read_write_is_byte_identical(
            rows in prop::collection::vec(prop::collection::vec(-100.0f64..100.0, 5), 0..40)
        ) {
            let file = EmbeddingFile::from_rows(5, &rows).unwrap();
            let bytes = file.to_bytes();
            let back = EmbeddingFile::from_bytes(&bytes, Path::new("p")).unwrap();
            prop_assert_eq!(back.count(), rows.len());
            for (k, row) in rows.iter().enumerate() {
                let narrowed: Vec<f32> = row.iter().map(|&x| x as f32).collect();
                prop_assert_eq!(back.row(k), &narrowed[..]);
            }
            prop_assert_eq!(back.to_bytes(), bytes);
        }
    }
}
