//! Out-of-distribution detection with inter-modal negative labels.
//!
//! The pipeline works on precomputed embeddings:
//!
//! 1. [`proxy`] averages a few ID images per class into image proxies and
//!    measures each class's label-to-proxy base distance.
//! 2. [`selection`] keeps corpus texts whose distance to every proxy exceeds
//!    that class's base distance, ranked by total surplus.
//! 3. [`scorer`] scores test images against ID labels, selected negatives and
//!    a dynamic pool of extra negatives.
//! 4. [`pool`] grows that pool online by inverting confidently-OOD images into
//!    text embeddings ([`inversion`]) and filtering them the same way.
//! 5. [`metrics`] reports AUROC, FPR95 and the ID error taxonomy.
//!
//! [`synth`] builds seeded worlds for desk-scale experiments, [`store`] reads
//! and writes the `EMB1` format, and [`pipeline`] wires everything together
//! behind the `interneg` binary.

pub mod error;
pub mod geometry;
pub mod inversion;
pub mod metrics;
pub mod pipeline;
pub mod pool;
pub mod proxy;
pub mod scorer;
pub mod selection;
pub mod store;
pub mod synth;

pub use error::{Error, Result};
pub use geometry::{cosine, inter_modal_distance, normalize, Embedding, Modality};
pub use inversion::{invert, InversionConfig, ToyEncoder};
pub use metrics::{auroc, fpr_at_tpr, taxonomy, EvalResult};
pub use pool::{process_stream, DynamicPool, PoolConfig, StreamContext};
pub use proxy::ProxySet;
pub use scorer::{classify, detect, score, ScoreRecord, ScorerConfig};
pub use selection::{NegativeSet, SelectionConfig, SelectionMode};
pub use store::{load, EmbeddingFile, LabelSet, Manifest, Session, Verdict};
pub use synth::{generate, OodMode, World, WorldSpec};
