//! End-to-end runs: selection, scoring (batch or streaming), evaluation and
//! the imbalance sweep. Everything here is deterministic given the resolved
//! [`RunConfig`], which every report echoes.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Embedding, Modality};
use crate::inversion::{InversionConfig, ToyEncoder};
use crate::metrics::{evaluate, gamma_grid, EvalResult, TaxonomyPoint};
use crate::pool::{process_stream, score_batch, DynamicPool, PoolConfig, StepTrace, StreamContext};
use crate::proxy::{ProxySet, DEFAULT_SAMPLE_N};
use crate::scorer::{ScoreRecord, ScorerConfig, DEFAULT_TEMPERATURE};
use crate::selection::{
    select, NegativeSet, SelectedNegative, SelectionConfig, SelectionMode, DEFAULT_M,
};
use crate::store::{load, EmbeddingFile, Session, Verdict};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderKind {
    /// Identity projection, no template rows.
    Identity,
    /// Seeded Gaussian projection with `prefix_len` template rows.
    Seeded,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncoderConfig {
    pub kind: EncoderKind,
    /// Pseudo-token width; `None` uses the embedding dimension.
    pub token_dim: Option<usize>,
    pub prefix_len: usize,
    pub seed: u64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            kind: EncoderKind::Seeded,
            token_dim: None,
            prefix_len: 3,
            seed: 0,
        }
    }
}

impl EncoderConfig {
    pub fn build(&self, dim: usize, prefix_weight: f64) -> Result<ToyEncoder> {
        match self.kind {
            EncoderKind::Identity => Ok(ToyEncoder::identity(dim)),
            EncoderKind::Seeded => ToyEncoder::seeded(
                self.token_dim.unwrap_or(dim),
                dim,
                self.prefix_len,
                prefix_weight,
                self.seed,
            ),
        }
    }
}

/// Fully resolved run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub manifest: PathBuf,
    pub mode: SelectionMode,
    pub m: usize,
    pub intra_percentile: f64,
    pub sample_n: usize,
    pub tau: f64,
    pub beta: f64,
    pub capacity: usize,
    pub stream: bool,
    pub inversion: InversionConfig,
    pub encoder: EncoderConfig,
    pub gammas: Vec<f64>,
    /// Seeds proxy sampling and imbalance subsampling.
    pub seed: u64,
    /// Shuffles the test stream before scoring when set.
    pub permutation_seed: Option<u64>,
    /// Previously exported selection to use instead of selecting afresh.
    pub negatives: Option<PathBuf>,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            manifest: PathBuf::from("manifest.json"),
            mode: SelectionMode::InterModal,
            m: DEFAULT_M,
            intra_percentile: crate::selection::DEFAULT_INTRA_PERCENTILE,
            sample_n: DEFAULT_SAMPLE_N,
            tau: DEFAULT_TEMPERATURE,
            beta: crate::pool::DEFAULT_BETA,
            capacity: crate::pool::DEFAULT_CAPACITY,
            stream: false,
            inversion: InversionConfig::default(),
            encoder: EncoderConfig::default(),
            gammas: gamma_grid(21),
            seed: 0,
            permutation_seed: None,
            negatives: None,
            out: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    /// Settings calibrated for [`crate::synth::WorldSpec::reference`]. Only
    /// the temperature departs from the defaults: with ten classes and a
    /// couple of hundred corpus texts, `tau = 1` squeezes every score towards
    /// `C / (C + M)`, far below `beta`.
    pub fn reference_fixture() -> Self {
        RunConfig {
            tau: REFERENCE_TAU,
            stream: true,
            ..RunConfig::default()
        }
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn selection(&self) -> SelectionConfig {
        SelectionConfig {
            m: self.m,
            mode: self.mode,
            intra_percentile: self.intra_percentile,
        }
    }

    pub fn scorer(&self) -> ScorerConfig {
        ScorerConfig {
            temperature: self.tau,
            threshold: self.beta,
        }
    }

    pub fn pool(&self) -> PoolConfig {
        PoolConfig {
            beta: self.beta,
            capacity: self.capacity,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scorer().validate()?;
        self.pool().validate()?;
        self.inversion.validate()?;
        if self.sample_n == 0 {
            return Err(Error::Config("sample_n must be at least 1".into()));
        }
        if !(self.intra_percentile > 0.0 && self.intra_percentile <= 1.0) {
            return Err(Error::Config("intra_percentile must be in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Temperature of the reference fixture profile.
pub const REFERENCE_TAU: f64 = 0.05;

/// Proxies and the static negative set for one session.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub proxies: ProxySet,
    pub negatives: NegativeSet,
}

pub fn prepare(config: &RunConfig, session: &Session) -> Result<Prepared> {
    config.validate()?;
    let proxies = ProxySet::build(
        &session.labels,
        &session.id_images,
        config.sample_n,
        config.seed,
    )?;
    let negatives = match &config.negatives {
        Some(path) => read_negatives(path)?,
        None => select(
            &session.corpus,
            &session.labels,
            &proxies,
            &config.selection(),
        )?,
    };
    Ok(Prepared { proxies, negatives })
}

fn sidecar_path(emb: &Path) -> PathBuf {
    emb.with_extension("tsv")
}

/// Reads a selection exported by [`write_selection`]: the `EMB1` rows plus
/// the `.tsv` sidecar next to it.
pub fn read_negatives(path: &Path) -> Result<NegativeSet> {
    let file = EmbeddingFile::read(path)?;
    let side = sidecar_path(path);
    let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let lines: Vec<&str> = text.lines().filter(|l| !l.is_empty()).collect();
    if lines.len() != file.count() {
        return Err(Error::CountMismatch(format!(
            "{} has {} rows but {} has {} lines",
            path.display(),
            file.count(),
            side.display(),
            lines.len()
        )));
    }
    let bad = |reason: String| Error::Format {
        path: side.clone(),
        reason,
    };
    let mut entries = Vec::with_capacity(lines.len());
    for (k, line) in lines.iter().enumerate() {
        let (idx, key) = line
            .split_once('\t')
            .ok_or_else(|| bad(format!("line {k}: expected two fields")))?;
        let corpus_index: usize = idx
            .parse()
            .map_err(|_| bad(format!("line {k}: bad index")))?;
        let rank_key: f64 = key
            .parse()
            .map_err(|_| bad(format!("line {k}: bad value")))?;
        let wide: Vec<f64> = file.row(k).iter().map(|&x| f64::from(x)).collect();
        let embedding = Embedding::new(format!("corpus:{corpus_index:06}"), Modality::Text, &wide)?;
        entries.push(SelectedNegative {
            embedding,
            corpus_index,
            rank_key,
        });
    }
    Ok(NegativeSet { entries })
}

pub fn write_selection(dim: usize, negatives: &NegativeSet, emb: &Path) -> Result<()> {
    negatives.export(dim, emb, sidecar_path(emb))
}

/// Scores of a test stream, in the original (unpermuted) sample order.
#[derive(Debug, Clone)]
pub struct Scored {
    pub records: Vec<ScoreRecord>,
    pub trace: Vec<StepTrace>,
    pub pool: Option<DynamicPool>,
}

/// Stream order for `n` samples.
pub fn stream_order(n: usize, permutation_seed: Option<u64>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    if let Some(seed) = permutation_seed {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    order
}

/// Scores `test` in stream order, with or without the dynamic pool, and
/// returns records aligned with `test`.
pub fn score_test(
    config: &RunConfig,
    session: &Session,
    prepared: &Prepared,
    test: &[Embedding],
) -> Result<Scored> {
    let negatives = prepared.negatives.embeddings();
    let order = stream_order(test.len(), config.permutation_seed);
    let stream: Vec<Embedding> = order.iter().map(|&k| test[k].clone()).collect();

    let (stream_records, trace, pool) = if config.stream {
        let encoder = config
            .encoder
            .build(session.dim, config.inversion.prefix_weight)?;
        let ctx = StreamContext {
            labels: &session.labels,
            negatives: &negatives,
            proxies: &prepared.proxies,
            scorer: config.scorer(),
            pool: config.pool(),
            encoder: &encoder,
            inversion: config.inversion,
        };
        let out = process_stream(&stream, &ctx)?;
        (out.records, out.trace, Some(out.pool))
    } else {
        (
            score_batch(&stream, &session.labels, &negatives, &config.scorer())?,
            Vec::new(),
            None,
        )
    };

    let mut records = vec![None; test.len()];
    for (rec, &k) in stream_records.into_iter().zip(&order) {
        records[k] = Some(rec);
    }
    Ok(Scored {
        records: records
            .into_iter()
            .map(|r| r.expect("every sample scored"))
            .collect(),
        trace,
        pool,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seeds {
    pub proxy_sampling: u64,
    pub inversion: u64,
    pub encoder: u64,
    pub permutation: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamStats {
    pub triggered: usize,
    pub admitted: usize,
    pub evicted: usize,
    pub final_pool: usize,
    pub max_pool: usize,
}

/// The report document written by `eval` and `imbalance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub dataset: String,
    pub n_id: usize,
    pub n_ood: usize,
    pub auroc: f64,
    pub fpr95: f64,
    pub selected_negatives: usize,
    pub taxonomy_curve: Vec<TaxonomyPoint>,
    pub stream: Option<StreamStats>,
    pub config: RunConfig,
    pub seeds: Seeds,
}

impl Report {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// One header line and one value line.
    pub fn to_csv(&self) -> String {
        format!(
            "dataset,n_id,n_ood,auroc,fpr95,selected_negatives\n{},{},{},{:?},{:?},{}\n",
            self.dataset, self.n_id, self.n_ood, self.auroc, self.fpr95, self.selected_negatives
        )
    }

    pub fn eval(&self) -> EvalResult {
        EvalResult {
            auroc: self.auroc,
            fpr95: self.fpr95,
            n_id: self.n_id,
            n_ood: self.n_ood,
            taxonomy_curve: self.taxonomy_curve.clone(),
        }
    }
}

/// Full outcome of an evaluation, report plus the raw per-sample data.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: Report,
    pub scored: Scored,
    pub prepared: Prepared,
}

fn ground_truth(session: &Session) -> Result<&[Verdict]> {
    session
        .ground_truth
        .as_deref()
        .ok_or_else(|| Error::MissingRole("test_ground_truth".into()))
}

fn evaluate_indices(
    config: &RunConfig,
    session: &Session,
    prepared: &Prepared,
    indices: &[usize],
    dataset: &str,
) -> Result<Evaluation> {
    let truth = ground_truth(session)?;
    let test: Vec<Embedding> = indices.iter().map(|&k| session.test[k].clone()).collect();
    let scored = score_test(config, session, prepared, &test)?;
    let (mut id, mut ood) = (Vec::new(), Vec::new());
    for (rec, &k) in scored.records.iter().zip(indices) {
        match truth[k] {
            Verdict::Id => id.push(rec.clone()),
            Verdict::Ood => ood.push(rec.clone()),
        }
    }
    let result = evaluate(&id, &ood, &config.gammas)?;
    let stream = scored.pool.as_ref().map(|pool| StreamStats {
        triggered: scored.trace.iter().filter(|t| t.triggered).count(),
        admitted: scored.trace.iter().filter(|t| t.admitted).count(),
        evicted: pool.evicted(),
        final_pool: pool.len(),
        max_pool: scored.trace.iter().map(|t| t.pool_len).max().unwrap_or(0),
    });
    let report = Report {
        dataset: dataset.to_string(),
        n_id: result.n_id,
        n_ood: result.n_ood,
        auroc: result.auroc,
        fpr95: result.fpr95,
        selected_negatives: prepared.negatives.len(),
        taxonomy_curve: result.taxonomy_curve,
        stream,
        config: config.clone(),
        seeds: Seeds {
            proxy_sampling: config.seed,
            inversion: config.inversion.seed,
            encoder: config.encoder.seed,
            permutation: config.permutation_seed,
        },
    };
    Ok(Evaluation {
        report,
        scored,
        prepared: prepared.clone(),
    })
}

/// Evaluates an in-memory session over its whole test split.
pub fn evaluate_session(
    config: &RunConfig,
    session: &Session,
    dataset: &str,
) -> Result<Evaluation> {
    let prepared = prepare(config, session)?;
    let all: Vec<usize> = (0..session.test.len()).collect();
    evaluate_indices(config, session, &prepared, &all, dataset)
}

/// An ID:OOD ratio such as `10:1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ratio {
    pub id: usize,
    pub ood: usize,
}

impl Ratio {
    pub const fn new(id: usize, ood: usize) -> Self {
        Ratio { id, ood }
    }

    /// The sweep `1:100, 1:10, 1:1, 10:1, 100:1, 1000:1`.
    pub fn standard() -> Vec<Ratio> {
        vec![
            Ratio::new(1, 100),
            Ratio::new(1, 10),
            Ratio::new(1, 1),
            Ratio::new(10, 1),
            Ratio::new(100, 1),
            Ratio::new(1000, 1),
        ]
    }

    pub fn file_stem(&self) -> String {
        format!("{}to{}", self.id, self.ood)
    }

    /// Largest `(n_id, n_ood)` in this ratio that fits the available counts.
    pub fn sizes(&self, available_id: usize, available_ood: usize) -> Result<(usize, usize)> {
        let k = (available_id / self.id).min(available_ood / self.ood);
        if k == 0 {
            return Err(Error::InsufficientSamples {
                ratio: self.to_string(),
                reason: format!(
                    "needs at least {} ID and {} OOD, have {available_id} and {available_ood}",
                    self.id, self.ood
                ),
            });
        }
        Ok((k * self.id, k * self.ood))
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(&format!("{}:{}", self.id, self.ood))
    }
}

impl FromStr for Ratio {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("ratio must look like ID:OOD, got `{s}`"));
        let (a, b) = s.split_once(':').ok_or_else(bad)?;
        let id: usize = a.trim().parse().map_err(|_| bad())?;
        let ood: usize = b.trim().parse().map_err(|_| bad())?;
        if id == 0 || ood == 0 {
            return Err(bad());
        }
        Ok(Ratio { id, ood })
    }
}

/// Test indices for one ratio: seeded subsamples of each side, merged back
/// in original order. Taking every sample of both sides returns `0..n`.
pub fn ratio_indices(truth: &[Verdict], ratio: Ratio, seed: u64) -> Result<Vec<usize>> {
    let ids: Vec<usize> = (0..truth.len())
        .filter(|&k| truth[k] == Verdict::Id)
        .collect();
    let oods: Vec<usize> = (0..truth.len())
        .filter(|&k| truth[k] == Verdict::Ood)
        .collect();
    let (n_id, n_ood) = ratio.sizes(ids.len(), oods.len())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pick = |pool: &[usize], n: usize| -> Vec<usize> {
        let mut chosen: Vec<usize> = rand::seq::index::sample(&mut rng, pool.len(), n)
            .into_iter()
            .map(|i| pool[i])
            .collect();
        chosen.sort_unstable();
        chosen
    };
    let mut all = pick(&ids, n_id);
    all.extend(pick(&oods, n_ood));
    all.sort_unstable();
    Ok(all)
}

pub fn evaluate_imbalance(
    config: &RunConfig,
    session: &Session,
    ratios: &[Ratio],
    dataset: &str,
) -> Result<Vec<(Ratio, Evaluation)>> {
    let truth = ground_truth(session)?;
    // fail before doing any work if a ratio cannot be served
    let subsets = ratios
        .iter()
        .map(|&r| ratio_indices(truth, r, config.seed).map(|ix| (r, ix)))
        .collect::<Result<Vec<_>>>()?;
    let prepared = prepare(config, session)?;
    subsets
        .into_iter()
        .map(|(r, ix)| evaluate_indices(config, session, &prepared, &ix, dataset).map(|e| (r, e)))
        .collect()
}

fn dataset_name(manifest: &Path) -> String {
    manifest
        .parent()
        .and_then(|p| p.file_name())
        .or_else(|| manifest.file_stem())
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// `select`: writes `negatives.emb`/`.tsv`, `proxies.emb` and
/// `base_distances.txt` under `config.out`.
pub fn cmd_select(config: &RunConfig) -> Result<Prepared> {
    let session = load(&config.manifest)?;
    let prepared = prepare(config, &session)?;
    ensure_dir(&config.out)?;
    write_selection(
        session.dim,
        &prepared.negatives,
        &config.out.join("negatives.emb"),
    )?;
    prepared.proxies.export(
        config.out.join("proxies.emb"),
        config.out.join("base_distances.txt"),
    )?;
    Ok(prepared)
}

/// `score`: writes `scores.tsv` (one line per test sample, file order) and
/// optionally dumps the final pool.
pub fn cmd_score(config: &RunConfig, dump_pool: Option<&Path>) -> Result<Scored> {
    let session = load(&config.manifest)?;
    let prepared = prepare(config, &session)?;
    let scored = score_test(config, &session, &prepared, &session.test)?;
    let mut tsv = String::from(
        "sample_id\tscore\tsum_id\tsum_selected_neg\tsum_extra_neg\tmax_id_cos\tmax_neg_cos\n",
    );
    for r in &scored.records {
        tsv.push_str(&format!(
            "{}\t{:?}\t{:?}\t{:?}\t{:?}\t{:?}\t{:?}\n",
            r.sample_id,
            r.score,
            r.sum_id,
            r.sum_selected_neg,
            r.sum_extra_neg,
            r.max_id_cos,
            r.max_neg_cos
        ));
    }
    write_text(&config.out.join("scores.tsv"), &tsv)?;
    if let Some(path) = dump_pool {
        let pool = scored
            .pool
            .clone()
            .unwrap_or_else(|| DynamicPool::new(config.capacity));
        if let Some(dir) = path.parent() {
            ensure_dir(dir)?;
        }
        pool.export(session.dim, path, sidecar_path(path))?;
    }
    Ok(scored)
}

/// `eval`: writes `report.json`, `report.csv` and `taxonomy.tsv`.
pub fn cmd_eval(config: &RunConfig) -> Result<Report> {
    let session = load(&config.manifest)?;
    let eval = evaluate_session(config, &session, &dataset_name(&config.manifest))?;
    write_text(&config.out.join("report.json"), &eval.report.to_json()?)?;
    write_text(&config.out.join("report.csv"), &eval.report.to_csv())?;
    write_text(
        &config.out.join("taxonomy.tsv"),
        &eval.report.eval().taxonomy_tsv(),
    )?;
    Ok(eval.report)
}

/// `imbalance`: one `report-<id>to<ood>.json` per ratio under
/// `config.out/imbalance`, plus `index.tsv`.
pub fn cmd_imbalance(config: &RunConfig, ratios: &[Ratio]) -> Result<Vec<(Ratio, Report)>> {
    let session = load(&config.manifest)?;
    let evals = evaluate_imbalance(config, &session, ratios, &dataset_name(&config.manifest))?;
    let dir = config.out.join("imbalance");
    let mut index = String::from("ratio\tn_id\tn_ood\tauroc\tfpr95\tfile\n");
    let mut out = Vec::with_capacity(evals.len());
    for (ratio, eval) in evals {
        let name = format!("report-{}.json", ratio.file_stem());
        write_text(&dir.join(&name), &eval.report.to_json()?)?;
        index.push_str(&format!(
            "{ratio}\t{}\t{}\t{:?}\t{:?}\t{name}\n",
            eval.report.n_id, eval.report.n_ood, eval.report.auroc, eval.report.fpr95
        ));
        out.push((ratio, eval.report));
    }
    write_text(&dir.join("index.tsv"), &index)?;
    Ok(out)
}

/// Outcome of the inversion self-check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvertCheck {
    pub gradient_cases: usize,
    pub worst_relative_error: f64,
    pub gradient_pass: bool,
    pub convergence_cases: usize,
    pub worst_final_cosine: f64,
    pub convergence_pass: bool,
}

pub const GRADIENT_TOLERANCE: f64 = 1e-4;
pub const GRADIENT_STEP: f64 = 1e-5;
pub const GRADIENT_FLOOR: f64 = 1e-8;
pub const CONVERGENCE_COSINE: f64 = 0.99;

/// Gradient check over `cases` random seeded encoders (`dim`, three tokens)
/// and convergence check with the identity encoder over `cases` random
/// targets.
pub fn invert_check(dim: usize, cases: usize, seed: u64) -> Result<InvertCheck> {
    use crate::inversion::{finite_difference_gradient, invert, max_relative_error, Matrix};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_err = 0.0f64;
    for case in 0..cases {
        let prefix_weight = (case % 3) as f64 * 0.5;
        let enc = ToyEncoder::seeded(dim, dim, 3, prefix_weight, seed.wrapping_add(case as u64))?;
        let tokens = Matrix::gaussian(3, dim, 0.5, &mut rng);
        let h = crate::geometry::normalize(Matrix::gaussian(1, dim, 1.0, &mut rng).as_slice())?;
        let (_, g) = enc.loss_and_gradient(&tokens, &h)?;
        let fd = finite_difference_gradient(&enc, &tokens, &h, GRADIENT_STEP)?;
        worst_err = worst_err.max(max_relative_error(&g, &fd, GRADIENT_FLOOR));
    }
    let identity = ToyEncoder::identity(dim);
    let cfg = InversionConfig {
        prefix_weight: 0.0,
        ..InversionConfig::default()
    };
    let mut worst_cos = 1.0f64;
    for case in 0..cases {
        let h = Embedding::image(
            format!("target:{case}"),
            Matrix::gaussian(1, dim, 1.0, &mut rng).as_slice(),
        )?;
        let inv = invert(&h, &identity, &cfg)?;
        worst_cos = worst_cos.min(crate::geometry::cosine(inv.embedding.values(), h.values())?);
    }
    Ok(InvertCheck {
        gradient_cases: cases,
        worst_relative_error: worst_err,
        gradient_pass: worst_err <= GRADIENT_TOLERANCE,
        convergence_cases: cases,
        worst_final_cosine: worst_cos,
        convergence_pass: worst_cos >= CONVERGENCE_COSINE,
    })
}
