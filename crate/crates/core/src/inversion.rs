//! Modality inversion: optimize pseudo-tokens so that a differentiable text
//! encoder maps them onto a given image embedding.
//!
//! The encoder here is a toy with a closed-form gradient: the template prefix
//! rows and the pseudo-token rows are projected by a fixed matrix, mean-pooled
//! (the prefix rows weighted by `prefix_weight`) and L2-normalized. The loss
//! is `1 - cos(encode(tokens), h)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dot, norm, Embedding, Modality, MIN_NORM};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.as_ref().len(), cols, "ragged matrix rows");
            data.extend_from_slice(r.as_ref());
        }
        Matrix {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn gaussian(rows: usize, cols: usize, scale: f64, rng: &mut ChaCha8Rng) -> Self {
        let data = (0..rows * cols)
            .map(|_| {
                let x: f64 = StandardNormal.sample(rng);
                scale * x
            })
            .collect();
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Sum of all rows.
    fn row_sum(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (acc, x) in s.iter_mut().zip(self.row(i)) {
                *acc += x;
            }
        }
        s
    }

    /// `x^T M` for a row vector `x` of length `rows`.
    fn left_mul(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (i, &xi) in x.iter().enumerate() {
            for (o, m) in out.iter_mut().zip(self.row(i)) {
                *o += xi * m;
            }
        }
        out
    }

    /// `M y` for a column vector `y` of length `cols`.
    fn right_mul(&self, y: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|i| dot(self.row(i), y)).collect()
    }
}

/// Mean-pool, project, normalize text encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyEncoder {
    /// `d_tok x d` projection.
    pub projection: Matrix,
    /// `T_p x d_tok` template rows.
    pub prefix: Matrix,
    pub prefix_weight: f64,
    /// `sum(rows(prefix * projection))`, cached.
    prefix_projected: Vec<f64>,
}

impl ToyEncoder {
    pub fn new(projection: Matrix, prefix: Matrix, prefix_weight: f64) -> Result<Self> {
        if prefix.rows() > 0 && prefix.cols() != projection.rows() {
            return Err(Error::DimMismatch {
                expected: projection.rows(),
                found: prefix.cols(),
            });
        }
        if !(0.0..=1.0).contains(&prefix_weight) {
            return Err(Error::Config(format!(
                "prefix_weight must be in [0, 1], got {prefix_weight}"
            )));
        }
        let prefix_projected = if prefix.rows() == 0 {
            vec![0.0; projection.cols()]
        } else {
            projection.left_mul(&prefix.row_sum())
        };
        Ok(ToyEncoder {
            projection,
            prefix,
            prefix_weight,
            prefix_projected,
        })
    }

    /// Identity projection, no template.
    pub fn identity(dim: usize) -> Self {
        ToyEncoder::new(Matrix::identity(dim), Matrix::zeros(0, dim), 0.0)
            .expect("identity encoder")
    }

    /// Gaussian projection with entries of variance `1 / token_dim` and
    /// `prefix_len` Gaussian template rows of the same scale.
    pub fn seeded(
        token_dim: usize,
        dim: usize,
        prefix_len: usize,
        prefix_weight: f64,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 1.0 / (token_dim as f64).sqrt();
        let projection = Matrix::gaussian(token_dim, dim, scale, &mut rng);
        let prefix = Matrix::gaussian(prefix_len, token_dim, scale, &mut rng);
        ToyEncoder::new(projection, prefix, prefix_weight)
    }

    pub fn token_dim(&self) -> usize {
        self.projection.rows()
    }

    pub fn dim(&self) -> usize {
        self.projection.cols()
    }

    fn pool_weight(&self, num_tokens: usize) -> f64 {
        self.prefix_weight * self.prefix.rows() as f64 + num_tokens as f64
    }

    /// Pre-normalization pooled vector.
    pub fn pooled(&self, tokens: &Matrix) -> Result<Vec<f64>> {
        if tokens.cols() != self.token_dim() {
            return Err(Error::DimMismatch {
                expected: self.token_dim(),
                found: tokens.cols(),
            });
        }
        if tokens.rows() == 0 {
            return Err(Error::Config(
                "at least one pseudo-token is required".into(),
            ));
        }
        if tokens.as_slice().iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        let n = self.pool_weight(tokens.rows());
        let projected = self.projection.left_mul(&tokens.row_sum());
        Ok(projected
            .iter()
            .zip(&self.prefix_projected)
            .map(|(t, p)| (self.prefix_weight * p + t) / n)
            .collect())
    }

    pub fn encode_values(&self, tokens: &Matrix) -> Result<Vec<f64>> {
        crate::geometry::normalize(&self.pooled(tokens)?)
    }

    pub fn encode(&self, id: impl Into<String>, tokens: &Matrix) -> Result<Embedding> {
        Embedding::new(id, Modality::Text, &self.encode_values(tokens)?)
    }

    /// `1 - cos(encode(tokens), h)`.
    pub fn loss(&self, tokens: &Matrix, h: &[f64]) -> Result<f64> {
        let z = self.pooled(tokens)?;
        Ok(1.0 - crate::geometry::cosine(&z, h)?)
    }

    /// Loss and its gradient with respect to every token entry.
    pub fn loss_and_gradient(&self, tokens: &Matrix, h: &[f64]) -> Result<(f64, Matrix)> {
        if h.len() != self.dim() {
            return Err(Error::DimMismatch {
                expected: self.dim(),
                found: h.len(),
            });
        }
        let z = self.pooled(tokens)?;
        let zn = norm(&z);
        let hn = norm(h);
        if !(zn > MIN_NORM) || !(hn > MIN_NORM) {
            return Err(Error::ZeroVector);
        }
        let z_hat: Vec<f64> = z.iter().map(|x| x / zn).collect();
        let h_hat: Vec<f64> = h.iter().map(|x| x / hn).collect();
        let c = dot(&z_hat, &h_hat);
        // dL/dz = -(h_hat - c z_hat) / |z|
        let gz: Vec<f64> = h_hat
            .iter()
            .zip(&z_hat)
            .map(|(hh, zh)| -(hh - c * zh) / zn)
            .collect();
        // dz/dv_t = W / n for every token row
        let n = self.pool_weight(tokens.rows());
        let row_grad: Vec<f64> = self
            .projection
            .right_mul(&gz)
            .iter()
            .map(|g| g / n)
            .collect();
        let mut grad = Matrix::zeros(tokens.rows(), tokens.cols());
        for t in 0..tokens.rows() {
            grad.data[t * tokens.cols()..(t + 1) * tokens.cols()].copy_from_slice(&row_grad);
        }
        Ok((1.0 - c.clamp(-1.0, 1.0), grad))
    }

    pub fn gradient(&self, tokens: &Matrix, h: &Embedding) -> Result<Matrix> {
        Ok(self.loss_and_gradient(tokens, h.values())?.1)
    }
}

pub const DEFAULT_NUM_TOKENS: usize = 3;
pub const DEFAULT_STEPS: usize = 200;
pub const DEFAULT_LEARNING_RATE: f64 = 0.1;
pub const DEFAULT_INIT_SCALE: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InversionConfig {
    pub num_tokens: usize,
    pub steps: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub prefix_weight: f64,
    pub init_scale: f64,
}

impl Default for InversionConfig {
    fn default() -> Self {
        InversionConfig {
            num_tokens: DEFAULT_NUM_TOKENS,
            steps: DEFAULT_STEPS,
            learning_rate: DEFAULT_LEARNING_RATE,
            seed: 0,
            prefix_weight: 1.0,
            init_scale: DEFAULT_INIT_SCALE,
        }
    }
}

impl InversionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_tokens == 0 || self.steps == 0 {
            return Err(Error::Config(
                "num_tokens and steps must be at least 1".into(),
            ));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.init_scale > 0.0) || !self.init_scale.is_finite() {
            return Err(Error::Config(format!(
                "init_scale must be positive, got {}",
                self.init_scale
            )));
        }
        Ok(())
    }
}

/// Result of one inversion run.
#[derive(Debug, Clone, PartialEq)]
pub struct Inversion {
    pub embedding: Embedding,
    pub tokens: Matrix,
    pub initial_loss: f64,
    pub best_loss: f64,
    /// Loss of every evaluated iterate, initialization first.
    pub losses: Vec<f64>,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Per-call PRNG seed from the global seed and the sample identifier.
pub fn derive_seed(seed: u64, sample_id: &str) -> u64 {
    // FNV-1a
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in sample_id.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix64(seed ^ splitmix64(h))
}

/// Plain gradient descent from seeded Gaussian tokens; returns the encoding
/// of the lowest-loss iterate seen.
pub fn invert(h: &Embedding, encoder: &ToyEncoder, config: &InversionConfig) -> Result<Inversion> {
    config.validate()?;
    if h.dim() != encoder.dim() {
        return Err(Error::DimMismatch {
            expected: encoder.dim(),
            found: h.dim(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &h.id));
    let mut tokens = Matrix::gaussian(
        config.num_tokens,
        encoder.token_dim(),
        config.init_scale,
        &mut rng,
    );

    let mut best: Option<(f64, Matrix)> = None;
    let mut losses = Vec::with_capacity(config.steps + 1);
    let mut initial_loss = None;
    for step in 0..=config.steps {
        let (loss, grad) = match encoder.loss_and_gradient(&tokens, h.values()) {
            Ok(v) => v,
            Err(Error::ZeroVector) => {
                log::warn!("inversion of {} collapsed at step {step}", h.id);
                break;
            }
            Err(e) => return Err(e),
        };
        initial_loss.get_or_insert(loss);
        losses.push(loss);
        if best.as_ref().is_none_or(|(b, _)| loss < *b) {
            best = Some((loss, tokens.clone()));
        }
        if step == config.steps {
            break;
        }
        for (v, g) in tokens.data.iter_mut().zip(&grad.data) {
            *v -= config.learning_rate * g;
        }
    }
    let (best_loss, best_tokens) = best.ok_or(Error::ZeroVector)?;
    let embedding = encoder.encode(format!("inv:{}", h.id), &best_tokens)?;
    Ok(Inversion {
        embedding,
        tokens: best_tokens,
        initial_loss: initial_loss.unwrap_or(best_loss),
        best_loss,
        losses,
    })
}

/// Central finite-difference gradient of the loss.
pub fn finite_difference_gradient(
    encoder: &ToyEncoder,
    tokens: &Matrix,
    h: &[f64],
    step: f64,
) -> Result<Matrix> {
    let mut probe = tokens.clone();
    let mut out = Matrix::zeros(tokens.rows(), tokens.cols());
    for k in 0..tokens.data.len() {
        let x = tokens.data[k];
        probe.data[k] = x + step;
        let up = encoder.loss(&probe, h)?;
        probe.data[k] = x - step;
        let down = encoder.loss(&probe, h)?;
        probe.data[k] = x;
        out.data[k] = (up - down) / (2.0 * step);
    }
    Ok(out)
}

/// Worst elementwise relative error over entries where either gradient
/// exceeds `floor` in magnitude.
pub fn max_relative_error(analytic: &Matrix, numeric: &Matrix, floor: f64) -> f64 {
    analytic
        .data
        .iter()
        .zip(&numeric.data)
        .filter(|(a, n)| a.abs().max(n.abs()) > floor)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::cosine;

    fn tokens(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(rows)
    }

    #[test]
    fn encode_examples() {
        let enc = ToyEncoder::identity(2);
        let u = [0.6, 0.8];
        assert_eq!(enc.encode_values(&tokens(&[&u])).unwrap(), u.to_vec());
        assert!(matches!(
            enc.encode_values(&tokens(&[&[0.6, 0.8], &[-0.6, -0.8]])),
            Err(Error::ZeroVector)
        ));
        let v = enc
            .encode_values(&tokens(&[&[2.0, 0.0], &[0.0, 2.0]]))
            .unwrap();
        assert!((v[0] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((v[1] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn prefix_is_weighted_in_the_mean() {
        let prefix = Matrix::from_rows(&[[1.0, 0.0], [1.0, 0.0]]);
        let enc = ToyEncoder::new(Matrix::identity(2), prefix, 0.5).unwrap();
        // (0.5 * (2, 0) + (0, 3)) / (0.5 * 2 + 1) = (0.5, 1.5)
        assert_eq!(enc.pooled(&tokens(&[&[0.0, 3.0]])).unwrap(), vec![0.5, 1.5]);
    }

    #[test]
    fn gradient_vanishes_at_optimum() {
        let enc = ToyEncoder::identity(4);
        let h = Embedding::image("h", &[0.1, -0.5, 0.7, 0.2]).unwrap();
        let g = enc.gradient(&tokens(&[h.values()]), &h).unwrap();
        assert!(norm(g.as_slice()) <= 1e-10);
    }

    #[test]
    fn gradient_is_orthogonal_to_scaling() {
        let enc = ToyEncoder::identity(3);
        let t = tokens(&[&[0.3, 0.1, -0.2], &[0.0, 0.5, 0.4]]);
        let h = [0.2, -0.9, 0.3];
        let scaled = Matrix::from_rows(&[[0.6, 0.2, -0.4], [0.0, 1.0, 0.8]]);
        assert!((enc.loss(&t, &h).unwrap() - enc.loss(&scaled, &h).unwrap()).abs() < 1e-15);
        let (_, g) = enc.loss_and_gradient(&t, &h).unwrap();
        assert!(dot(g.as_slice(), t.as_slice()).abs() <= 1e-10);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let enc = ToyEncoder::seeded(12, 9, 2, 0.7, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let t = Matrix::gaussian(3, 12, 0.5, &mut rng);
        let h =
            crate::geometry::normalize(Matrix::gaussian(1, 9, 1.0, &mut rng).as_slice()).unwrap();
        let (_, g) = enc.loss_and_gradient(&t, &h).unwrap();
        let fd = finite_difference_gradient(&enc, &t, &h, 1e-5).unwrap();
        assert!(max_relative_error(&g, &fd, 1e-8) <= 1e-4);
    }

    #[test]
    fn invert_converges_and_is_deterministic() {
        let enc = ToyEncoder::identity(16);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = Embedding::image("h", Matrix::gaussian(1, 16, 1.0, &mut rng).as_slice()).unwrap();
        let cfg = InversionConfig {
            prefix_weight: 0.0,
            ..Default::default()
        };
        let a = invert(&h, &enc, &cfg).unwrap();
        let b = invert(&h, &enc, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(cosine(a.embedding.values(), h.values()).unwrap() >= 0.99);
        assert!(a.best_loss <= a.initial_loss);
        assert_eq!(a.embedding.modality, Modality::Text);
        assert!((norm(a.embedding.values()) - 1.0).abs() <= 1e-6);
    }

    #[test]
    fn invert_with_prefix_keeps_best_so_far() {
        let enc = ToyEncoder::seeded(6, 10, 3, 1.0, 9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h = Embedding::image("h", Matrix::gaussian(1, 10, 1.0, &mut rng).as_slice()).unwrap();
        let inv = invert(&h, &enc, &InversionConfig::default()).unwrap();
        assert!(inv.losses.iter().all(|l| l.is_finite()));
        assert_eq!(
            inv.best_loss,
            inv.losses.iter().cloned().fold(f64::INFINITY, f64::min)
        );
        assert!(inv.best_loss <= inv.initial_loss);
    }

    #[test]
    fn invert_rejects_bad_config() {
        let enc = ToyEncoder::identity(2);
        let h = Embedding::image("h", &[1.0, 0.0]).unwrap();
        let cfg = InversionConfig {
            steps: 0,
            ..Default::default()
        };
        assert!(matches!(invert(&h, &enc, &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn derived_seeds_differ_by_sample() {
        assert_ne!(derive_seed(0, "test:000001"), derive_seed(0, "test:000002"));
        assert_ne!(derive_seed(0, "a"), derive_seed(1, "a"));
        assert_eq!(derive_seed(7, "a"), derive_seed(7, "a"));
    }
}
