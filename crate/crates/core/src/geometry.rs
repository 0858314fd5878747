//! Vector math shared by every stage: normalization, cosine similarity and
//! the inter-modal distance `1 - cos`.
//!
//! All arithmetic is `f64` and every dot product accumulates left to right,
//! so results are bitwise reproducible regardless of caller.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Norms at or below this are treated as zero.
pub const MIN_NORM: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Image,
    Text,
}

impl Modality {
    pub fn name(self) -> &'static str {
        match self {
            Modality::Image => "image",
            Modality::Text => "text",
        }
    }
}

/// A unit-norm embedding tagged with its modality.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub id: String,
    pub modality: Modality,
    values: Vec<f64>,
}

impl Embedding {
    /// Normalizes `values` and wraps them.
    pub fn new(id: impl Into<String>, modality: Modality, values: &[f64]) -> Result<Self> {
        Ok(Embedding {
            id: id.into(),
            modality,
            values: normalize(values)?,
        })
    }

    pub fn text(id: impl Into<String>, values: &[f64]) -> Result<Self> {
        Self::new(id, Modality::Text, values)
    }

    pub fn image(id: impl Into<String>, values: &[f64]) -> Result<Self> {
        Self::new(id, Modality::Image, values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn expect_modality(&self, expected: Modality) -> Result<()> {
        if self.modality == expected {
            Ok(())
        } else {
            Err(Error::ModalityMismatch {
                expected: expected.name(),
                found: self.modality.name(),
            })
        }
    }
}

pub fn check_finite(v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

/// Left-to-right dot product.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc + x * y)
}

pub fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

pub fn normalize(v: &[f64]) -> Result<Vec<f64>> {
    check_finite(v)?;
    let n = norm(v);
    if !(n > MIN_NORM) {
        return Err(Error::ZeroVector);
    }
    Ok(v.iter().map(|x| x / n).collect())
}

/// Cosine similarity clamped to `[-1, 1]`.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    check_finite(a)?;
    check_finite(b)?;
    let (na, nb) = (norm(a), norm(b));
    if !(na > MIN_NORM) || !(nb > MIN_NORM) {
        return Err(Error::ZeroVector);
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

/// `1 - cos(text, proxy)`, in `[0, 2]`.
pub fn inter_modal_distance(text: &Embedding, image_proxy: &[f64]) -> Result<f64> {
    text.expect_modality(Modality::Text)?;
    Ok(1.0 - cosine(text.values(), image_proxy)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn normalize_examples() {
        let v = normalize(&[3.0, 4.0]).unwrap();
        assert!(close(v[0], 0.6, 1e-15) && close(v[1], 0.8, 1e-15));
        assert_eq!(normalize(&[1.0, 0.0]).unwrap(), vec![1.0, 0.0]);
        assert!(matches!(normalize(&[0.0, 0.0]), Err(Error::ZeroVector)));
        assert!(matches!(normalize(&[1.0, f64::NAN]), Err(Error::NonFinite)));
        assert!(matches!(
            normalize(&[f64::INFINITY, 0.0]),
            Err(Error::NonFinite)
        ));
    }

    #[test]
    fn cosine_examples() {
        assert!(close(
            cosine(&[0.3, -2.0, 5.0], &[0.3, -2.0, 5.0]).unwrap(),
            1.0,
            1e-15
        ));
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let c = cosine(&[1.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!(close(c, std::f64::consts::FRAC_1_SQRT_2, 1e-9));
        assert!(matches!(
            cosine(&[0.0, 0.0], &[1.0, 0.0]),
            Err(Error::ZeroVector)
        ));
        assert!(matches!(
            cosine(&[1.0, 0.0], &[0.0, 0.0]),
            Err(Error::ZeroVector)
        ));
        assert!(matches!(
            cosine(&[1.0, 0.0], &[1.0, 0.0, 0.0]),
            Err(Error::DimMismatch { .. })
        ));
    }

    #[test]
    fn distance_examples() {
        let t = Embedding::text("t", &[1.0, 0.0]).unwrap();
        assert_eq!(inter_modal_distance(&t, &[2.0, 0.0]).unwrap(), 0.0);
        assert_eq!(inter_modal_distance(&t, &[-1.0, 0.0]).unwrap(), 2.0);
        let d = inter_modal_distance(&t, &[0.5, 0.5]).unwrap();
        assert!(close(d, 0.29289322, 1e-8));
        assert!(close(d, 1.0 - std::f64::consts::FRAC_1_SQRT_2, 1e-9));

        let img = Embedding::image("i", &[1.0, 0.0]).unwrap();
        assert!(matches!(
            inter_modal_distance(&img, &[1.0, 0.0]),
            Err(Error::ModalityMismatch { .. })
        ));
    }

    fn vec_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (2usize..24).prop_flat_map(|d| {
            (
                prop::collection::vec(-10.0f64..10.0, d),
                prop::collection::vec(-10.0f64..10.0, d),
            )
        })
    }

    proptest! {
        #[test]
        fn cosine_properties((a, b) in vec_strategy()) {
            prop_assume!(norm(&a) > 1e-3 && norm(&b) > 1e-3);
            let ab = cosine(&a, &b).unwrap();
            prop_assert_eq!(ab, cosine(&b, &a).unwrap());
            prop_assert!((-1.0..=1.0).contains(&ab));
            for c in [0.5, 2.0, 10.0] {
                let scaled: Vec<f64> = b.iter().map(|x| x * c).collect();
                prop_assert!((cosine(&a, &scaled).unwrap() - ab).abs() <= 1e-12);
            }
            let t = Embedding::text("t", &a).unwrap();
            let d = inter_modal_distance(&t, &b).unwrap();
            let c = cosine(t.values(), &b).unwrap();
            prop_assert!((d + c - 1.0).abs() <= 1e-12);
            prop_assert!((0.0..=2.0).contains(&d));
        }

        #[test]
        fn normalize_idempotent((a, _b) in vec_strategy()) {
            prop_assume!(norm(&a) > 1e-3);
            let once = normalize(&a).unwrap();
            let twice = normalize(&once).unwrap();
            prop_assert!((norm(&once) - 1.0).abs() <= 1e-12);
            for (x, y) in once.iter().zip(&twice) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
        }
    }
}
