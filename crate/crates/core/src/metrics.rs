//! AUROC, FPR at a target TPR, and the ID error taxonomy.
//!
//! ID samples are the positive class throughout: a detector accepts a sample
//! as ID when its score is at or above the threshold.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scorer::ScoreRecord;

/// Mann-Whitney AUROC: `P(id > ood) + 0.5 P(id = ood)`.
pub fn auroc(id_scores: &[f64], ood_scores: &[f64]) -> Result<f64> {
    if id_scores.is_empty() {
        return Err(Error::EmptySide("ID"));
    }
    if ood_scores.is_empty() {
        return Err(Error::EmptySide("OOD"));
    }
    let mut all: Vec<(f64, bool)> = id_scores
        .iter()
        .map(|&s| (s, true))
        .chain(ood_scores.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));

    // sum of midranks of ID scores
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j < all.len() && all[j].0 == all[i].0 {
            j += 1;
        }
        let midrank = (i + j + 1) as f64 / 2.0;
        let ids = all[i..j].iter().filter(|x| x.1).count();
        rank_sum += midrank * ids as f64;
        i = j;
    }
    let n_id = id_scores.len() as f64;
    let n_ood = ood_scores.len() as f64;
    let u = rank_sum - n_id * (n_id + 1.0) / 2.0;
    Ok(u / (n_id * n_ood))
}

/// Fraction of OOD scores at or above the largest ID-score threshold that
/// still accepts at least `tpr_target` of the ID scores.
pub fn fpr_at_tpr(id_scores: &[f64], ood_scores: &[f64], tpr_target: f64) -> Result<f64> {
    if id_scores.is_empty() {
        return Err(Error::EmptySide("ID"));
    }
    if ood_scores.is_empty() {
        return Err(Error::EmptySide("OOD"));
    }
    if !(tpr_target > 0.0 && tpr_target <= 1.0) {
        return Err(Error::Config(format!(
            "tpr target must be in (0, 1], got {tpr_target}"
        )));
    }
    let mut id = id_scores.to_vec();
    id.sort_by(|a, b| b.total_cmp(a));
    let n_id = id.len() as f64;
    let mut k = 0;
    let threshold = loop {
        let mut j = k;
        while j < id.len() && id[j] == id[k] {
            j += 1;
        }
        // j = |{id >= id[k]}|
        if j as f64 / n_id >= tpr_target || j == id.len() {
            break id[k];
        }
        k = j;
    };
    let accepted = ood_scores.iter().filter(|&&s| s >= threshold).count();
    Ok(accepted as f64 / ood_scores.len() as f64)
}

pub fn fpr95(id_scores: &[f64], ood_scores: &[f64]) -> Result<f64> {
    fpr_at_tpr(id_scores, ood_scores, 0.95)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaxonomyPoint {
    pub gamma: f64,
    pub max_ood_rate: f64,
    pub sum_ood_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// A single negative beats the best ID label.
    MaxOod,
    /// Aggregate negative mass beats aggregate ID mass, no single dominant
    /// negative.
    SumOod,
}

/// Category of an ID record, ignoring whether it was rejected.
pub fn error_kind(record: &ScoreRecord) -> Option<ErrorKind> {
    if record.max_neg_cos > record.max_id_cos {
        Some(ErrorKind::MaxOod)
    } else if record.sum_neg() > record.sum_id {
        Some(ErrorKind::SumOod)
    } else {
        None
    }
}

/// Max-OOD and Sum-OOD error rates over rejected ID records (`score < gamma`),
/// normalized by the total ID count.
pub fn taxonomy(id_records: &[ScoreRecord], gammas: &[f64]) -> Vec<TaxonomyPoint> {
    let n = id_records.len().max(1) as f64;
    let kinds: Vec<Option<ErrorKind>> = id_records.iter().map(error_kind).collect();
    gammas
        .iter()
        .map(|&gamma| {
            let (mut max_ood, mut sum_ood) = (0usize, 0usize);
            for (r, k) in id_records.iter().zip(&kinds) {
                if r.score < gamma {
                    match k {
                        Some(ErrorKind::MaxOod) => max_ood += 1,
                        Some(ErrorKind::SumOod) => sum_ood += 1,
                        None => {}
                    }
                }
            }
            TaxonomyPoint {
                gamma,
                max_ood_rate: max_ood as f64 / n,
                sum_ood_rate: sum_ood as f64 / n,
            }
        })
        .collect()
}

/// `count` evenly spaced thresholds in `[0, 1]`.
pub fn gamma_grid(count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![0.5],
        _ => (0..count).map(|k| k as f64 / (count - 1) as f64).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub auroc: f64,
    pub fpr95: f64,
    pub n_id: usize,
    pub n_ood: usize,
    pub taxonomy_curve: Vec<TaxonomyPoint>,
}

pub fn evaluate(
    id_records: &[ScoreRecord],
    ood_records: &[ScoreRecord],
    gammas: &[f64],
) -> Result<EvalResult> {
    let id: Vec<f64> = id_records.iter().map(|r| r.score).collect();
    let ood: Vec<f64> = ood_records.iter().map(|r| r.score).collect();
    Ok(EvalResult {
        auroc: auroc(&id, &ood)?,
        fpr95: fpr95(&id, &ood)?,
        n_id: id.len(),
        n_ood: ood.len(),
        taxonomy_curve: taxonomy(id_records, gammas),
    })
}

impl EvalResult {
    /// `gamma<TAB>max_ood_rate<TAB>sum_ood_rate` lines with a header.
    pub fn taxonomy_tsv(&self) -> String {
        let mut s = String::from("gamma\tmax_ood_rate\tsum_ood_rate\n");
        for p in &self.taxonomy_curve {
            s.push_str(&format!(
                "{:?}\t{:?}\t{:?}\n",
                p.gamma, p.max_ood_rate, p.sum_ood_rate
            ));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pairwise(id: &[f64], ood: &[f64]) -> f64 {
        let mut acc = 0.0;
        for a in id {
            for b in ood {
                acc += if a > b {
                    1.0
                } else if a == b {
                    0.5
                } else {
                    0.0
                };
            }
        }
        acc / (id.len() * ood.len()) as f64
    }

    fn sweep(id: &[f64], ood: &[f64], target: f64) -> f64 {
        let n = id.len() as f64;
        let gamma = id
            .iter()
            .copied()
            .filter(|&g| id.iter().filter(|&&s| s >= g).count() as f64 / n >= target)
            .fold(f64::NEG_INFINITY, f64::max);
        ood.iter().filter(|&&s| s >= gamma).count() as f64 / ood.len() as f64
    }

    #[test]
    fn auroc_examples() {
        assert_eq!(auroc(&[0.9, 0.8], &[0.7, 0.6]).unwrap(), 1.0);
        assert_eq!(pairwise(&[0.9, 0.6], &[0.8, 0.7]), 0.5);
        assert_eq!(auroc(&[0.9, 0.6], &[0.8, 0.7]).unwrap(), 0.5);
        assert_eq!(auroc(&[0.5], &[0.5]).unwrap(), 0.5);
        assert!(matches!(auroc(&[], &[0.5]), Err(Error::EmptySide("ID"))));
        assert!(matches!(auroc(&[0.1], &[]), Err(Error::EmptySide("OOD"))));
    }

    #[test]
    fn fpr_examples() {
        assert_eq!(sweep(&[0.9, 0.8], &[0.85, 0.1], 0.95), 0.5);
        assert_eq!(fpr95(&[0.9, 0.8], &[0.85, 0.1]).unwrap(), 0.5);
        assert_eq!(fpr95(&[0.9, 0.8, 0.7], &[0.1, 0.2]).unwrap(), 0.0);
        assert_eq!(fpr95(&[0.3, 0.4], &[0.5, 0.9]).unwrap(), 1.0);
        assert!(fpr_at_tpr(&[0.3], &[0.1], 0.0).is_err());
    }

    fn rec(score: f64, sum_id: f64, sum_neg: f64, max_id: f64, max_neg: f64) -> ScoreRecord {
        ScoreRecord {
            sample_id: "r".into(),
            score,
            sum_id,
            sum_selected_neg: sum_neg,
            sum_extra_neg: 0.0,
            max_id_cos: max_id,
            max_neg_cos: max_neg,
        }
    }

    #[test]
    fn taxonomy_examples() {
        let e = f64::exp;
        let max_case = {
            let (a, b) = (e(0.9) + e(0.2), e(0.95) + e(0.1));
            rec(a / (a + b), a, b, 0.9, 0.95)
        };
        assert_eq!(error_kind(&max_case), Some(ErrorKind::MaxOod));

        // e^0.85 + e^0.84 = 4.6560 > e^0.9 = 2.4596
        let (a, b) = (e(0.9), e(0.85) + e(0.84));
        assert!((b - 4.6560).abs() < 1e-4 && (a - 2.4596).abs() < 1e-4);
        let sum_case = rec(a / (a + b), a, b, 0.9, 0.85);
        assert_eq!(error_kind(&sum_case), Some(ErrorKind::SumOod));

        let curve = taxonomy(&[max_case, sum_case], &[0.0, 1.0]);
        assert_eq!(curve[0].max_ood_rate, 0.0);
        assert_eq!(curve[0].sum_ood_rate, 0.0);
        assert_eq!(curve[1].max_ood_rate, 0.5);
        assert_eq!(curve[1].sum_ood_rate, 0.5);
    }

    fn scores() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        // coarse grid so ties occur
        let v = prop::collection::vec((0u32..20).prop_map(|k| k as f64 / 20.0), 1..32);
        (v.clone(), v)
    }

    proptest! {
        #[test]
        fn auroc_matches_pairwise((id, ood) in scores()) {
            let a = auroc(&id, &ood).unwrap();
            prop_assert!((a - pairwise(&id, &ood)).abs() <= 1e-9);
            prop_assert!((a + auroc(&ood, &id).unwrap() - 1.0).abs() <= 1e-12);
            let t = |x: &f64| (3.0 * x).exp() + x;
            let ti: Vec<f64> = id.iter().map(t).collect();
            let to: Vec<f64> = ood.iter().map(t).collect();
            prop_assert!((auroc(&ti, &to).unwrap() - a).abs() <= 1e-12);
        }

        #[test]
        fn fpr_matches_sweep((id, ood) in scores(), target in 0.01f64..=1.0) {
            prop_assert_eq!(fpr_at_tpr(&id, &ood, target).unwrap(), sweep(&id, &ood, target));
        }

        #[test]
        fn taxonomy_monotone(
            raw in prop::collection::vec((0.0f64..1.0, 0.1f64..5.0, 0.0f64..5.0, -1.0f64..1.0, -1.0f64..1.0), 1..30)
        ) {
            let records: Vec<ScoreRecord> = raw.iter().map(|&(s, a, b, mi, mn)| rec(s, a, b, mi, mn)).collect();
            let curve = taxonomy(&records, &gamma_grid(21));
            for w in curve.windows(2) {
                prop_assert!(w[0].max_ood_rate <= w[1].max_ood_rate);
                prop_assert!(w[0].sum_ood_rate <= w[1].sum_ood_rate);
            }
            for p in &curve {
                prop_assert!(p.max_ood_rate + p.sum_ood_rate <= 1.0);
            }
        }
    }
}
