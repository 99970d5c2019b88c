//! Reliability weights for predictions and the merges built on them.
//!
//! The Rényi weight is the exponential form of the negative Rényi entropy,
//! `(Σ_j p_j^α)^(1/(α-1))`, which lies in `(0, 1]` and is 1 only for one-hot
//! predictions. All entropies use the natural log.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::AggregationKind;
use crate::vector::ProbVector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightingScheme {
    pub kind: AggregationKind,
    /// Rényi order, used by `Renyi` only.
    pub alpha: f64,
    /// Fraction of views kept by `EntropyThreshold`.
    pub keep_fraction: f64,
}

impl WeightingScheme {
    pub fn new(kind: AggregationKind, alpha: f64, keep_fraction: f64) -> Result<Self> {
        if kind == AggregationKind::Renyi {
            check_alpha(alpha)?;
        }
        if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "keep fraction must lie in (0, 1], got {keep_fraction}"
            )));
        }
        Ok(Self {
            kind,
            alpha,
            keep_fraction,
        })
    }

    pub fn uniform() -> Self {
        Self {
            kind: AggregationKind::Uniform,
            alpha: 0.5,
            keep_fraction: 0.1,
        }
    }

    pub fn renyi(alpha: f64) -> Result<Self> {
        Self::new(AggregationKind::Renyi, alpha, 0.1)
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidAlpha(alpha))
    }
}

/// `exp` of the negative Rényi entropy of order `alpha`.
pub fn renyi_weight(p: &ProbVector, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let s: f64 = p
        .as_slice()
        .iter()
        .filter(|&&x| x > 0.0)
        .map(|x| x.powf(alpha))
        .sum();
    Ok(s.powf(1.0 / (alpha - 1.0)))
}

/// `-Σ p ln p` with `0 ln 0 = 0`.
pub fn shannon_entropy(p: &ProbVector) -> f64 {
    -p.as_slice()
        .iter()
        .filter(|&&x| x > 0.0)
        .map(|x| x * x.ln())
        .sum::<f64>()
}

/// Per-view weights under `scheme`.
pub fn view_weights(preds: &[ProbVector], scheme: &WeightingScheme) -> Result<Vec<f64>> {
    if preds.is_empty() {
        return Err(Error::InvalidConfig("no predictions to weight".into()));
    }
    let weights = match scheme.kind {
        AggregationKind::Uniform => vec![1.0; preds.len()],
        AggregationKind::MaxProb => preds
            .iter()
            .map(|p| p.as_slice().iter().copied().fold(0.0, f64::max))
            .collect(),
        AggregationKind::NormEntropy => preds
            .iter()
            .map(|p| {
                let h_max = (p.len() as f64).ln();
                ((h_max - shannon_entropy(p)) / h_max).max(0.0)
            })
            .collect(),
        AggregationKind::EntropyThreshold => {
            let keep = ((scheme.keep_fraction * preds.len() as f64 - 1e-9).ceil() as usize)
                .clamp(1, preds.len());
            let entropies: Vec<f64> = preds.iter().map(shannon_entropy).collect();
            let mut order: Vec<usize> = (0..preds.len()).collect();
            order.sort_by(|&a, &b| entropies[a].total_cmp(&entropies[b]).then(a.cmp(&b)));
            let mut w = vec![0.0; preds.len()];
            for &i in &order[..keep] {
                w[i] = 1.0;
            }
            w
        }
        AggregationKind::Renyi => preds
            .iter()
            .map(|p| renyi_weight(p, scheme.alpha))
            .collect::<Result<_>>()?,
    };
    Ok(weights)
}

/// Weighted average `Σ w_b p_b / Σ w_b`.
pub fn aggregate_views(preds: &[ProbVector], weights: &[f64]) -> Result<ProbVector> {
    if preds.is_empty() || preds.len() != weights.len() {
        return Err(Error::InvalidConfig(format!(
            "{} predictions with {} weights",
            preds.len(),
            weights.len()
        )));
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::AllZeroWeights);
    }
    let classes = preds[0].len();
    let mut out = vec![0.0; classes];
    for (p, &w) in preds.iter().zip(weights) {
        if w == 0.0 {
            continue;
        }
        for (o, x) in out.iter_mut().zip(p.as_slice()) {
            *o += w * x;
        }
    }
    for o in &mut out {
        *o /= total;
    }
    Ok(ProbVector::from_vec_unchecked(out))
}

/// β-weighted convex combination of the two branches.
///
/// The per-branch weight sums only decide whether the clustering branch is
/// active: with both branches normalized by `(1 + β)` times their own weight
/// sum, their contributions reduce to `β/(1+β)` and `1/(1+β)`.
pub fn fuse_branches(
    p_text: &ProbVector,
    w_text: f64,
    p_cluster: &ProbVector,
    w_cluster: f64,
    beta: f64,
) -> ProbVector {
    debug_assert!(w_text > 0.0);
    if w_cluster <= 0.0 {
        return p_text.clone();
    }
    let text_share = beta / (1.0 + beta);
    let cluster_share = 1.0 / (1.0 + beta);
    ProbVector::from_vec_unchecked(
        p_text
            .as_slice()
            .iter()
            .zip(p_cluster.as_slice())
            .map(|(t, c)| text_share * t + cluster_share * c)
            .collect(),
    )
}
