//! Leave-one-out k-nearest-neighbor accuracy under cosine distance.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::projection::Projector;
use crate::vector::{dot, normalize, EmbeddingVector};

/// Leave-one-out top-1 accuracy of a `k`-NN majority vote.
///
/// Neighbors are ranked by cosine distance, ties by index; vote ties go to
/// the lowest label. With `proj`, embeddings are mapped through the
/// projection first.
pub fn knn_eval(
    embeddings: &[EmbeddingVector],
    labels: &[usize],
    k: usize,
    proj: Option<&Projector>,
) -> Result<f64> {
    let n = embeddings.len();
    if labels.len() != n {
        return Err(Error::InvalidConfig(format!("{n} embeddings but {} labels", labels.len())));
    }
    if k == 0 || n <= k {
        return Err(Error::TooFewExamples { n, k });
    }
    let points: Vec<EmbeddingVector> = embeddings
        .iter()
        .enumerate()
        .map(|(i, v)| {
            match proj {
                Some(p) => p.project(v),
                None => normalize(v),
            }
            .map_err(|e| Error::Record {
                example_id: i as u64,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    let classes = labels.iter().max().map_or(0, |m| m + 1);

    let correct: usize = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut order: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (1.0 - dot(points[i].as_slice(), points[j].as_slice()), j))
                .collect();
            order.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut votes = vec![0usize; classes];
            for &(_, j) in &order[..k] {
                votes[labels[j]] += 1;
            }
            let mut best = 0;
            for (c, &v) in votes.iter().enumerate() {
                if v > votes[best] {
                    best = c;
                }
            }
            usize::from(best == labels[i])
        })
        .sum();
    Ok(correct as f64 / n as f64)
}
