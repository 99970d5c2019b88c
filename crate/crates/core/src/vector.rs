//! Dense embedding vectors and probability vectors.
//!
//! Embeddings are stored in f64 in memory; the on-disk format carries f32 and
//! widens on read, so every sum, norm and centroid is accumulated in f64.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Norms below this are treated as zero.
pub const ZERO_NORM_TOL: f64 = 1e-12;

/// A dense real vector of dimension `D`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    /// Wraps `values`, rejecting non-finite entries.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteValue);
        }
        Ok(Self(values))
    }

    pub fn from_f32(values: &[f32]) -> Result<Self> {
        Self::new(values.iter().map(|&x| f64::from(x)).collect())
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    /// The `i`-th standard basis vector.
    pub fn basis(dim: usize, i: usize) -> Self {
        let mut v = vec![0.0; dim];
        v[i] = 1.0;
        Self(v)
    }

    pub(crate) fn from_vec_unchecked(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn dot(&self, other: &EmbeddingVector) -> f64 {
        dot(&self.0, &other.0)
    }

    /// `self + scale * other`.
    pub fn add_scaled(&self, scale: f64, other: &EmbeddingVector) -> Result<EmbeddingVector> {
        check_dim(self.dim(), other.dim())?;
        Ok(Self(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + scale * b)
                .collect(),
        ))
    }

    pub fn scaled(&self, scale: f64) -> EmbeddingVector {
        Self(self.0.iter().map(|x| x * scale).collect())
    }
}

impl AsRef<[f64]> for EmbeddingVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Returns `v / ‖v‖₂`.
pub fn normalize(v: &EmbeddingVector) -> Result<EmbeddingVector> {
    let n = v.norm();
    if !(n >= ZERO_NORM_TOL) {
        return Err(Error::ZeroVector);
    }
    Ok(EmbeddingVector(v.0.iter().map(|x| x / n).collect()))
}

/// Cosine similarity, clamped to `[-1, 1]`.
pub fn cosine(u: &EmbeddingVector, v: &EmbeddingVector) -> Result<f64> {
    check_dim(u.dim(), v.dim())?;
    let nu = u.norm();
    let nv = v.norm();
    if !(nu >= ZERO_NORM_TOL) || !(nv >= ZERO_NORM_TOL) {
        return Err(Error::ZeroVector);
    }
    Ok((u.dot(v) / (nu * nv)).clamp(-1.0, 1.0))
}

/// A probability distribution over the `J` classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    /// Validates non-negativity and unit sum (within 1e-6).
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        let valid = probs.iter().all(|p| p.is_finite() && *p >= 0.0)
            && (probs.iter().sum::<f64>() - 1.0).abs() <= 1e-6;
        if !valid || probs.is_empty() {
            return Err(Error::InvalidConfig(
                "probability vector must be non-negative and sum to 1".into(),
            ));
        }
        Ok(Self(probs))
    }

    pub fn uniform(classes: usize) -> Self {
        Self(vec![1.0 / classes as f64; classes])
    }

    pub fn one_hot(classes: usize, index: usize) -> Self {
        let mut p = vec![0.0; classes];
        p[index] = 1.0;
        Self(p)
    }

    pub(crate) fn from_vec_unchecked(probs: Vec<f64>) -> Self {
        Self(probs)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Index of the largest entry; the lowest index wins ties.
    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }

    /// The `k` most probable classes, descending, lowest index first on ties.
    pub fn top_k(&self, k: usize) -> Vec<(usize, f64)> {
        let mut idx: Vec<usize> = (0..self.0.len()).collect();
        idx.sort_by(|&a, &b| self.0[b].total_cmp(&self.0[a]).then(a.cmp(&b)));
        idx.into_iter().take(k).map(|i| (i, self.0[i])).collect()
    }
}

/// Lowest-index argmax.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Numerically stable `softmax(temperature * logits)`.
pub fn softmax(logits: &[f64], temperature: f64) -> ProbVector {
    let max = logits
        .iter()
        .map(|x| x * temperature)
        .fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits
        .iter()
        .map(|x| (x * temperature - max).exp())
        .collect();
    let total: f64 = exps.iter().sum();
    ProbVector(exps.into_iter().map(|e| e / total).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ev(v: &[f64]) -> EmbeddingVector {
        EmbeddingVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn normalize_three_four_five() {
        let n = normalize(&ev(&[3.0, 4.0])).unwrap();
        assert_abs_diff_eq!(n.as_slice()[0], 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(n.as_slice()[1], 0.8, epsilon = 1e-12);
    }

    #[test]
    fn normalize_unit_is_identity() {
        let u = ev(&[0.6, 0.0, -0.8]);
        let n = normalize(&u).unwrap();
        for (a, b) in n.as_slice().iter().zip(u.as_slice()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn normalize_zero_fails() {
        assert!(matches!(normalize(&ev(&[0.0, 0.0])), Err(Error::ZeroVector)));
    }

    #[test]
    fn cosine_examples() {
        let u = ev(&[2.0, -1.0, 0.5]);
        assert_abs_diff_eq!(cosine(&u, &u).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(cosine(&ev(&[1.0, 0.0]), &ev(&[0.0, 1.0])).unwrap(), 0.0);
        assert_abs_diff_eq!(
            cosine(&ev(&[1.0, 0.0]), &ev(&[1.0, 1.0])).unwrap(),
            std::f64::consts::FRAC_1_SQRT_2,
            epsilon = 1e-12
        );
        assert!(matches!(
            cosine(&ev(&[0.0, 0.0]), &ev(&[1.0, 1.0])),
            Err(Error::ZeroVector)
        ));
        assert!(matches!(
            cosine(&ev(&[1.0, 0.0]), &ev(&[1.0, 1.0, 0.0])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn rejects_non_finite() {
        assert!(EmbeddingVector::new(vec![1.0, f64::NAN]).is_err());
        assert!(EmbeddingVector::from_f32(&[f32::INFINITY, 0.0]).is_err());
    }

    #[test]
    fn argmax_ties_pick_lowest() {
        assert_eq!(argmax(&[0.2, 0.4, 0.4]), 1);
        assert_eq!(ProbVector::uniform(5).argmax(), 0);
        let top = ProbVector::from_vec_unchecked(vec![0.1, 0.3, 0.3, 0.3]).top_k(2);
        assert_eq!(top, vec![(1, 0.3), (2, 0.3)]);
    }

    #[test]
    fn softmax_saturates_without_overflow() {
        let p = softmax(&[1.0, 0.0], 100.0);
        assert_eq!(p.as_slice()[0], 1.0);
        assert!(p.as_slice()[1] < 1e-40);
        let p = softmax(&[1e6, -1e6], 1e3);
        assert_eq!(p.as_slice(), &[1.0, 0.0]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn vec_strategy() -> impl Strategy<Value = Vec<f64>> {
            prop::collection::vec(-10.0f64..10.0, 2..16)
                .prop_filter("nonzero", |v| norm(v) > 1e-3)
        }

        proptest! {
            #[test]
            fn normalize_idempotent(v in vec_strategy()) {
                let once = normalize(&ev(&v)).unwrap();
                let twice = normalize(&once).unwrap();
                prop_assert!((once.norm() - 1.0).abs() < 1e-9);
                for (a, b) in once.as_slice().iter().zip(twice.as_slice()) {
                    prop_assert!((a - b).abs() < 1e-9);
                }
            }

            #[test]
            fn cosine_scale_invariant(
                pair in (2usize..12).prop_flat_map(|d| (
                    prop::collection::vec(-5.0f64..5.0, d),
                    prop::collection::vec(-5.0f64..5.0, d),
                )),
                a in 0.01f64..100.0,
                b in 0.01f64..100.0,
            ) {
                let (u, v) = pair;
                prop_assume!(norm(&u) > 1e-3 && norm(&v) > 1e-3);
                let (u, v) = (ev(&u), ev(&v));
                let base = cosine(&u, &v).unwrap();
                let scaled = cosine(&u.scaled(a), &v.scaled(b)).unwrap();
                prop_assert!((base - scaled).abs() < 1e-9);
                prop_assert!((-1.0..=1.0).contains(&base));
            }
        }
    }
}
