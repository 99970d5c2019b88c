//! Online clustering of class centroids in the projected space.
//!
//! Centroids start at the projected text embeddings. Each assignment to class
//! `j` folds the example in with `w_j ← normalize(k_j w_j + v̂)`, `k_j ← k_j + 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ClassModel;
use crate::projection::Projector;
use crate::vector::{check_dim, dot, norm, EmbeddingVector, ZERO_NORM_TOL};

#[derive(Debug, Clone, PartialEq)]
pub struct CentroidBank {
    centroids: Vec<EmbeddingVector>,
    counts: Vec<f64>,
    total_updates: u64,
    skipped_updates: u64,
}

/// Snapshot of bank state for reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankDiagnostics {
    pub counts: Vec<u64>,
    pub centroid_norms: Vec<f64>,
    pub total_updates: u64,
    pub skipped_updates: u64,
}

/// Initializes centroids at `P*(t_j)` with every count at `prior_count`.
pub fn init_centroids(proj: &Projector, class_model: &ClassModel, prior_count: f64) -> Result<CentroidBank> {
    check_dim(proj.dim(), class_model.dim())?;
    let centroids = class_model
        .unit_text_embeddings()
        .iter()
        .enumerate()
        .map(|(j, t)| {
            proj.project(t).map_err(|e| match e {
                Error::DegenerateProjection { .. } => Error::DegenerateProjection { class: Some(j) },
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    CentroidBank::from_parts(centroids, vec![prior_count; class_model.class_count()])
}

impl CentroidBank {
    /// Builds a bank from explicit unit centroids and counts.
    pub fn from_parts(centroids: Vec<EmbeddingVector>, counts: Vec<f64>) -> Result<Self> {
        if centroids.is_empty() || centroids.len() != counts.len() {
            return Err(Error::InvalidConfig("centroid and count lengths differ".into()));
        }
        let dim = centroids[0].dim();
        for c in &centroids {
            check_dim(dim, c.dim())?;
            if (c.norm() - 1.0).abs() > 1e-6 {
                return Err(Error::InvalidConfig("centroids must have unit norm".into()));
            }
        }
        if counts.iter().any(|&k| !(k >= 0.0) || k.fract() != 0.0) {
            return Err(Error::InvalidConfig("counts must be non-negative integers".into()));
        }
        Ok(Self {
            centroids,
            counts,
            total_updates: 0,
            skipped_updates: 0,
        })
    }

    pub fn class_count(&self) -> usize {
        self.centroids.len()
    }

    pub fn dim(&self) -> usize {
        self.centroids[0].dim()
    }

    pub fn centroids(&self) -> &[EmbeddingVector] {
        &self.centroids
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn total_updates(&self) -> u64 {
        self.total_updates
    }

    pub fn skipped_updates(&self) -> u64 {
        self.skipped_updates
    }

    /// Folds `v_hat` into centroid `class_idx`.
    ///
    /// On exact cancellation the bank is left unchanged, the skip is tallied
    /// and `ZeroVector` is returned.
    pub fn update(&mut self, class_idx: usize, v_hat: &EmbeddingVector) -> Result<()> {
        let classes = self.class_count();
        if class_idx >= classes {
            return Err(Error::ClassOutOfRange { index: class_idx, classes });
        }
        check_dim(self.dim(), v_hat.dim())?;
        let k = self.counts[class_idx];
        let sum: Vec<f64> = self.centroids[class_idx]
            .as_slice()
            .iter()
            .zip(v_hat.as_slice())
            .map(|(w, v)| k * w + v)
            .collect();
        let n = norm(&sum);
        if !(n >= ZERO_NORM_TOL) {
            self.skipped_updates += 1;
            return Err(Error::ZeroVector);
        }
        self.centroids[class_idx] = EmbeddingVector::from_vec_unchecked(sum.into_iter().map(|x| x / n).collect());
        self.counts[class_idx] = k + 1.0;
        self.total_updates += 1;
        Ok(())
    }

    /// Cosine of `v_hat` against every centroid.
    pub fn similarities(&self, v_hat: &EmbeddingVector) -> Result<Vec<f64>> {
        check_dim(self.dim(), v_hat.dim())?;
        let n = v_hat.norm();
        if !(n >= ZERO_NORM_TOL) {
            return Err(Error::ZeroVector);
        }
        // Centroids are unit by invariant.
        Ok(self
            .centroids
            .iter()
            .map(|w| (dot(w.as_slice(), v_hat.as_slice()) / n).clamp(-1.0, 1.0))
            .collect())
    }

    pub fn diagnostics(&self) -> BankDiagnostics {
        BankDiagnostics {
            counts: self.counts.iter().map(|&k| k as u64).collect(),
            centroid_norms: self.centroids.iter().map(EmbeddingVector::norm).collect(),
            total_updates: self.total_updates,
            skipped_updates: self.skipped_updates,
        }
    }
}

/// Free-function form of [`CentroidBank::update`].
pub fn update_centroid(bank: &mut CentroidBank, class_idx: usize, v_hat: &EmbeddingVector) -> Result<()> {
    bank.update(class_idx, v_hat)
}

/// Free-function form of [`CentroidBank::similarities`].
pub fn centroid_similarities(bank: &CentroidBank, v_hat: &EmbeddingVector) -> Result<Vec<f64>> {
    bank.similarities(v_hat)
}
