//! Subspace projection that aligns visual and text embeddings.
//!
//! The text-embedding matrix `T` (unit columns, `D × J`) is decomposed with an
//! SVD. The leading left singular vector `e_1` is the direction the class
//! embeddings share; it carries no class information and is dropped. Vectors
//! are mapped onto `span(e_2 .. e_k)` and renormalized.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::ClassModel;
use crate::vector::{check_dim, dot, EmbeddingVector};

/// Singular values below `RANK_TOL * σ_max` are treated as null.
pub const RANK_TOL: f64 = 1e-6;
/// Projected norms below this make the projection undefined.
pub const DEGENERATE_TOL: f64 = 1e-8;
/// Singular values this close (relative) to `σ_max` form one tied block.
const TIE_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct Projector {
    dim: usize,
    /// Orthonormal left singular vectors, descending singular value.
    basis: Vec<EmbeddingVector>,
    singular_values: Vec<f64>,
    /// Number of leading basis vectors in the kept range (kept = basis[1..kept_end]).
    kept_end: usize,
    /// Row-major `(kept_end - 1) × dim` copy of the kept basis.
    kept_rows: Vec<f64>,
}

/// Builds the projector from the class model's unit text embeddings.
///
/// Keeps `e_2 ..= e_m` with `m = min(rank, max_rank)` (1-based).
pub fn build_projection(class_model: &ClassModel, max_rank: usize) -> Result<Projector> {
    if max_rank < 2 {
        return Err(Error::InvalidConfig(format!(
            "max projection rank must be at least 2, got {max_rank}"
        )));
    }
    let dim = class_model.dim();
    let units = class_model.unit_text_embeddings();
    let t = DMatrix::from_fn(dim, units.len(), |i, j| units[j].as_slice()[i]);
    let svd = t.svd(true, false);
    let u = svd.u.as_ref().expect("left singular vectors requested");

    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .total_cmp(&svd.singular_values[a])
            .then(a.cmp(&b))
    });
    let sigma_max = svd.singular_values[order[0]];
    let kept: Vec<usize> = order
        .into_iter()
        .filter(|&i| svd.singular_values[i] >= RANK_TOL * sigma_max)
        .collect();
    let rank = kept.len();
    if rank < 2 {
        return Err(Error::RankDeficient { rank });
    }

    let mut basis: Vec<Vec<f64>> = kept.iter().map(|&c| u.column(c).iter().copied().collect()).collect();
    let tied = kept
        .iter()
        .take_while(|&&c| sigma_max - svd.singular_values[c] <= TIE_TOL * sigma_max)
        .count();
    if tied > 1 {
        align_tied_block(&mut basis[..tied], units);
    }
    let basis: Vec<EmbeddingVector> = basis.into_iter().map(EmbeddingVector::from_vec_unchecked).collect();
    let singular_values = kept.iter().map(|&c| svd.singular_values[c]).collect();
    let kept_end = rank.min(max_rank);
    let kept_rows = basis[1..kept_end]
        .iter()
        .flat_map(|e| e.as_slice().iter().copied())
        .collect();

    Ok(Projector {
        dim,
        basis,
        singular_values,
        kept_end,
        kept_rows,
    })
}

/// Rotates a block of tied leading singular vectors so its first vector points
/// along the component of the mean text embedding inside the block.
///
/// Any orthonormal basis of a tied block is an equally valid decomposition;
/// this choice makes `e_1` the direction the classes share, and keeps every
/// text embedding projectable when the classes are mutually orthogonal.
fn align_tied_block(block: &mut [Vec<f64>], units: &[EmbeddingVector]) {
    let dim = block[0].len();
    let mut mean = vec![0.0; dim];
    for t in units {
        for (m, x) in mean.iter_mut().zip(t.as_slice()) {
            *m += x;
        }
    }
    let coords: Vec<f64> = block.iter().map(|e| dot(e, &mean)).collect();
    let n = coords.iter().map(|c| c * c).sum::<f64>().sqrt();
    if n < 1e-12 {
        return;
    }
    // Householder reflection swapping the unit coordinate vector of the mean with f_1.
    let mut w: Vec<f64> = coords.iter().map(|c| c / n).collect();
    w[0] -= 1.0;
    let wn = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    if wn < 1e-15 {
        return;
    }
    w.iter_mut().for_each(|x| *x /= wn);
    let g = block.len();
    let rotated: Vec<Vec<f64>> = (0..g)
        .map(|k| {
            let mut col = vec![0.0; dim];
            for (i, e) in block.iter().enumerate() {
                let h = f64::from(u8::from(i == k)) - 2.0 * w[i] * w[k];
                if h != 0.0 {
                    for (c, x) in col.iter_mut().zip(e) {
                        *c += h * x;
                    }
                }
            }
            col
        })
        .collect();
    block.clone_from_slice(&rotated);
}

impl Projector {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of directions that survived the rank tolerance.
    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[EmbeddingVector] {
        &self.basis
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    /// The removed principal direction.
    pub fn principal_axis(&self) -> &EmbeddingVector {
        &self.basis[0]
    }

    /// `e_2 ..` up to the rank cap.
    pub fn kept_basis(&self) -> &[EmbeddingVector] {
        &self.basis[1..self.kept_end]
    }

    /// 1-based inclusive range of kept basis indices, matching `[e_2, …, e_m]`.
    pub fn kept_range(&self) -> (usize, usize) {
        (2, self.kept_end)
    }

    /// Applies `U'U'ᵀ v` without renormalizing.
    pub fn project_raw(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, v.len())?;
        let mut out = vec![0.0; self.dim];
        for row in self.kept_rows.chunks_exact(self.dim) {
            let c = dot(row, v);
            for (o, e) in out.iter_mut().zip(row) {
                *o += c * e;
            }
        }
        Ok(out)
    }

    /// Projects `v` onto the kept subspace and renormalizes.
    pub fn project(&self, v: &EmbeddingVector) -> Result<EmbeddingVector> {
        let raw = self.project_raw(v.as_slice())?;
        let n = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(n >= DEGENERATE_TOL) {
            return Err(Error::DegenerateProjection { class: None });
        }
        Ok(EmbeddingVector::from_vec_unchecked(
            raw.into_iter().map(|x| x / n).collect(),
        ))
    }

    /// Coordinates of `v` in the kept basis.
    pub fn coordinates(&self, v: &EmbeddingVector) -> Result<Vec<f64>> {
        check_dim(self.dim, v.dim())?;
        Ok(self
            .kept_rows
            .chunks_exact(self.dim)
            .map(|row| dot(row, v.as_slice()))
            .collect())
    }
}
