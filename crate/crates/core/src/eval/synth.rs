//! Synthetic embedding streams with separable classes and misaligned text.
//!
//! Each class has a unit mean direction; examples scatter around it with
//! tangent Gaussian noise of scale `1/√kappa`, and views add isotropic noise
//! on top. Text embeddings are the class means rotated away by a fixed angle
//! inside a random plane, so a text-only classifier is imperfect while the
//! visual clusters stay well separated.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ClassModel, StreamRecord};
use crate::vector::{dot, EmbeddingVector};

/// Maximum pairwise cosine allowed between class means.
pub const MAX_MEAN_COSINE: f64 = 0.5;
const PLACEMENT_ATTEMPTS: usize = 2000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub classes: usize,
    pub dim: usize,
    /// Concentration of examples around their class mean (`inf` = no scatter).
    pub kappa: f64,
    pub text_rotation_deg: f64,
    pub n_examples: usize,
    pub views: usize,
    /// Norm of the per-view perturbation relative to the unit base vector.
    pub view_noise: f64,
    /// Log-normal spread of per-view noise scales; 0 gives every view the same scale.
    pub view_noise_spread: f64,
    /// Zipf exponent over class frequencies; 0 is uniform.
    pub label_skew: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            classes: 20,
            dim: 64,
            kappa: 30.0,
            text_rotation_deg: 35.0,
            n_examples: 2000,
            views: 8,
            view_noise: 0.5,
            view_noise_spread: 0.0,
            label_skew: 0.0,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.classes < 2 || self.dim < 2 {
            return bad(format!("need classes >= 2 and dim >= 2, got {} and {}", self.classes, self.dim));
        }
        if !(self.kappa > 0.0) {
            return bad(format!("kappa must be positive, got {}", self.kappa));
        }
        if !(0.0..90.0).contains(&self.text_rotation_deg) {
            return bad(format!("text rotation must lie in [0, 90), got {}", self.text_rotation_deg));
        }
        if self.views < 1 {
            return bad("views must be at least 1".into());
        }
        if !(self.view_noise >= 0.0) || !self.view_noise.is_finite() {
            return bad(format!("view noise must be non-negative, got {}", self.view_noise));
        }
        if !(self.view_noise_spread >= 0.0) || !self.view_noise_spread.is_finite() {
            return bad(format!("view noise spread must be non-negative, got {}", self.view_noise_spread));
        }
        if !(self.label_skew >= 0.0) || !self.label_skew.is_finite() {
            return bad(format!("label skew must be non-negative, got {}", self.label_skew));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub class_model: ClassModel,
    pub records: Vec<StreamRecord>,
    /// Ground-truth unit class means.
    pub means: Vec<EmbeddingVector>,
}

fn gaussian(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

fn unit(mut v: Vec<f64>) -> Vec<f64> {
    let n = dot(&v, &v).sqrt();
    v.iter_mut().for_each(|x| *x /= n);
    v
}

/// Rounds through f32 so in-memory data equals what the file format stores.
fn stored(v: Vec<f64>) -> EmbeddingVector {
    EmbeddingVector::from_vec_unchecked(v.into_iter().map(|x| f64::from(x as f32)).collect())
}

/// Removes the component of `v` along unit `axis`.
fn reject(mut v: Vec<f64>, axis: &[f64]) -> Vec<f64> {
    let c = dot(&v, axis);
    v.iter_mut().zip(axis).for_each(|(x, a)| *x -= c * a);
    v
}

pub fn synth_generate(spec: &SynthSpec) -> Result<SynthDataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (classes, dim) = (spec.classes, spec.dim);

    let mut means: Vec<Vec<f64>> = Vec::with_capacity(classes);
    for _ in 0..classes {
        let placed = (0..PLACEMENT_ATTEMPTS).find_map(|_| {
            let cand = unit(gaussian(&mut rng, dim));
            means
                .iter()
                .all(|m| dot(m, &cand) < MAX_MEAN_COSINE)
                .then_some(cand)
        });
        match placed {
            Some(m) => means.push(m),
            None => return Err(Error::InfeasibleSeparation { classes, dim }),
        }
    }

    let theta = spec.text_rotation_deg.to_radians();
    let text: Vec<EmbeddingVector> = means
        .iter()
        .map(|m| {
            let u = unit(reject(gaussian(&mut rng, dim), m));
            // Raw text embeddings are not unit norm; scale to exercise normalization.
            let scale = 0.5 + 0.5 * rand::Rng::random::<f64>(&mut rng);
            stored(
                m.iter()
                    .zip(&u)
                    .map(|(a, b)| scale * (theta.cos() * a + theta.sin() * b))
                    .collect(),
            )
        })
        .collect();
    let class_model = ClassModel::new(text, None)?;

    let freqs: Vec<f64> = (0..classes).map(|j| ((j + 1) as f64).powf(-spec.label_skew)).collect();
    let picker = WeightedIndex::new(&freqs).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let sigma = if spec.kappa.is_infinite() { 0.0 } else { 1.0 / spec.kappa.sqrt() };
    let view_sigma = spec.view_noise / (dim as f64).sqrt();

    let records = (0..spec.n_examples)
        .map(|i| {
            let label = picker.sample(&mut rng);
            let m = &means[label];
            let tangent = reject(gaussian(&mut rng, dim), m);
            let base = unit(m.iter().zip(&tangent).map(|(a, t)| a + sigma * t).collect());
            let mut views = Vec::with_capacity(spec.views);
            views.push(stored(base.clone()));
            for _ in 1..spec.views {
                let scale = if spec.view_noise_spread > 0.0 {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    view_sigma * (spec.view_noise_spread * z).exp()
                } else {
                    view_sigma
                };
                let noise = gaussian(&mut rng, dim);
                views.push(stored(unit(
                    base.iter().zip(&noise).map(|(b, n)| b + scale * n).collect(),
                )));
            }
            StreamRecord {
                example_id: i as u64,
                label: Some(label),
                views,
            }
        })
        .collect();

    Ok(SynthDataset {
        class_model,
        records,
        means: means.into_iter().map(EmbeddingVector::from_vec_unchecked).collect(),
    })
}

/// Adds `scale · axis` to every view of every record.
pub fn offset_records(records: &[StreamRecord], axis: &EmbeddingVector, scale: f64) -> Result<Vec<StreamRecord>> {
    records
        .iter()
        .map(|r| {
            let views = r
                .views
                .iter()
                .map(|v| v.add_scaled(scale, axis))
                .collect::<Result<_>>()?;
            Ok(StreamRecord { views, ..r.clone() })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> SynthSpec {
        SynthSpec {
            classes: 5,
            dim: 16,
            n_examples: 100,
            views: 3,
            seed,
            ..SynthSpec::default()
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let a = synth_generate(&small(3)).unwrap();
        let b = synth_generate(&small(3)).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.class_model, b.class_model);
        let c = synth_generate(&small(4)).unwrap();
        assert_ne!(a.records, c.records);
    }

    #[test]
    fn shapes_and_separation() {
        let d = synth_generate(&small(1)).unwrap();
        assert_eq!(d.records.len(), 100);
        assert!(d.records.iter().all(|r| r.views.len() == 3 && r.dim() == 16));
        for (i, a) in d.means.iter().enumerate() {
            for b in &d.means[i + 1..] {
                assert!(a.dot(b) < MAX_MEAN_COSINE);
            }
        }
        // Unit text embeddings sit at the requested angle from their means.
        for (t, m) in d.class_model.unit_text_embeddings().iter().zip(&d.means) {
            assert!((t.dot(m) - 35f64.to_radians().cos()).abs() < 1e-5);
        }
    }

    #[test]
    fn infeasible_separation() {
        let spec = SynthSpec {
            classes: 30,
            dim: 2,
            ..small(0)
        };
        assert!(matches!(synth_generate(&spec), Err(Error::InfeasibleSeparation { .. })));
    }

    #[test]
    fn label_skew_favors_low_classes() {
        let spec = SynthSpec {
            label_skew: 2.0,
            n_examples: 2000,
            views: 1,
            ..small(9)
        };
        let d = synth_generate(&spec).unwrap();
        let zeros = d.records.iter().filter(|r| r.label == Some(0)).count();
        let fours = d.records.iter().filter(|r| r.label == Some(4)).count();
        assert!(zeros > 5 * fours);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(synth_generate(&SynthSpec { kappa: 0.0, ..small(0) }).is_err());
        assert!(synth_generate(&SynthSpec { text_rotation_deg: 90.0, ..small(0) }).is_err());
        assert!(synth_generate(&SynthSpec { views: 0, ..small(0) }).is_err());
    }
}
