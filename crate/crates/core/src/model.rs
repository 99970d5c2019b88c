//! Class model, stream records and run configuration.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vector::{check_dim, normalize, EmbeddingVector};

/// Zero-shot classifier built from per-class text embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassModel {
    text_embeddings: Vec<EmbeddingVector>,
    unit_text_embeddings: Vec<EmbeddingVector>,
    class_names: Option<Vec<String>>,
}

impl ClassModel {
    /// `text_embeddings` are the raw multi-template averages; they need not be unit norm.
    pub fn new(text_embeddings: Vec<EmbeddingVector>, class_names: Option<Vec<String>>) -> Result<Self> {
        if text_embeddings.len() < 2 {
            return Err(Error::InvalidConfig(format!(
                "need at least 2 classes, got {}",
                text_embeddings.len()
            )));
        }
        let dim = text_embeddings[0].dim();
        if dim < 2 {
            return Err(Error::InvalidConfig(format!("dimension must be at least 2, got {dim}")));
        }
        for t in &text_embeddings {
            check_dim(dim, t.dim())?;
        }
        if let Some(names) = &class_names {
            if names.len() != text_embeddings.len() {
                return Err(Error::InvalidConfig(format!(
                    "{} class names for {} classes",
                    names.len(),
                    text_embeddings.len()
                )));
            }
        }
        let unit_text_embeddings = text_embeddings
            .iter()
            .enumerate()
            .map(|(j, t)| {
                normalize(t).map_err(|_| Error::InvalidConfig(format!("text embedding {j} is zero")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            text_embeddings,
            unit_text_embeddings,
            class_names,
        })
    }

    pub fn class_count(&self) -> usize {
        self.text_embeddings.len()
    }

    pub fn dim(&self) -> usize {
        self.text_embeddings[0].dim()
    }

    pub fn text_embeddings(&self) -> &[EmbeddingVector] {
        &self.text_embeddings
    }

    pub fn unit_text_embeddings(&self) -> &[EmbeddingVector] {
        &self.unit_text_embeddings
    }

    pub fn class_names(&self) -> Option<&[String]> {
        self.class_names.as_deref()
    }
}

/// One test example: its label (if known) and `B` view embeddings.
///
/// View 0 is the un-augmented image.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamRecord {
    pub example_id: u64,
    pub label: Option<usize>,
    pub views: Vec<EmbeddingVector>,
}

impl StreamRecord {
    pub fn new(example_id: u64, label: Option<usize>, views: Vec<EmbeddingVector>) -> Result<Self> {
        if views.is_empty() {
            return Err(Error::InvalidConfig("a record needs at least one view".into()));
        }
        let dim = views[0].dim();
        for v in &views {
            check_dim(dim, v.dim())?;
        }
        Ok(Self {
            example_id,
            label,
            views,
        })
    }

    pub fn dim(&self) -> usize {
        self.views[0].dim()
    }
}

/// Which branches contribute to the final prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Text-embedding predictions only.
    Te,
    /// Online-clustering predictions only (text during warm-up).
    Oc,
    /// Both branches, Rényi-weighted views, β fusion.
    Full,
    /// Both branches with plain view averaging.
    Avg,
}

/// View weighting used to merge per-view predictions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregationKind {
    Uniform,
    MaxProb,
    EntropyThreshold,
    NormEntropy,
    Renyi,
}

macro_rules! str_enum {
    ($ty:ty { $($name:literal => $variant:expr),+ $(,)? }) => {
        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s.to_ascii_lowercase().as_str() {
                    $($name => Ok($variant),)+
                    other => Err(Error::InvalidConfig(format!(
                        "unknown {} '{other}'", stringify!($ty)
                    ))),
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                let name = match self { $(v if *v == $variant => $name,)+ _ => unreachable!() };
                f.write_str(name)
            }
        }
    };
}

str_enum!(Mode {
    "te" => Mode::Te,
    "oc" => Mode::Oc,
    "full" => Mode::Full,
    "avg" => Mode::Avg,
});

str_enum!(AggregationKind {
    "uniform" => AggregationKind::Uniform,
    "max_prob" => AggregationKind::MaxProb,
    "entropy_threshold" => AggregationKind::EntropyThreshold,
    "norm_entropy" => AggregationKind::NormEntropy,
    "renyi" => AggregationKind::Renyi,
});

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    /// Rényi order.
    pub alpha: f64,
    /// Text vs clustering balance.
    pub beta: f64,
    /// Softmax scale applied to cosine similarities.
    pub temperature: f64,
    /// Warm-up length in multiples of the class count.
    pub warmup_multiplier: f64,
    pub max_projection_rank: usize,
    /// Number of leading views used per record (capped at what the record has).
    pub views: usize,
    pub mode: Mode,
    pub aggregation: AggregationKind,
    /// Keep fraction for `EntropyThreshold`.
    pub keep_fraction: f64,
    /// Initial assignment count for every centroid.
    pub prior_count: f64,
    pub seed: u64,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            beta: 2.0,
            temperature: 100.0,
            warmup_multiplier: 10.0,
            max_projection_rank: 150,
            views: 64,
            mode: Mode::Full,
            aggregation: AggregationKind::Renyi,
            keep_fraction: 0.1,
            prior_count: 0.0,
            seed: 0,
        }
    }
}

impl Config {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidAlpha(self.alpha));
        }
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return bad(format!("beta must be positive and finite, got {}", self.beta));
        }
        if !(self.temperature > 0.0) || !self.temperature.is_finite() {
            return bad(format!("temperature must be positive, got {}", self.temperature));
        }
        if !(self.warmup_multiplier >= 0.0) || !self.warmup_multiplier.is_finite() {
            return bad(format!(
                "warmup multiplier must be non-negative, got {}",
                self.warmup_multiplier
            ));
        }
        if self.max_projection_rank < 2 {
            return bad(format!(
                "max projection rank must be at least 2, got {}",
                self.max_projection_rank
            ));
        }
        if self.views == 0 {
            return bad("views must be at least 1".into());
        }
        if !(self.keep_fraction > 0.0 && self.keep_fraction <= 1.0) {
            return bad(format!("keep fraction must lie in (0, 1], got {}", self.keep_fraction));
        }
        if !(self.prior_count >= 0.0) || self.prior_count.fract() != 0.0 {
            return bad(format!(
                "prior count must be a non-negative integer, got {}",
                self.prior_count
            ));
        }
        Ok(())
    }

    /// Number of examples for which clustering is kept out of the fused output.
    pub fn warmup_limit(&self, classes: usize) -> u64 {
        (self.warmup_multiplier * classes as f64).ceil() as u64
    }
}
