//! The streaming adaptation loop.
//!
//! For each example, every view is classified twice: against the unit text
//! embeddings and, after projection, against the online centroids. View
//! predictions are merged per branch, the branches are fused with β, and the
//! predicted class's centroid absorbs the mean projected view.

use std::time::Instant;

use rayon::prelude::*;

use crate::aggregation::{aggregate_views, fuse_branches, view_weights, WeightingScheme};
use crate::clustering::{init_centroids, CentroidBank};
use crate::error::{Error, Result};
use crate::io::report::{ModeCounters, RunReport};
use crate::model::{AggregationKind, ClassModel, Config, Mode, StreamRecord};
use crate::projection::{build_projection, Projector};
use crate::vector::{check_dim, dot, normalize, softmax, EmbeddingVector, ProbVector};

/// Per-example work (views × classes × dim) above which views run in parallel.
const PARALLEL_WORK: usize = 1 << 18;

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRecord {
    pub example_id: u64,
    pub label: Option<usize>,
    pub per_view_text_preds: Vec<ProbVector>,
    /// `None` where the view's projection is degenerate.
    pub per_view_cluster_preds: Vec<Option<ProbVector>>,
    pub text_pred: ProbVector,
    pub cluster_pred: Option<ProbVector>,
    pub fused: ProbVector,
    pub predicted_class: usize,
    pub warmup_active: bool,
}

/// Softmax over `temperature · cos(v, t_j)` using unit text embeddings.
pub fn text_prediction(v: &EmbeddingVector, class_model: &ClassModel, temperature: f64) -> Result<ProbVector> {
    check_dim(class_model.dim(), v.dim())?;
    let unit = normalize(v)?;
    let cos: Vec<f64> = class_model
        .unit_text_embeddings()
        .iter()
        .map(|t| t.dot(&unit).clamp(-1.0, 1.0))
        .collect();
    Ok(softmax(&cos, temperature))
}

/// Softmax over `temperature · cos(v̂, w_j)`.
pub fn cluster_prediction(v_hat: &EmbeddingVector, bank: &CentroidBank, temperature: f64) -> Result<ProbVector> {
    Ok(softmax(&bank.similarities(v_hat)?, temperature))
}

struct ViewOutput {
    text: ProbVector,
    projected: Option<EmbeddingVector>,
    cluster: Option<ProbVector>,
}

/// Engine state: classifier, projector, centroid bank and stream position.
#[derive(Debug, Clone)]
pub struct Engine {
    class_model: ClassModel,
    projector: Projector,
    bank: CentroidBank,
    config: Config,
    examples_seen: u64,
    warmup_limit: u64,
    /// Row-major `J × D` unit text embeddings.
    text_rows: Vec<f64>,
    degenerate_views: u64,
    cluster_suppressed: u64,
}

impl Engine {
    pub fn new(class_model: ClassModel, config: Config) -> Result<Self> {
        config.validate()?;
        let projector = build_projection(&class_model, config.max_projection_rank)?;
        let bank = init_centroids(&projector, &class_model, config.prior_count)?;
        let warmup_limit = config.warmup_limit(class_model.class_count());
        let text_rows = class_model
            .unit_text_embeddings()
            .iter()
            .flat_map(|t| t.as_slice().iter().copied())
            .collect();
        Ok(Self {
            class_model,
            projector,
            bank,
            config,
            examples_seen: 0,
            warmup_limit,
            text_rows,
            degenerate_views: 0,
            cluster_suppressed: 0,
        })
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    pub fn class_model(&self) -> &ClassModel {
        &self.class_model
    }

    pub fn projector(&self) -> &Projector {
        &self.projector
    }

    pub fn bank(&self) -> &CentroidBank {
        &self.bank
    }

    pub fn examples_seen(&self) -> u64 {
        self.examples_seen
    }

    pub fn warmup_limit(&self) -> u64 {
        self.warmup_limit
    }

    pub fn warmup_active(&self) -> bool {
        self.examples_seen < self.warmup_limit
    }

    pub fn degenerate_views(&self) -> u64 {
        self.degenerate_views
    }

    pub fn cluster_suppressed(&self) -> u64 {
        self.cluster_suppressed
    }

    fn scheme(&self) -> WeightingScheme {
        match self.config.mode {
            Mode::Avg => WeightingScheme::uniform(),
            _ => WeightingScheme {
                kind: self.config.aggregation,
                alpha: self.config.alpha,
                keep_fraction: self.config.keep_fraction,
            },
        }
    }

    fn classify_view(&self, view: &EmbeddingVector) -> Result<ViewOutput> {
        let unit = normalize(view)?;
        let dim = self.class_model.dim();
        let cos: Vec<f64> = self
            .text_rows
            .chunks_exact(dim)
            .map(|t| dot(t, unit.as_slice()).clamp(-1.0, 1.0))
            .collect();
        let text = softmax(&cos, self.config.temperature);
        let (projected, cluster) = match self.projector.project(&unit) {
            Ok(v_hat) => {
                let p = cluster_prediction(&v_hat, &self.bank, self.config.temperature)?;
                (Some(v_hat), Some(p))
            }
            Err(Error::DegenerateProjection { .. }) => (None, None),
            Err(e) => return Err(e),
        };
        Ok(ViewOutput {
            text,
            projected,
            cluster,
        })
    }

    /// Runs one example through both branches and updates the bank.
    pub fn process_example(&mut self, record: &StreamRecord) -> Result<PredictionRecord> {
        let classes = self.class_model.class_count();
        let dim = self.class_model.dim();
        if record.views.is_empty() {
            return Err(Error::InvalidConfig("record has no views".into()));
        }
        for v in &record.views {
            check_dim(dim, v.dim())?;
        }
        if let Some(label) = record.label {
            if label >= classes {
                return Err(Error::InvalidLabel {
                    record: record.example_id,
                    label: label as i32,
                });
            }
        }

        let views = &record.views[..self.config.views.min(record.views.len())];
        let outputs: Vec<ViewOutput> = if views.len() * classes * dim >= PARALLEL_WORK {
            views.par_iter().map(|v| self.classify_view(v)).collect::<Result<_>>()?
        } else {
            views.iter().map(|v| self.classify_view(v)).collect::<Result<_>>()?
        };

        let scheme = self.scheme();
        let text_preds: Vec<ProbVector> = outputs.iter().map(|o| o.text.clone()).collect();
        let (text_pred, text_weight) = merge(&text_preds, &scheme)?;

        let defined: Vec<ProbVector> = outputs.iter().filter_map(|o| o.cluster.clone()).collect();
        self.degenerate_views += (outputs.len() - defined.len()) as u64;
        let cluster = if defined.is_empty() {
            self.cluster_suppressed += 1;
            None
        } else {
            Some(merge(&defined, &scheme)?)
        };

        let warmup_active = self.warmup_active();
        let fused = match (self.config.mode, &cluster) {
            (Mode::Te, _) | (_, None) => text_pred.clone(),
            _ if warmup_active => text_pred.clone(),
            (Mode::Oc, Some((p, _))) => p.clone(),
            (Mode::Full | Mode::Avg, Some((p, w))) => {
                fuse_branches(&text_pred, text_weight, p, *w, self.config.beta)
            }
        };
        let predicted_class = fused.argmax();

        let projected: Vec<&EmbeddingVector> = outputs.iter().filter_map(|o| o.projected.as_ref()).collect();
        if !projected.is_empty() {
            let inv = 1.0 / projected.len() as f64;
            let mut mean = vec![0.0; dim];
            for v in &projected {
                for (m, x) in mean.iter_mut().zip(v.as_slice()) {
                    *m += x;
                }
            }
            mean.iter_mut().for_each(|m| *m *= inv);
            match self.bank.update(predicted_class, &EmbeddingVector::from_vec_unchecked(mean)) {
                Ok(()) | Err(Error::ZeroVector) => {}
                Err(e) => return Err(e),
            }
        }
        self.examples_seen += 1;

        Ok(PredictionRecord {
            example_id: record.example_id,
            label: record.label,
            per_view_text_preds: text_preds,
            per_view_cluster_preds: outputs.into_iter().map(|o| o.cluster).collect(),
            text_pred,
            cluster_pred: cluster.map(|(p, _)| p),
            fused,
            predicted_class,
            warmup_active,
        })
    }
}

/// Aggregates view predictions and returns the weight sum alongside.
///
/// A batch whose weights are all zero (every view exactly uniform under
/// normalized entropy) falls back to plain averaging.
fn merge(preds: &[ProbVector], scheme: &WeightingScheme) -> Result<(ProbVector, f64)> {
    let weights = view_weights(preds, scheme)?;
    match aggregate_views(preds, &weights) {
        Ok(p) => Ok((p, weights.iter().sum())),
        Err(Error::AllZeroWeights) if scheme.kind != AggregationKind::Uniform => {
            let ones = vec![1.0; preds.len()];
            Ok((aggregate_views(preds, &ones)?, preds.len() as f64))
        }
        Err(e) => Err(e),
    }
}

/// Receives predictions as the stream is processed.
pub trait PredictionSink {
    fn emit(&mut self, prediction: &PredictionRecord) -> Result<()>;
}

impl PredictionSink for Vec<PredictionRecord> {
    fn emit(&mut self, prediction: &PredictionRecord) -> Result<()> {
        self.push(prediction.clone());
        Ok(())
    }
}

/// Discards predictions.
#[derive(Debug, Default, Clone, Copy)]
pub struct NullSink;

impl PredictionSink for NullSink {
    fn emit(&mut self, _: &PredictionRecord) -> Result<()> {
        Ok(())
    }
}

/// Adapts a closure into a sink.
pub struct FnSink<F>(pub F);

impl<F: FnMut(&PredictionRecord) -> Result<()>> PredictionSink for FnSink<F> {
    fn emit(&mut self, prediction: &PredictionRecord) -> Result<()> {
        (self.0)(prediction)
    }
}

/// Processes `records` in order, forwarding each prediction to `sink`.
///
/// Fails fast: the first bad record aborts the run with its id attached.
pub fn run_stream<I, S>(engine: &mut Engine, records: I, sink: &mut S) -> Result<RunReport>
where
    I: IntoIterator<Item = Result<StreamRecord>>,
    S: PredictionSink + ?Sized,
{
    let start = Instant::now();
    let mut counters = ModeCounters::default();
    let (mut n_examples, mut n_labeled, mut n_correct) = (0u64, 0u64, 0u64);
    let (mut post_labeled, mut post_correct) = (0u64, 0u64);

    for (position, record) in records.into_iter().enumerate() {
        let record = record.map_err(|e| Error::Record {
            example_id: position as u64,
            source: Box::new(e),
        })?;
        let prediction = engine.process_example(&record).map_err(|e| Error::Record {
            example_id: record.example_id,
            source: Box::new(e),
        })?;
        sink.emit(&prediction).map_err(|e| Error::Record {
            example_id: record.example_id,
            source: Box::new(e),
        })?;

        n_examples += 1;
        if prediction.warmup_active {
            counters.warmup += 1;
        } else {
            counters.adapted += 1;
        }
        if prediction.cluster_pred.is_none() {
            counters.cluster_suppressed += 1;
        }
        if let Some(label) = prediction.label {
            let hit = u64::from(label == prediction.predicted_class);
            n_labeled += 1;
            n_correct += hit;
            if !prediction.warmup_active {
                post_labeled += 1;
                post_correct += hit;
            }
        }
    }

    let ratio = |hits: u64, total: u64| (total > 0).then(|| hits as f64 / total as f64);
    let bank = engine.bank().diagnostics();
    Ok(RunReport {
        config: engine.config().clone(),
        n_examples,
        n_labeled,
        n_correct,
        top1_accuracy: ratio(n_correct, n_labeled),
        post_warmup_labeled: post_labeled,
        post_warmup_accuracy: ratio(post_correct, post_labeled),
        warmup_boundary: engine.warmup_limit(),
        mode_counters: counters,
        class_counts: bank.counts,
        centroid_norms: bank.centroid_norms,
        degenerate_views: engine.degenerate_views(),
        skipped_updates: bank.skipped_updates,
        duration_ms: Some(start.elapsed().as_millis() as u64),
    })
}
