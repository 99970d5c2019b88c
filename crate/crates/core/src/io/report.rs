//! Run reports and prediction lines.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::engine::{PredictionRecord, PredictionSink};
use crate::error::Result;
use crate::model::Config;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeCounters {
    /// Examples whose fused output was gated to the text branch by warm-up.
    pub warmup: u64,
    /// Examples past the warm-up boundary.
    pub adapted: u64,
    /// Examples with no projectable view.
    pub cluster_suppressed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: Config,
    pub n_examples: u64,
    pub n_labeled: u64,
    pub n_correct: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top1_accuracy: Option<f64>,
    pub post_warmup_labeled: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub post_warmup_accuracy: Option<f64>,
    pub warmup_boundary: u64,
    pub mode_counters: ModeCounters,
    pub class_counts: Vec<u64>,
    pub centroid_norms: Vec<f64>,
    pub degenerate_views: u64,
    pub skipped_updates: u64,
    /// Wall-clock time; the only field that varies between identical runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_ms: Option<u64>,
}

impl RunReport {
    /// The report with wall-clock timing removed.
    pub fn without_timing(&self) -> RunReport {
        RunReport {
            duration_ms: None,
            ..self.clone()
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// One line of the predictions JSONL stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionLine {
    pub example_id: u64,
    pub predicted_class: usize,
    pub fused_probs_top5: Vec<ClassProb>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassProb {
    pub class: usize,
    pub prob: f64,
}

impl From<&PredictionRecord> for PredictionLine {
    fn from(p: &PredictionRecord) -> Self {
        Self {
            example_id: p.example_id,
            predicted_class: p.predicted_class,
            fused_probs_top5: p
                .fused
                .top_k(5)
                .into_iter()
                .map(|(class, prob)| ClassProb { class, prob })
                .collect(),
        }
    }
}

/// Writes one JSON object per prediction.
pub struct JsonlSink<W: Write> {
    out: W,
    lines: u64,
}

impl<W: Write> JsonlSink<W> {
    pub fn new(out: W) -> Self {
        Self { out, lines: 0 }
    }

    pub fn lines(&self) -> u64 {
        self.lines
    }

    pub fn into_inner(mut self) -> Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

impl<W: Write> PredictionSink for JsonlSink<W> {
    fn emit(&mut self, prediction: &PredictionRecord) -> Result<()> {
        serde_json::to_writer(&mut self.out, &PredictionLine::from(prediction))?;
        self.out.write_all(b"\n")?;
        self.lines += 1;
        Ok(())
    }
}
