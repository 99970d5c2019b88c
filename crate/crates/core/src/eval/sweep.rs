//! Hyperparameter grids run over a fixed dataset.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{run_stream, Engine, NullSink};
use crate::error::Result;
use crate::model::{AggregationKind, ClassModel, Config, Mode, StreamRecord};

/// Axis values to sweep; absent axes stay at the base config's value.
///
/// Cells are the cartesian product in field order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepGrid {
    pub base: Config,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub views: Vec<usize>,
    pub aggregation: Vec<AggregationKind>,
    pub temperature: Vec<f64>,
    pub mode: Vec<Mode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// `(axis, value)` pairs for the swept axes, in grid order.
    pub axes: Vec<(String, String)>,
    pub config: Config,
    pub accuracy: Option<f64>,
    pub post_warmup_accuracy: Option<f64>,
    pub error: Option<String>,
}

impl SweepGrid {
    /// Names of the axes with at least one value.
    pub fn axis_names(&self) -> Vec<&'static str> {
        let mut names = Vec::new();
        if !self.alpha.is_empty() {
            names.push("alpha");
        }
        if !self.beta.is_empty() {
            names.push("beta");
        }
        if !self.views.is_empty() {
            names.push("views");
        }
        if !self.aggregation.is_empty() {
            names.push("aggregation");
        }
        if !self.temperature.is_empty() {
            names.push("temperature");
        }
        if !self.mode.is_empty() {
            names.push("mode");
        }
        names
    }

    /// Expands the grid into `(axes, config)` cells.
    pub fn cells(&self) -> Vec<(Vec<(String, String)>, Config)> {
        let mut cells = vec![(Vec::new(), self.base.clone())];
        fn expand<T: Clone + ToString>(
            cells: Vec<(Vec<(String, String)>, Config)>,
            name: &str,
            values: &[T],
            set: impl Fn(&mut Config, T),
        ) -> Vec<(Vec<(String, String)>, Config)> {
            if values.is_empty() {
                return cells;
            }
            let mut out = Vec::with_capacity(cells.len() * values.len());
            for (axes, cfg) in cells {
                for v in values {
                    let mut axes = axes.clone();
                    axes.push((name.to_string(), v.to_string()));
                    let mut cfg = cfg.clone();
                    set(&mut cfg, v.clone());
                    out.push((axes, cfg));
                }
            }
            out
        }
        cells = expand(cells, "alpha", &self.alpha, |c, v| c.alpha = v);
        cells = expand(cells, "beta", &self.beta, |c, v| c.beta = v);
        cells = expand(cells, "views", &self.views, |c, v| c.views = v);
        cells = expand(cells, "aggregation", &self.aggregation, |c, v| c.aggregation = v);
        cells = expand(cells, "temperature", &self.temperature, |c, v| c.temperature = v);
        cells = expand(cells, "mode", &self.mode, |c, v| c.mode = v);
        cells
    }
}

/// Runs every grid cell on a fresh engine; cell failures are recorded, not raised.
pub fn sweep(grid: &SweepGrid, class_model: &ClassModel, records: &[StreamRecord]) -> Result<Vec<SweepRow>> {
    Ok(grid
        .cells()
        .into_par_iter()
        .map(|(axes, config)| {
            let outcome = Engine::new(class_model.clone(), config.clone())
                .and_then(|mut engine| run_stream(&mut engine, records.iter().cloned().map(Ok), &mut NullSink));
            match outcome {
                Ok(report) => SweepRow {
                    axes,
                    config,
                    accuracy: report.top1_accuracy,
                    post_warmup_accuracy: report.post_warmup_accuracy,
                    error: None,
                },
                Err(e) => SweepRow {
                    axes,
                    config,
                    accuracy: None,
                    post_warmup_accuracy: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect())
}

/// CSV with one column per swept axis followed by `accuracy`.
pub fn write_csv<W: Write>(out: W, axis_names: &[&str], rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = axis_names.to_vec();
    header.push("accuracy");
    w.write_record(&header)?;
    for row in rows {
        let mut fields: Vec<String> = row.axes.iter().map(|(_, v)| v.clone()).collect();
        fields.push(row.accuracy.map(|a| a.to_string()).unwrap_or_default());
        w.write_record(&fields)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<W: Write>(out: W, rows: &[SweepRow]) -> Result<()> {
    serde_json::to_writer_pretty(out, rows)?;
    Ok(())
}
