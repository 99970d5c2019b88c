//! Synthetic benchmarks, kNN diagnostics and parameter sweeps.

pub mod knn;
pub mod sweep;
pub mod synth;

pub use knn::knn_eval;
pub use sweep::{sweep, write_csv, write_json, SweepGrid, SweepRow};
pub use synth::{offset_records, synth_generate, SynthDataset, SynthSpec};
