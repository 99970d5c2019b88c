pub mod baft;
pub mod report;

pub use baft::{read_dataset, write_dataset, BaftHeader, DatasetReader};
pub use report::{JsonlSink, PredictionLine, RunReport};
