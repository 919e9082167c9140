//! Catchment records, ingestion, normalization, example and batch
//! construction, and the synthetic generator.

mod batch;
mod csv_io;
mod dataset;
mod flags;
mod frames;
mod normalize;
pub mod split;
pub mod synth;
pub mod variables;

pub use batch::{Batch, BatchSampler};
pub use csv_io::{STATIC_FILE, dynamic_csv_path, read_dataset_dir, read_dynamic_csv, read_static_csv, write_dataset_dir};
pub use dataset::CatchmentDataset;
pub use flags::{apply_flag_masking, draw_masks};
pub use frames::{Features, PreparedCatchment, PreparedData, Selection, TrainingExample};
pub use normalize::{MeanStd, NormalizationStats};
pub use split::{SplitPlan, YearRole};
pub use synth::{SynthConfig, simulate_catchments, synthesize_catchments};
