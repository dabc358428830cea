//! Conditional autoregressive seam generator.

pub mod checkpoint;
pub mod config;
pub mod generate;
pub mod model;
pub mod synth;
pub mod tape;
pub mod train;

pub use checkpoint::Checkpoint;
pub use config::{Depth, GenerationConfig, ModelConfig, TrainConfig, RATIO_ADVISORY};
pub use generate::{generate, Generated};
pub use model::{Model, ParamStore, ShapeEmbedding};
pub use synth::{make_synthetic_dataset, Family, SyntheticShape};
pub use train::{Augmentation, LossRecord, TrainExample, Trainer};
