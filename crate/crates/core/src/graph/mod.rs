//! Tree growth: the attachment rule, the benchmark models and the simulation
//! driver.

mod model;
mod tree;
mod weights;

pub use model::{
    attachment_weights, build, partition_function, select_target, BuildOptions, BuildOutput, Checkpoint,
    ModelKind, Simulation, StepRecord, REBUILD_INTERVAL,
};
pub use tree::AttachmentTree;
pub use weights::{Layout, WeightIndex};
