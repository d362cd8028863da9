//! Datasets, heterogeneity partitioners and the on-disk scenario format.

mod dataset;
mod format;
mod idx;
mod partition;
mod split;
mod synth;

pub use dataset::Dataset;
pub use format::{
    load_scenario, read_client_file, save_scenario, write_client_file, FORMAT_VERSION, MAGIC,
};
pub use idx::{load_idx, parse_idx_images, parse_idx_labels, IdxImages};
pub use partition::{
    assign, label_entropy, materialize, partition, partition_feature_shift, partition_iid,
    partition_pathological, partition_practical, AffineShift, Assignment, ClientData,
    ClientIndices, ClientManifest, Manifest, PartitionKind, PartitionSpec, Scenario, SourceInfo,
};
pub use split::split_train_test;
pub use synth::{synth_gaussian, MEAN_SEPARATION};
