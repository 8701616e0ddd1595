//! On-disk dataset format, stream loading, synchronization and splitting.

pub mod dataset;
pub mod image;
pub mod manifest;
pub mod split;
pub mod sync;

pub use dataset::{load_dataset, Frame, LoadedDataset};
pub use image::{read_pgm16, read_ppm, write_pgm16, write_ppm, DepthImage, RgbImage};
pub use manifest::{parse_manifest, read_manifest, StreamKind, StreamRecord, Streams};
pub use split::{split_dataset, DatasetSplit};
pub use sync::{synchronize, SyncResult, SyncedFrame};
