//! Temporal block: windows over per-frame features, the convolution stack, the
//! end-to-end network with both encoders, and training.

pub mod model;
pub mod net;
pub mod store;
pub mod train;
pub mod window;

pub use model::{predict, tcn_forward, TcnConfig, TcnModel};
pub use net::{ForceNet, NetConfig, Variant};
pub use store::FrameStore;
pub use window::{build_windows, window_centers, Window};
pub use train::{train, EpochRecord, TrainConfig, TrainOutcome};
