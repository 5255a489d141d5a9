pub mod angle;
pub mod bench;
pub mod codec;
pub mod equivariance;
pub mod error;
pub mod metrics;
pub mod model;
pub mod resample;
pub mod rng;
pub mod shear;
pub mod synth;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{Image, SceneTensor, Tensor};
