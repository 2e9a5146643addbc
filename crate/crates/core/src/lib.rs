pub mod augment;
pub mod autodiff;
pub mod checkpoint;
pub mod codebook;
pub mod codec;
pub mod config;
pub mod datagen;
pub mod dynamics;
pub mod encoder;
pub mod error;
pub mod fft;
pub mod grid;
pub mod metrics;
pub mod optim;
pub mod parallel;
pub mod params;
pub mod pipeline;
pub mod rng;
pub mod tensor;

pub use error::{Result, SparkError};
pub use tensor::Tensor;
