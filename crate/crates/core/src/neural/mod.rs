//! From-scratch networks: attention U-Net, reference covariance CNN, losses,
//! optimisers, deterministic training and gradient verification.

pub mod gradcheck;
pub mod loss;
pub mod model;
pub mod optim;
pub mod params;
pub mod refcnn;
pub mod tensor;
pub mod train;
pub mod unet;

pub use gradcheck::{grad_check, GradCheckConfig, GradCheckReport};
pub use loss::{preprocess_target, LossConfig, LossMode};
pub use model::{Evaluation, Model};
pub use optim::OptimizerSpec;
pub use params::{Gradients, ParamEntry, WeightStore};
pub use refcnn::{RefCnn, RefCnnConfig};
pub use tensor::Tensor;
pub use train::{mix_datasets, train, Sample, TrainConfig, TrainReport};
pub use unet::{feature_tensor, NetworkConfig, OutputActivation, UNet, SIGMOID_PRIOR};
