//! Tensor core for the aggrolab classifiers: a define-by-run reverse-mode
//! tape, the layers the three architectures are built from, Adam and RMSProp,
//! finite-difference gradient checking, and the weights file format.
//!
//! All numeric code is generic over [`Scalar`], so models train in `f32` and
//! the very same code is verified in `f64`.

pub mod error;
pub mod gradcheck;
pub mod graph;
pub mod layers;
pub mod optim;
pub mod params;
pub mod rng;
pub mod scalar;
pub mod suite;
pub mod tensor;
pub mod weights;

pub use error::{NumericsError, Result};
pub use gradcheck::{grad_check, GradCheckOptions, GradCheckReport, TensorCheck};
pub use graph::{sigmoid, softmax, Graph, PoolMode, Var};
pub use layers::{
    bilstm, conv1d_preact, glorot_uniform, lstm_step, spatial_dropout, Mode, ProjectedLstm,
};
pub use optim::{Optimizer, OptimizerConfig, OptimizerKind};
pub use params::{Param, ParamGrads, ParamId, ParamStore};
pub use rng::{rng_stream, Rng};
pub use scalar::Scalar;
pub use suite::{layer_case_names, layer_suite};
pub use tensor::Tensor;
pub use weights::{decode_weights, encode_weights, load_weights, save_weights, WeightsFile};
