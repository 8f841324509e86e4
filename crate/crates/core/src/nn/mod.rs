//! A small reverse-mode autodiff engine with the restoration operators.
//!
//! [`Graph`] is a tape: every op appends a node holding its value and what
//! the backward pass needs, and [`Graph::backward`] sweeps it in reverse,
//! accumulating into the gradient buffers of trainable leaves.

mod conv;
pub mod gradcheck;
mod graph;
mod layers;
mod loss;
mod real;
mod spectral;
mod tensor;

pub use conv::Padding;
pub use gradcheck::{gradcheck, Component, GradcheckReport};
pub use graph::{Graph, Var};
pub use layers::{Conv2dLayer, Layer, SvaoLayer, SveoLayer, SVAO_EPS};
pub use loss::{dec_channel, LossWeights, CHARBONNIER_EPS, DEC_DENOM_FLOOR};
pub use real::Real;
pub use spectral::AmplitudeActivation;
pub use tensor::DiffTensor;
