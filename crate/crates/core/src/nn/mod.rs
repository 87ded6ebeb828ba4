//! Layers with hand-derived backward passes.
//!
//! Every layer follows the same protocol: `forward` caches what the backward
//! pass needs, `backward` consumes the upstream gradient, accumulates into
//! the layer's parameter gradients and returns the gradient w.r.t. its input.

mod adam;
mod dual2primal;
mod dualconv;
pub mod gradcheck;
mod layers;
mod loss;
mod tensor;

use rand::Rng;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use dual2primal::{dual2primal, dual2primal_backward, Dual2PrimalOp};
pub use dualconv::{
    dualconv_backward, dualconv_forward, dualconv_forward_slots, dualconv_inv_backward,
    dualconv_inv_forward, dualconv_max_backward, dualconv_max_forward, gather_neighbors,
    symmetric_neighbor_features, DualConv, DualConvGrads, DualConvKind, DualConvParams,
    DualConvState,
};
pub use layers::{elu, elu_backward, Dropout, Elu, Linear, MeanConv};
pub use loss::softmax_cross_entropy;
pub use tensor::Tensor;

/// A trainable tensor and its gradient accumulator.
#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub value: Tensor,
    pub grad: Tensor,
}

impl Param {
    pub fn new(value: Tensor) -> Self {
        let (r, c) = value.shape();
        Self {
            value,
            grad: Tensor::zeros(r, c),
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::new(Tensor::zeros(rows, cols))
    }

    /// Uniform(-s, s) with s = sqrt(6 / (fan_in + fan_out)); fan_in is the
    /// column count and fan_out the row count.
    pub fn glorot<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Self {
        let s = (6.0 / (rows + cols) as f64).sqrt();
        let data = (0..rows * cols).map(|_| rng.gen_range(-s..s)).collect();
        Self::new(Tensor::from_vec(rows, cols, data).expect("sized"))
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }

    pub fn len(&self) -> usize {
        self.value.data().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
