//! Triangle-mesh correspondence with convolutions on the dual graph.
//!
//! Every face of a closed manifold triangle mesh becomes a node with exactly
//! three neighbors. Networks built from [`nn::DualConv`] layers run on those
//! nodes, then average onto vertices and classify each vertex into a label of
//! a reference shape.

pub mod error;
pub mod geom;
pub mod mesh;
pub mod dual;
pub mod features;
pub mod nn;
pub mod train;
pub mod decimate;
pub mod geodesic;
pub mod persist;
pub mod selftest;

pub use error::{Error, Result};
