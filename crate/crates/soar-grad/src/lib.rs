//! Dense-tensor numeric core with reverse-mode automatic differentiation.
//!
//! A `Graph` is an append-only tape: every `Tensor` method records one node
//! holding the forward values plus whatever state its adjoint rule needs.
//! `Tensor::backward` on a scalar walks the tape once in reverse, since
//! nodes are already in topological order, and accumulates gradients into
//! shared parents. Element type is generic: f64 for verification (the
//! finite-difference oracle in `grad_check` targets 1e-6 relative error),
//! f32 for training.
//!
//! Graphs are single-threaded by construction; parallelism belongs across
//! graphs, one per batch shard.

mod check;
mod graph;
mod scalar;
mod tensor;

pub use check::{grad_check, GRAD_CHECK_EPS};
pub use graph::Graph;
pub use scalar::Scalar;
pub use tensor::{concat, Tensor};
