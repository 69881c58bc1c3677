//! Linear bound propagation through the network over a simplex.
//!
//! [`value`] builds x-affine enclosures of every pre-activation by backward
//! substitution; [`jacobian`] reuses those relaxations to enclose `∂ℬ/∂x`.

pub mod jacobian;
pub mod value;

pub use jacobian::{
    jacobian_intervals, layer_jacobian_relaxation, next_layer_jacobian_in_prev_coords,
    propagate_jacobian_bounds, JacobianEnclosure, Reference,
};
pub use value::{
    preactivation_intervals, propagate_value_bounds, propagate_value_bounds_within, LayerBounds, ValueBounds,
};
