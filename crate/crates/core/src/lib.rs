//! Cloth simulation with time-dependent internal friction and hardening plasticity.
//!
//! The simulator discretizes cloth as a triangle mesh with hinge bending and an
//! orthotropic StVK membrane, integrates with one linearized implicit Euler step
//! per frame, and layers two hysteretic laws on top of the elastic response:
//! a shifting-anchor friction whose stick threshold grows with dwell time, and a
//! plastic rest-state drift whose hardening relaxes while the deformation is held.

pub mod analysis;
pub mod baselines;
pub mod contact;
pub mod elastic;
pub mod error;
pub mod friction;
pub mod inelastic;
pub mod material;
pub mod mesh;
pub mod obj;
pub mod plasticity;
pub mod scenario;
pub mod solver;
pub mod sparse;

pub use error::{Error, Result};

pub type Vec2 = nalgebra::Vector2<f64>;
pub type Vec3 = nalgebra::Vector3<f64>;
pub type Mat2 = nalgebra::Matrix2<f64>;
pub type Mat3 = nalgebra::Matrix3<f64>;

/// Sign with `sign(0) == 0`.
#[inline]
pub(crate) fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}
