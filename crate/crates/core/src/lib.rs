//! Trajectory optimization and closed-loop verification of thruster-assisted
//! incline walking for a quadruped reduced-order model.
//!
//! The model is a single rigid body with four massless legs (two hip
//! rotations and a prismatic length each), driven by joint accelerations,
//! ground reaction forces and a resultant thrust at the center of mass.
//! Plans are computed by cubic Hermite collocation with midpoint defects and
//! solved with an augmented-Lagrangian method, then replayed through a
//! compliant Stribeck contact model.

pub mod contact;
pub mod collocation;
pub mod dynamics;
pub mod error;
pub mod integrate;
pub mod nlp;
pub mod pipeline;
pub mod so3;

pub use error::{Error, Result};
