//! Collision invariants of loops of embedded circles in S¹ × S³.

pub mod collide;
pub mod error;
pub mod families;
pub mod geom;
pub mod invariants;
pub mod presentation;
pub mod ring;

pub use error::{Error, Result};
pub use families::{LoopFamily, LoopMap};
pub use ring::Lambda0;
