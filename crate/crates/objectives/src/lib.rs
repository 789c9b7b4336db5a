//! The three benchmark objectives with their instance types, derivative
//! routes, text formats and deterministic random generation.

pub mod ba;
pub mod datagen;
pub mod engine;
pub mod error;
pub mod gmm;
pub mod ht;
pub mod io;
pub mod rng;

pub use engine::DerivEngine;
pub use error::{ObjResult, ObjectiveError};
