//! Differentiation engines and the scalar-generic numeric kernels they run on.
//!
//! Three routes to derivatives, all driven through the [`VectorFn`] trait:
//!
//! - forward mode: [`Dual`] numbers with a fixed block of derivative lanes,
//!   cost proportional to the number of seeded directions
//!   ([`jacobian_forward`], [`gradient_forward`]);
//! - reverse mode: an explicit [`tape::Tape`] recorded once, then swept
//!   backward with any output seed, cost proportional to the number of
//!   output seeds ([`tape::record`], [`tape::gradient_reverse`]);
//! - central finite differences as the inexact baseline ([`grad_fd`],
//!   [`jacobian_fd`]).
//!
//! [`kernels`] holds the shared primitives (logsumexp, the lower-triangular
//! factor assembly, Rodrigues rotation, radial distortion, perspective
//! division, camera projection); [`sparse`] the triplet/CSR containers and
//! seed-matrix compression used for structured Jacobians.

pub mod error;
pub mod fd;
pub mod forward;
pub mod func;
pub mod kernels;
pub mod mat;
pub mod scalar;
pub mod sparse;
pub mod tape;
pub mod tol;

mod dual;

pub use dual::Dual;
pub use error::{AdError, AdResult};
pub use fd::{fd_column, fd_step, grad_fd, jacobian_fd};
pub use forward::{gradient_forward, jacobian_forward};
pub use func::{eval_f64, VectorFn};
pub use mat::Mat;
pub use scalar::Scalar;
pub use sparse::{decompress, PatternEntry, SeedMatrix, SparseJacobian, SparseLayout};
pub use tape::{gradient_reverse, record, AdjointBuffer, Tape, TapeBuilder, Var};
