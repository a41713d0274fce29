//! Gaussian continuous-variable states, channels, measurements and
//! entanglement, with simulators for deterministic channel implementation
//! and two-copy distillation protocols.
//!
//! Conventions: `hbar = 1`, vacuum covariance is the identity, quadratures
//! are ordered `(x1, p1, x2, p2, ...)`.

pub mod channels;
pub mod entanglement;
pub mod error;
pub mod io;
pub mod measurements;
pub mod nelder_mead;
pub mod nogo;
pub mod phase;
pub mod protocols;
pub mod scalar;
pub mod state;
pub mod symplectic;

pub use channels::{GaussianChannel, Port};
pub use entanglement::{log_negativity, BipartiteSplit, EntanglementReport};
pub use error::{Error, Result};
pub use measurements::{DyneKind, DyneSpec, MeasurementRecord};
pub use phase::{CovMatrix, QuadVector};
pub use scalar::Real;
pub use state::GaussianState;
pub use symplectic::SymplecticMatrix;

pub type State = GaussianState<f64>;
pub type StateF32 = GaussianState<f32>;
pub type Channel = GaussianChannel<f64>;
pub type ChannelF32 = GaussianChannel<f32>;
pub type Symplectic = SymplecticMatrix<f64>;
pub type SymplecticF32 = SymplecticMatrix<f32>;
pub type Cov = CovMatrix<f64>;
