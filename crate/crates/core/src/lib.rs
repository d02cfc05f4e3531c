//! Heralded preparation of nonclassical states in a monitored Kerr
//! oscillator: steady states, no-click spectra, photon-counting
//! trajectories and Wigner negativity.

// `!(x > 0.0)` style guards are deliberate: NaN must fail them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod export;
pub mod fock;
pub mod linalg;
pub mod model;
pub mod ode;
pub mod spectral;
pub mod stats;
pub mod steady;
pub mod sweep;
pub mod trajectory;
pub mod wigner;

pub use error::{Error, Result};
pub use fock::{ComplexOperator, DensityMatrix, Parity, StateVector};
pub use model::{Channel, SystemParams};
pub use num_complex::Complex64 as C64;
pub use spectral::{MixedSpectrum, PureSpectrum, RateReport};
pub use steady::SteadyStateResult;
pub use sweep::{NegativityReport, PointReport, PseudoState, Spectrum};
pub use trajectory::{State, Trajectory, TrajectoryOptions};
pub use wigner::{GridSpec, WignerGrid, WignerMinimum};
