//! Discretized magnetic pseudodifferential operators on truncated periodic
//! grids, with the weight-conjugation, semigroup and eigenfunction-decay
//! diagnostics built on top of them.

pub mod decay;
pub mod error;
mod fft;
pub mod gauge;
pub mod grid;
pub mod harness;
pub mod persist;
pub mod potential;
pub mod quadrature;
pub mod quantize;
pub mod relativistic;
pub mod spectral;
pub mod symbol;

pub use error::{Error, Result};
pub use gauge::{GaugeData, MagneticField};
pub use grid::{Grid, GridFunction};
pub use harness::{run_scenario, verify_suite, ScenarioConfig, ScenarioReport, Suite};
pub use persist::{load_operator, save_operator};
pub use potential::{PotentialSpec, Profile};
pub use quantize::{op_amplitude, op_weyl, OperatorMatrix};
pub use symbol::{HormanderSymbol, SampleBox, SymbolCatalog};

/// Dense complex matrix used for all operators.
pub type CMatrix = nalgebra::DMatrix<num_complex::Complex64>;

/// Dense complex vector.
pub type CVector = nalgebra::DVector<num_complex::Complex64>;

pub use num_complex::Complex64;
