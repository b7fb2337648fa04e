//! A numerical laboratory for thermodynamic formalism over subshifts of
//! finite type: Ruelle transfer operators and their RPF eigendata, Gibbs
//! measures and pressure, normalized complex transfer operators with the
//! `||.||_{theta,b}` norm, damping/contraction operators with cone and
//! `L^2` diagnostics, suspension semiflows with correlation measurement,
//! and primitive-orbit / zeta-function asymptotics — all on exact
//! depth-`t` cylinder spaces at desk scale.

pub mod basis;
pub mod complex_transfer;
pub mod contraction;
pub mod error;
pub mod orbits;
pub mod potential;
pub mod rpf;
pub mod subshift;
pub mod suspension;

pub use basis::CylinderBasis;
pub use error::{Error, Result};
pub use potential::{CylinderFunction, PotentialSpec, RealCylinderFunction};
pub use rpf::{Normalization, RpfData, TransferOperator};
pub use subshift::{Cylinder, SubshiftModel, Word};
