//! Numerical engine for Loewner–Kufarev evolutions driven by absolutely
//! continuous measure families.
//!
//! The crate is organised bottom-up:
//!
//! * [`numerics`]: circle and planar grids, spectral calculus, RK4, Dirichlet quadrature.
//! * [`measure`]: driving measures, local and total energies, mollification.
//! * [`herglotz`]: Poisson/Herglotz integrals and the α-field.
//! * [`chain`]: forward and backward flows, boundary chains, measure recovery.
//! * [`foliation`]: leaves, nesting checks and the winding field.
//! * [`energy`]: duality reports and energies of curves with closed-form maps.
//! * [`isometry`]: Green's function dynamics and the ι/κ operators.
//! * [`transform`]: conformal distortion and time reversal of foliations.
//! * [`io`]: configuration parsing and CSV/PGM/SVG/JSON writers.
//! * [`verify`]: the bundled acceptance suite.

pub mod chain;
pub mod energy;
pub mod error;
pub mod foliation;
pub mod herglotz;
pub mod io;
pub mod isometry;
pub mod measure;
pub mod numerics;
pub mod transform;
pub mod verify;

pub use chain::{ChainSample, Driver, FlowResult, FlowSettings};
pub use energy::{AnalyticCurve, EnergyReport};
pub use error::{Error, Result};
pub use foliation::{Foliation, Leaf, WindingField};
pub use herglotz::HerglotzEvaluator;
pub use isometry::CylinderFunction;
pub use measure::{DensityKind, DensitySegment, DrivingMeasure};
pub use numerics::{CircleGrid, GridSpec, PlanarField, TimeGrid, C64};
pub use transform::{AnalyticGerm, ReversedChain};

/// Version string embedded in every output file.
pub const VERSION: &str = concat!("kufarev ", env!("CARGO_PKG_VERSION"));
