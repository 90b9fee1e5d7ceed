//! Numerical laboratory for lattice random walks killed on leaving a convex
//! cone: Green functions, exponential tilts, ladder heights, renewal
//! functions, Martin-boundary harmonic functions and circular-cone exit
//! exponents.

pub mod circular;
pub mod cone;
pub mod error;
pub mod green;
pub mod ladder;
pub(crate) mod linalg;
pub mod martin;
pub mod steplaw;
pub mod suites;
pub mod tilt;

pub use cone::{lattice_window, Cone, LatticeWindow};
pub use error::{Error, Result};
pub use green::{green_dp, green_mc, lazify, martin_kernel, GreenEngine, GreenTable, KilledWalk};
pub use steplaw::{check_communication, Atom, Moments, StepLaw};
pub use tilt::{direction_of, tilt_solve, tilted_law, TiltSolution};
