//! Bowen-Series boundary maps for Fuchsian groups and numerical thermodynamic formalism:
//! pressure, dimension of the limit set, multifractal spectrum of homological growth
//! rates and large-deviation rate functions.

pub mod automaton;
pub mod bsmap;
pub mod builtins;
pub mod error;
pub mod geometry;
pub mod group;
pub mod ldp;
pub mod markov;
pub mod stats;
pub mod thermo;
pub mod tracing;

pub use error::{Error, Result};
pub use geometry::{Arc, BoundaryPoint, Geodesic, MoebiusTransform};
pub use group::{GroupPresentation, GroupSpec, Orientation};
