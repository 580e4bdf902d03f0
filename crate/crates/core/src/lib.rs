//! Vortex equilibria and spiral waves of the Ginzburg–Landau equation on
//! surfaces of revolution.
//!
//! The crate computes m-armed vortex equilibria `u(s) e^{imφ}` by regularized
//! shooting, certifies their Morse indices through a Sturm–Liouville solver,
//! continues them to rotating spiral waves of the complex equation, and builds
//! the heteroclinic connection graph of the global attractor, which can be
//! cross-checked by direct time integration.

pub mod attractor;
pub mod equilibria;
pub mod evolve;
pub mod error;
pub mod fd;
pub mod geometry;
pub mod interp;
pub mod linalg;
pub mod ode;
pub mod roots;
pub mod shooting;
pub mod spiral;
pub mod sturm;

pub use attractor::{connection_graph, is_chafee_infante, ConnectionGraph};
pub use equilibria::{diagram, solve_all, BifurcationDiagram, EquilibriumSet, SolveOptions, VortexEquilibrium};
pub use error::{Error, Result};
pub use evolve::{harvest, EvolutionTrace, HarvestReport};
pub use geometry::{make_custom, make_disk, make_sphere, regularizer, Regularizer, Surface, SurfaceConfig, SurfaceKind};
pub use shooting::{Parity, ScanConfig, Shooter};
pub use spiral::{kernel_dimension_check, sweep, SpiralWave};
pub use sturm::{bifurcation_points, EigenProblem, Potential};

/// Library version embedded in artifacts.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
