//! Gradient formation control on triangulated Laman graphs.
//!
//! The crate covers the whole pipeline from graph construction to stability
//! verdicts:
//!
//! - [`graph`]: triangulated Laman graphs and Henneberg (vertex-add) sequences
//! - [`geometry`]: configurations, the SE(2) action, rigidity predicates
//! - [`control`]: control laws, formation systems, potential/gradient/Hessian
//! - [`partition`]: independent edge partitions and partition-adapted perturbations
//! - [`spectral`]: Hessian signatures, the per-part signature decomposition,
//!   line-configuration matrices, system reduction, stability classification
//! - [`dynamics`]: gradient-flow integration, equilibrium polishing, Monte Carlo
//! - [`io`]: JSON/CSV file formats

// `!(x > 0.0)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod graph;
pub mod io;
pub mod partition;
pub mod spectral;

pub use control::{build_system, build_uniform_system, law_inverse_square, ControlLaw, FormationSystem, LawFamily};
pub use error::{Error, Result};
pub use geometry::{Configuration, FrameworkPredicates, RigidMotion};
pub use graph::{build_from_henneberg, Edge, HennebergStep, TriangulatedLamanGraph};
pub use dynamics::{
    find_equilibrium, integrate, monte_carlo, IntegratorSettings, Method, MonteCarloReport, SimOutcome, TerminalClass,
    Trajectory,
};
pub use partition::{eta_derivative, eta_map, independent_partition, partition_is_coarsest, IndependentPartition};
pub use spectral::{
    classify_orbit, congruence_matrices, enumerate_target_orbits, line_matrices, mbif_signature, reduce_system,
    signature_of, subsystem_equilibrium_check, ReducedSystem, Signature, SpectralReport, StabilityClass,
};
