//! Crate-wide error type.
//!
//! Every variant maps to a stable, machine-readable code string (see
//! [`Error::code`]) so that command-line front ends can serialize failures
//! without matching on display text.

use crate::graph::{Edge, HennebergStep};

/// Result alias used throughout the crate.
pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    // graph
    #[error("a triangulated Laman graph needs at least two vertices, got {0}")]
    TooFewVertices(usize),
    #[error("expected {expected} Henneberg steps, got {got}")]
    WrongStepCount { expected: usize, got: usize },
    #[error("vertex {0} appears more than once in the construction")]
    DuplicateVertex(usize),
    #[error("vertex {vertex} is outside the label range 1..={n}")]
    VertexOutOfRange { vertex: usize, n: usize },
    #[error("step {step:?} attaches to a pair that is not an existing edge")]
    AnchorNotEdge { step: HennebergStep },
    #[error("graph with {n} vertices exceeds the exhaustive bound of {bound}; pass an explicit limit")]
    TooLarge { n: usize, bound: usize },
    #[error("not a subgraph: {0}")]
    NotSubgraph(String),
    #[error("not a triangulated Laman graph: {0}")]
    NotTriangulatedLaman(String),

    // geometry
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("all points coincide; the rotation generator vanishes")]
    DegenerateRotation,

    // control
    #[error("target distance must be positive, got {0}")]
    NonpositiveTarget(f64),
    #[error("missing target for edge {0}")]
    MissingTarget(Edge),
    #[error("strict triangle inequality violated on 3-cycle {0:?}")]
    TriangleInequalityViolated([usize; 3]),
    #[error("condition C1 violated on edge {edge}: {reason}")]
    C1Violated { edge: Edge, reason: String },
    #[error("condition C2 could not be confirmed on edge {edge}")]
    C2Suspect { edge: Edge },
    #[error("agents on edge {0} collide")]
    CollisionOnEdge(Edge),
    #[error("unknown control-law family {0:?}")]
    UnknownLawFamily(String),

    // partition
    #[error("Newton solve for vertex {vertex} left its trust region or did not converge")]
    NewtonDiverged { vertex: usize },
    #[error("part index {index} out of range (partition has {len} parts)")]
    PartIndexOutOfRange { index: usize, len: usize },
    #[error("candidate is not a valid partition: {0}")]
    InvalidPartition(String),

    // spectral
    #[error("matrix is not symmetric (relative asymmetry {0:.3e})")]
    NotSymmetric(f64),
    #[error("part {part} is not an equilibrium of its induced subsystem (gradient norm {norm:.3e})")]
    SubEquilibriumViolated { part: usize, norm: f64 },
    #[error("congruence matrix W is ill-conditioned (condition number {0:.3e})")]
    IllConditionedW(f64),
    #[error("configuration is not a line configuration")]
    NotLineConfiguration,
    #[error("vertex {0} does not have degree two")]
    PreconditionNotDegreeTwo(usize),
    #[error("vertex {0} is not aligned with its two neighbours")]
    PreconditionNotAligned(usize),
    #[error("the dynamics of vertex {vertex} do not vanish (residual {residual:.3e})")]
    PreconditionNotEquilibratedVertex { vertex: usize, residual: f64 },
    #[error("gain on edge {0} is undefined: the edge sits at its target but a nonzero value is required")]
    GainUndefined(Edge),
    #[error("configuration is not an equilibrium (gradient norm {0:.3e})")]
    NotAnEquilibrium(f64),
    #[error("numerical result disagrees with theory: {0}")]
    InconsistentWithTheory(String),

    // dynamics
    #[error("adjacent agents on edge {0} collided during integration")]
    CollisionDetected(Edge),
    #[error("adaptive step size underflowed at t = {0}")]
    StepUnderflow(f64),
    #[error("Newton polishing stalled at gradient norm {0:.3e}")]
    NewtonStalled(f64),
    #[error("invalid integrator settings: {0}")]
    InvalidSettings(String),

    // io
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Stable identifier for the error kind.
    pub fn code(&self) -> &'static str {
        use Error::*;
        match self {
            TooFewVertices(_) => "too_few_vertices",
            WrongStepCount { .. } => "wrong_step_count",
            DuplicateVertex(_) => "duplicate_vertex",
            VertexOutOfRange { .. } => "vertex_out_of_range",
            AnchorNotEdge { .. } => "anchor_not_edge",
            TooLarge { .. } => "too_large",
            NotSubgraph(_) => "not_subgraph",
            NotTriangulatedLaman(_) => "not_triangulated_laman",
            DimensionMismatch { .. } => "dimension_mismatch",
            DegenerateRotation => "degenerate_rotation",
            NonpositiveTarget(_) => "nonpositive_target",
            MissingTarget(_) => "missing_target",
            TriangleInequalityViolated(_) => "triangle_inequality_violated",
            C1Violated { .. } => "c1_violated",
            C2Suspect { .. } => "c2_suspect",
            CollisionOnEdge(_) => "collision_on_edge",
            UnknownLawFamily(_) => "unknown_law_family",
            NewtonDiverged { .. } => "newton_diverged",
            PartIndexOutOfRange { .. } => "part_index_out_of_range",
            InvalidPartition(_) => "invalid_partition",
            NotSymmetric(_) => "not_symmetric",
            SubEquilibriumViolated { .. } => "sub_equilibrium_violated",
            IllConditionedW(_) => "ill_conditioned_w",
            NotLineConfiguration => "not_line_configuration",
            PreconditionNotDegreeTwo(_) => "precondition_not_degree_two",
            PreconditionNotAligned(_) => "precondition_not_aligned",
            PreconditionNotEquilibratedVertex { .. } => "precondition_not_equilibrated_vertex",
            GainUndefined(_) => "gain_undefined",
            NotAnEquilibrium(_) => "not_an_equilibrium",
            InconsistentWithTheory(_) => "inconsistent_with_theory",
            CollisionDetected(_) => "collision_detected",
            StepUnderflow(_) => "step_underflow",
            NewtonStalled(_) => "newton_stalled",
            InvalidSettings(_) => "invalid_settings",
            Parse(_) => "parse_error",
        }
    }
}
