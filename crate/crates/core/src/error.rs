use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("unknown mode: {0}")]
    UnknownMode(String),

    #[error("component index {index} out of range for a {components}-component theory")]
    ComponentOutOfRange { index: usize, components: usize },

    #[error("operation not available for theory {0}")]
    WrongTheory(&'static str),

    #[error("wave packet must be supported on the positive branch only")]
    NegativeBranchPacket,

    #[error("wave packet is not normalized: sum |C|^2 = {0}")]
    UnnormalizedPacket(f64),

    #[error("Fock space dimension {dimension} exceeds the safety cap {cap}")]
    DimensionCap { dimension: usize, cap: usize },

    #[error("time step count overflow ({0} steps requested)")]
    StepOverflow(f64),

    #[error("non-finite entries produced during propagation at t = {0}")]
    NonFinite(f64),

    #[error("two-state model needs (E, V) != (0, 0)")]
    DegenerateTwoState,

    #[error("cross channel {0} is complex-valued and cannot be integrated as a number")]
    CrossChannel(&'static str),

    #[error("{0}")]
    Oracle(String),
}
