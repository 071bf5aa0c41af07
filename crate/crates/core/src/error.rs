use thiserror::Error;

/// Errors reported by constructors and operations.
///
/// Cap violations are always hard errors; nothing degrades silently.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum Error {
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("size cap exceeded: {what} needs {needed}, cap is {cap}")]
    CapExceeded {
        what: &'static str,
        needed: u128,
        cap: u128,
    },
    #[error("ring mismatch: expected ring #{expected}, got #{got}")]
    RingMismatch { expected: u32, got: u32 },
    #[error("morphism is not surjective")]
    NotSurjective,
    #[error("morphism is not a small extension: {0}")]
    NotSmallExtension(&'static str),
    #[error("invalid ring data: {0}")]
    InvalidRing(String),
    #[error("invalid morphism: {0}")]
    InvalidMorphism(String),
    #[error("invalid group data: {0}")]
    InvalidGroup(String),
    #[error("map is not a group homomorphism (fails at pair {g}, {h})")]
    NotHomomorphism { g: usize, h: usize },
    #[error("generator image {0} is not invertible")]
    NotInvertible(usize),
    #[error("base ring must be the prime field")]
    BaseNotField,
    #[error("element {0} is not central")]
    NotCentral(usize),
    #[error("dimension {0} exceeds the matrix size cap {1}")]
    DimensionCap(usize, usize),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("p = 2 is rejected here: {0}")]
    EvenPrime(&'static str),
    #[error("internal consistency error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
