use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("Hilbert space of {n_qubits} qubits exceeds the dense limit of {limit}")]
    DimensionOverflow { n_qubits: usize, limit: usize },

    #[error("basis function is singular at x = {x}")]
    Singular { x: f64 },

    #[error("overlap matrix has no retained directions (largest eigenvalue {max_eigenvalue:e})")]
    NoRetainedDirections { max_eigenvalue: f64 },

    #[error("no solution: target error {epsilon:e} does not exceed subspace error {subspace_error:e}")]
    NoSolution { epsilon: f64, subspace_error: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("integrand diverges: N = {n_steps} is below the threshold {threshold:.3}")]
    Divergent { n_steps: u64, threshold: f64 },

    #[error("noise protocol {protocol} does not match matrix structure {structure}")]
    StructureMismatch { protocol: String, structure: String },

    #[error("operator factor is not unitary (norm drift {drift:e})")]
    NonUnitary { drift: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("malformed input: {0}")]
    Parse(String),
}
