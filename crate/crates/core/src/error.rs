use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("reaction {reaction}: growth rate {rate} exceeds bound {bound}")]
    GrowthRateExceedsBound {
        reaction: usize,
        rate: f64,
        bound: f64,
    },

    #[error("reaction {reaction} is not applicable to the configuration")]
    NotApplicable { reaction: usize },

    #[error("configuration has {found} entries, network has {expected} species")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("unknown species `{0}`")]
    UnknownSpecies(String),

    #[error("duplicate species `{0}`")]
    DuplicateSpecies(String),

    #[error("configuration is absorbing (total propensity 0)")]
    AbsorbingState,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("both populations are zero")]
    BothZero,

    #[error("extinction-steps series does not converge: {0}")]
    NonConvergent(String),

    #[error("birth-death chain is not absorbing from state ({a}, {b})")]
    NotAbsorbing { a: u64, b: u64 },

    #[error("state space too large for the exact solver ({states} states)")]
    StateSpaceTooLarge { states: usize },

    #[error("linear solve failed: {0}")]
    Solver(String),

    #[error("unknown figure {0} (expected 1-5)")]
    UnknownFigure(u32),
}
