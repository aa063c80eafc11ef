use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("lattice dimensions {l}x{h} invalid: {reason}")]
    Dimension { l: usize, h: usize, reason: &'static str },

    #[error("linear system is inconsistent")]
    Inconsistent,

    /// The exact decoder met a syndrome that no pure-Z error can produce.
    #[error("syndrome not producible by pure-Z noise on the {0} sublattice")]
    Invalid(crate::codegrid::Sublattice),

    #[error("operator does not commute with every stabilizer")]
    NotInNormalizer,

    #[error("cluster cannot be neutralized inside its bounding box")]
    NotNeutral,

    #[error("{0} defects survived the largest clustering level")]
    DecoderFailure(usize),

    #[error("value outside domain: {0}")]
    Domain(String),

    #[error("negative cellular-automaton rate {rate} at omega={omega}")]
    NegativeRate { omega: i32, rate: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("empty input")]
    EmptyInput,

    #[error("invalid probabilities: {0}")]
    Probability(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("malformed data: {0}")]
    Format(String),
}
