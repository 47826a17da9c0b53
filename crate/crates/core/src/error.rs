use thiserror::Error;

use crate::data::Arm;

/// Errors raised by model construction, estimation, planning and simulation.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside its valid range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A nonempty dataset is required.
    #[error("empty dataset")]
    EmptyData,

    /// A probability is exactly 0 or 1 where a log or odds transform is needed.
    #[error("degenerate probability: {0}")]
    DegenerateProbability(String),

    /// Subdistribution methods require censoring-complete data on [0, tau]:
    /// favourable/competing status must be known for every subject up to the
    /// horizon. Subjects censored strictly before tau violate this.
    #[error(
        "censoring-complete data required on [0, tau]: {censored_before_horizon} subject(s) \
         censored before the horizon; use the cause-specific estimators instead"
    )]
    IncompleteFollowUp { censored_before_horizon: usize },

    /// A two-sample procedure was invoked on data missing one arm.
    #[error("no subjects in arm {0}")]
    MissingArm(Arm),

    /// An error attributable to one row of a batch input.
    #[error("row {index}: {source}")]
    Row {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn at_row(self, index: usize) -> Error {
        Error::Row {
            index,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
