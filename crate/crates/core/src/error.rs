use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A document did not match its file schema.
    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    /// Well-formed input that breaks a data-model invariant.
    #[error("validation error in {context}: {message}")]
    Validation { context: String, message: String },

    /// Bad locale, solver, learner or weight configuration.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("grounding error in rule `{rule}`: {message}")]
    Grounding { rule: String, message: String },

    #[error("infeasible assignment: {0}")]
    Infeasible(String),

    #[error("brute-force oracle refuses {0} open variables (limit {1})")]
    TooManyVariables(usize, usize),

    #[error("learning error: {0}")]
    Learn(String),

    #[error("evaluation error: {0}")]
    Evaluate(String),

    #[error("annotator error: {0}")]
    Annotator(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.into(),
        }
    }

    pub(crate) fn validation(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            context: context.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by the caller's input or configuration rather
    /// than by the model at run time.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. } | Error::Validation { .. } | Error::Config(_)
        )
    }
}
