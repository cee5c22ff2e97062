use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the toolkit can report. [`Error::code`] gives the stable
/// upper-case name used in CLI output and exit reports.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("REJECT_BOUNDS: {0}")]
    RejectBounds(String),
    #[error("REJECT_CAP: i_max = {0} is not in (0, 1)")]
    RejectCap(f64),
    #[error("REJECT_FIELDS: {0}")]
    RejectFields(String),
    #[error("REJECT_TOLERANCES: {0}")]
    RejectTolerances(String),
    #[error("BAD_STATE: {0}")]
    BadState(String),
    #[error("DOMAIN: {0}")]
    Domain(String),
    #[error("BAD_CHANNEL: {0}")]
    BadChannel(String),
    #[error("BAD_SET_KIND: {0}")]
    BadSetKind(String),
    #[error("BAD_POLICY: {0}")]
    BadPolicy(String),
    #[error("BAD_ARGUMENT: {0}")]
    BadArgument(String),
    #[error("NONFINITE: non-finite value produced at t = {t}")]
    NonFinite { t: f64 },
    #[error("SINGULAR_ARC: switching functional {channel} vanishes persistently near t = {t}")]
    SingularArc { t: f64, channel: String },
    #[error("EMPTY_TANGENT: {0}")]
    EmptyTangent(String),
    #[error("INVARIANT_BREACH: barrier sample at t = {t} leaves the constraint set (I = {i})")]
    InvariantBreach { t: f64, i: f64 },
    #[error("IO: {0}")]
    Io(String),
    #[error("PARSE: {0}")]
    Parse(String),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::RejectBounds(_) => "REJECT_BOUNDS",
            Error::RejectCap(_) => "REJECT_CAP",
            Error::RejectFields(_) => "REJECT_FIELDS",
            Error::RejectTolerances(_) => "REJECT_TOLERANCES",
            Error::BadState(_) => "BAD_STATE",
            Error::Domain(_) => "DOMAIN",
            Error::BadChannel(_) => "BAD_CHANNEL",
            Error::BadSetKind(_) => "BAD_SET_KIND",
            Error::BadPolicy(_) => "BAD_POLICY",
            Error::BadArgument(_) => "BAD_ARGUMENT",
            Error::NonFinite { .. } => "NONFINITE",
            Error::SingularArc { .. } => "SINGULAR_ARC",
            Error::EmptyTangent(_) => "EMPTY_TANGENT",
            Error::InvariantBreach { .. } => "INVARIANT_BREACH",
            Error::Io(_) => "IO",
            Error::Parse(_) => "PARSE",
        }
    }

    /// Input errors are the caller's fault (CLI exit code 2); the rest are
    /// compute failures (exit code 3).
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::RejectBounds(_)
                | Error::RejectCap(_)
                | Error::RejectFields(_)
                | Error::RejectTolerances(_)
                | Error::BadState(_)
                | Error::BadChannel(_)
                | Error::BadSetKind(_)
                | Error::BadPolicy(_)
                | Error::BadArgument(_)
                | Error::Parse(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
