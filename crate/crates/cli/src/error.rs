use std::fmt;

use mildhjb::hjb::SolveReport;

/// Machine-readable failure tags, printed as `error[TAG]: message`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tag {
    ConfigMissingFile,
    ConfigIo,
    ConfigParse,
    ConfigInvalid,
    ConfigCoefficients,
    ConfigMemoryBudget,
    OutputIo,
    NonContraction,
    NullControllability,
    FitSpan,
    RankDeficient,
    ExponentOutOfRange,
    NotConverged,
    ProbeFailed,
    Numerical,
}

impl Tag {
    pub fn as_str(self) -> &'static str {
        match self {
            Tag::ConfigMissingFile => "CONFIG_MISSING_FILE",
            Tag::ConfigIo => "CONFIG_IO",
            Tag::ConfigParse => "CONFIG_PARSE",
            Tag::ConfigInvalid => "CONFIG_INVALID",
            Tag::ConfigCoefficients => "CONFIG_COEFFICIENTS",
            Tag::ConfigMemoryBudget => "CONFIG_MEMORY_BUDGET",
            Tag::OutputIo => "OUTPUT_IO",
            Tag::NonContraction => "NON_CONTRACTION",
            Tag::NullControllability => "NULL_CONTROLLABILITY",
            Tag::FitSpan => "FIT_SPAN",
            Tag::RankDeficient => "RANK_DEFICIENT",
            Tag::ExponentOutOfRange => "EXPONENT_OUT_OF_RANGE",
            Tag::NotConverged => "NOT_CONVERGED",
            Tag::ProbeFailed => "PROBE_FAILED",
            Tag::Numerical => "NUMERICAL",
        }
    }

    /// 1 for configuration and I/O problems, 2 for numerical failures.
    pub fn exit_code(self) -> i32 {
        match self {
            Tag::ConfigMissingFile
            | Tag::ConfigIo
            | Tag::ConfigParse
            | Tag::ConfigInvalid
            | Tag::ConfigCoefficients
            | Tag::ConfigMemoryBudget
            | Tag::OutputIo => 1,
            _ => 2,
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, thiserror::Error)]
#[error("error[{tag}]: {message}")]
pub struct CliError {
    pub tag: Tag,
    pub message: String,
    /// Solver state at the point of failure, when there is one.
    pub report: Option<Box<SolveReport>>,
}

impl CliError {
    pub fn new(tag: Tag, message: impl Into<String>) -> Self {
        CliError {
            tag,
            message: message.into(),
            report: None,
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.tag.exit_code()
    }

    /// Classifies a library error raised while building the model from the config.
    pub fn setup(e: mildhjb::Error) -> Self {
        use mildhjb::Error as E;
        match e {
            E::Ellipticity { .. } | E::NoiseBounds { .. } => {
                CliError::new(Tag::ConfigCoefficients, e.to_string())
            }
            E::Io(_) | E::Csv(_) => CliError::new(Tag::ConfigIo, e.to_string()),
            E::InvalidArgument(_) | E::Lattice(_) => {
                CliError::new(Tag::ConfigInvalid, e.to_string())
            }
            other => Self::numerical(other),
        }
    }

    /// Classifies a library error raised by a numerical stage.
    pub fn numerical(e: mildhjb::Error) -> Self {
        use mildhjb::Error as E;
        let tag = match &e {
            E::NonContraction { .. } => Tag::NonContraction,
            E::NullControllability { .. } => Tag::NullControllability,
            E::FitSpan { .. } => Tag::FitSpan,
            E::RankDeficient { .. } => Tag::RankDeficient,
            E::ExponentOutOfRange { .. } => Tag::ExponentOutOfRange,
            E::Ellipticity { .. } | E::NoiseBounds { .. } => Tag::ConfigCoefficients,
            _ => Tag::Numerical,
        };
        let message = crate::config::one_line(&e.to_string());
        let report = match e {
            E::NonContraction { report } => Some(report),
            _ => None,
        };
        CliError {
            tag,
            message,
            report,
        }
    }

    pub fn output(e: impl fmt::Display) -> Self {
        CliError::new(Tag::OutputIo, e.to_string())
    }
}
