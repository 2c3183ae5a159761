use pulseforge::families::FamilyError;
use pulseforge::params::ParamError;
use pulseforge::rotation::RotationError;
use pulseforge::synth::SynthError;
use pulseforge::verify::VerifyError;
use pulseforge::wgen::WgenError;
use thiserror::Error;

/// Failure classes, one per non-zero exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed or inconsistent job (exit 2).
    #[error("{0}")]
    Spec(String),
    /// The job is well formed but violates a mathematical constraint (exit 3).
    #[error("{0}")]
    Constraint(String),
    /// The numeric oracle disagrees with the analytic solution (exit 4).
    #[error("{0}")]
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Spec(_) => 2,
            CliError::Constraint(_) => 3,
            CliError::Verification(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Spec(_) => "invalid job",
            CliError::Constraint(_) => "constraint violated",
            CliError::Verification(_) => "verification failed",
        }
    }
}

impl From<FamilyError> for CliError {
    fn from(e: FamilyError) -> Self {
        match e {
            FamilyError::InvalidParameter { .. }
            | FamilyError::UnknownFamily(_)
            | FamilyError::MissingParameter { .. }
            | FamilyError::NoClosedForm(_) => CliError::Spec(e.to_string()),
            _ => CliError::Constraint(e.to_string()),
        }
    }
}

impl From<ParamError> for CliError {
    fn from(e: ParamError) -> Self {
        CliError::Spec(e.to_string())
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::Params(p) => p.into(),
            SynthError::Family(f) => f.into(),
            other => CliError::Constraint(other.to_string()),
        }
    }
}

impl From<WgenError> for CliError {
    fn from(e: WgenError) -> Self {
        match e {
            WgenError::InvalidProfile(_) => CliError::Spec(e.to_string()),
            other => CliError::Constraint(other.to_string()),
        }
    }
}

impl From<RotationError> for CliError {
    fn from(e: RotationError) -> Self {
        match e {
            RotationError::InvalidTarget(_) | RotationError::NotEven(_) => CliError::Spec(e.to_string()),
            RotationError::Synth(s) => s.into(),
            RotationError::Family(f) => f.into(),
            other => CliError::Constraint(other.to_string()),
        }
    }
}

impl From<VerifyError> for CliError {
    fn from(e: VerifyError) -> Self {
        match e {
            VerifyError::InvalidConfig(_) | VerifyError::NoModel => CliError::Spec(e.to_string()),
            VerifyError::Field(s) => s.into(),
            VerifyError::StepTooLarge { .. } | VerifyError::GridTooCoarse(_) => {
                CliError::Verification(e.to_string())
            }
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Spec(format!("i/o error: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Spec(format!("bad JSON: {e}"))
    }
}
