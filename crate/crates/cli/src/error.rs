//! Error-to-exit-code mapping shared by every subcommand.

use pianobench_core::dataset::DatasetError;
use pianobench_core::diffusion::DiffusionError;
use pianobench_core::eval::EvalError;
use pianobench_core::hand::HandError;
use pianobench_core::metrics::MetricError;
use pianobench_core::midi::MidiError;
use pianobench_core::pipeline::PipelineError;
use std::fmt;

#[derive(Debug)]
pub enum CliError {
    /// Exit 1: file-system or serialization failures.
    Io(String),
    /// Exit 2: prediction/ground-truth clip sets do not pair up.
    Pairing(String),
    /// Exit 3: an input file violates its schema or format.
    Schema(String),
    /// Exit 4: a numeric routine failed on valid-looking input.
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Pairing(_) => 2,
            CliError::Schema(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Io(m) => write!(f, "{m}"),
            CliError::Pairing(m) => write!(f, "{m}"),
            CliError::Schema(m) => write!(f, "{m}"),
            CliError::Numeric(m) => write!(f, "{m}"),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<MidiError> for CliError {
    fn from(e: MidiError) -> Self {
        CliError::Schema(e.to_string())
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::Io(m) => CliError::Io(m),
            other => CliError::Schema(other.to_string()),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<MetricError> for CliError {
    fn from(e: MetricError) -> Self {
        match e {
            MetricError::Io(m) => CliError::Io(m),
            MetricError::Hand(HandError::BadTemplate(m)) => CliError::Schema(m),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

impl From<HandError> for CliError {
    fn from(e: HandError) -> Self {
        match e {
            HandError::BadTemplate(m) => CliError::Schema(m),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

impl From<DiffusionError> for CliError {
    fn from(e: DiffusionError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Pairing(ids) => {
                CliError::Pairing(format!("unpaired clip ids: {}", ids.join(", ")))
            }
            EvalError::Dataset(d) => d.into(),
            EvalError::Metric(m) => m.into(),
            EvalError::Config(m) => CliError::Numeric(m),
        }
    }
}
