use std::path::PathBuf;

use thiserror::Error;

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_STAGE: u8 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    #[error("config field {field}: {message}")]
    Field { field: String, message: String },

    #[error("data: {0}")]
    Data(#[source] ponv_core::Error),

    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: ponv_core::Error,
    },

    #[error("{path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn config(field: &str, message: impl Into<String>) -> Self {
        CliError::Field {
            field: field.to_string(),
            message: message.into(),
        }
    }

    pub fn output(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Output {
            path: path.into(),
            source,
        }
    }

    /// Wraps a core error raised inside `stage`; data-shaped errors keep
    /// their data exit code.
    pub fn stage(stage: &'static str, source: ponv_core::Error) -> Self {
        if is_data_error(&source) {
            CliError::Data(source)
        } else {
            CliError::Stage { stage, source }
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Field { .. } => EXIT_CONFIG,
            CliError::Data(_) => EXIT_DATA,
            CliError::Stage { .. } | CliError::Output { .. } => EXIT_STAGE,
        }
    }
}

fn is_data_error(e: &ponv_core::Error) -> bool {
    use ponv_core::Error as E;
    matches!(
        e,
        E::Schema(_)
            | E::MissingColumn(_)
            | E::UnknownColumn(_)
            | E::Parse { .. }
            | E::RowRejected { .. }
            | E::Csv(_)
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Config("x".into()).exit_code(), 2);
        assert_eq!(CliError::config("run.k", "bad").exit_code(), 2);
        let parse = ponv_core::Error::MissingColumn("AGE".into());
        assert_eq!(CliError::stage("split", parse).exit_code(), 3);
        let contract = ponv_core::Error::Contract("boom".into());
        assert_eq!(CliError::stage("train", contract).exit_code(), 4);
    }
}
