//! Structured errors: every failure names the pipeline stage it happened in,
//! and the stage decides the exit code (2 = configuration, 3 = numerical).

use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Usage,
    Config,
    Case,
    Params,
    Powerflow,
    Reduction,
    Assembly,
    Solve,
    Metrics,
    Fit,
    Output,
}

impl Stage {
    pub fn exit_code(self) -> i32 {
        match self {
            Stage::Usage | Stage::Config | Stage::Case | Stage::Params => 2,
            Stage::Powerflow
            | Stage::Reduction
            | Stage::Assembly
            | Stage::Solve
            | Stage::Metrics
            | Stage::Fit
            | Stage::Output => 3,
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("stage serializes");
        write!(f, "{}", s.as_str().expect("stage is a string"))
    }
}

#[derive(Debug)]
pub struct CliError {
    pub stage: Stage,
    pub cause: String,
}

impl CliError {
    pub fn new(stage: Stage, cause: impl fmt::Display) -> Self {
        CliError { stage, cause: cause.to_string() }
    }

    /// The machine-readable form emitted to stderr and to `error.json`.
    pub fn to_json(&self) -> String {
        serde_json::json!({
            "schema": 1,
            "stage": self.stage,
            "cause": self.cause,
        })
        .to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} stage: {}", self.stage, self.cause)
    }
}

impl std::error::Error for CliError {}

/// Shorthand for mapping an underlying error into a staged one.
pub fn staged<E: fmt::Display>(stage: Stage) -> impl FnOnce(E) -> CliError {
    move |e| CliError::new(stage, e)
}
