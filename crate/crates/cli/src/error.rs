use std::fmt;

/// Everything the binary can fail with. Each variant maps to one exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Parse { line: Option<usize>, message: String },
    Validation(String),
    Io(String),
    Core(triggerkit::Error),
}

impl CliError {
    /// Model construction failures come from config values.
    pub fn from_model(e: triggerkit::Error) -> Self {
        CliError::Validation(e.to_string())
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "UsageError",
            CliError::Parse { .. } => "ParseError",
            CliError::Validation(_) => "ValidationError",
            CliError::Io(_) => "IoError",
            CliError::Core(e) => e.kind(),
        }
    }

    /// 2 for anything the user can fix in the invocation or config, 3 for
    /// numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Parse { .. } | CliError::Validation(_) | CliError::Io(_) => 2,
            CliError::Core(
                triggerkit::Error::InvalidArgument(_)
                | triggerkit::Error::InvalidModel(_)
                | triggerkit::Error::UnsupportedNonlinearity { .. },
            ) => 2,
            CliError::Core(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Validation(m) | CliError::Io(m) => write!(f, "{m}"),
            CliError::Parse { line: Some(l), message } => write!(f, "line {l}: {message}"),
            CliError::Parse { line: None, message } => write!(f, "{message}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<triggerkit::Error> for CliError {
    fn from(e: triggerkit::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

/// `error kind=<Kind> message=<text>` on one line.
pub fn error_line(e: &CliError) -> String {
    let msg = e.to_string().replace(['\n', '\r'], " ");
    format!("error kind={} message={}", e.kind(), msg)
}
