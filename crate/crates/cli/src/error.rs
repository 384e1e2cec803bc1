use std::fmt;

/// Failure of a run, grouped by exit status.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
    BenchmarkRange(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::BenchmarkRange(_) => 4,
            CliError::Io(_) => 1,
        }
    }

    /// Attach the module the error came from.
    pub fn context(self, ctx: &str) -> Self {
        match self {
            CliError::Config(m) => CliError::Config(format!("{ctx}: {m}")),
            CliError::Numerical(m) => CliError::Numerical(format!("{ctx}: {m}")),
            CliError::BenchmarkRange(m) => CliError::BenchmarkRange(format!("{ctx}: {m}")),
            CliError::Io(m) => CliError::Io(format!("{ctx}: {m}")),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical error: {m}"),
            CliError::BenchmarkRange(m) => write!(f, "benchmark range: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<pnrbench::Error> for CliError {
    fn from(e: pnrbench::Error) -> Self {
        use pnrbench::Error as E;
        match e {
            E::Domain(_) => CliError::Config(e.to_string()),
            E::Range { .. } | E::Truncation { .. } | E::Unreachable(_) => {
                CliError::Numerical(e.to_string())
            }
            E::OutOfBenchmarkRange(_) => CliError::BenchmarkRange(e.to_string()),
            E::Io(_) => CliError::Io(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
