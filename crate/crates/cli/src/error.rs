use std::fmt;
use std::process::ExitCode;

/// Exit codes by pipeline stage.
pub const USAGE: u8 = 1;
pub const DIGITIZE: u8 = 2;
pub const SEGMENT: u8 = 3;
pub const SPECTRAL: u8 = 4;
pub const MODEL: u8 = 5;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.code)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

/// `.map_err(at(SEGMENT))` tags any displayable error with a stage code.
pub fn at<E: fmt::Display>(code: u8) -> impl Fn(E) -> CliError {
    move |e| CliError::new(code, e.to_string())
}

pub type CliResult<T = ()> = Result<T, CliError>;
