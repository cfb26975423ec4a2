//! Exit-code contract: 0 ok, 1 check failed, 2 config, 3 data, 4 numeric.

use std::fmt;

pub const CHECK_FAILED: i32 = 1;
pub const CONFIG: i32 = 2;
pub const DATA: i32 = 3;
pub const NUMERIC: i32 = 4;

#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub error: anyhow::Error,
}

pub type CmdResult<T> = Result<T, Failure>;

impl Failure {
    pub fn new(code: i32, error: impl Into<anyhow::Error>) -> Self {
        Failure {
            code,
            error: error.into(),
        }
    }

    pub fn config(msg: impl fmt::Display) -> Self {
        Failure::new(CONFIG, anyhow::anyhow!("{msg}"))
    }

    pub fn data(msg: impl fmt::Display) -> Self {
        Failure::new(DATA, anyhow::anyhow!("{msg}"))
    }
}

pub fn code_of(e: &sacnet::Error) -> i32 {
    use sacnet::Error::*;
    match e {
        Config(_) | InvalidArgument { .. } => CONFIG,
        NonFiniteGradient(_) | NonFiniteLoss(_) => NUMERIC,
        ShapeMismatch { .. } | Format { .. } | Io { .. } => DATA,
    }
}

impl From<sacnet::Error> for Failure {
    fn from(e: sacnet::Error) -> Self {
        Failure::new(code_of(&e), e)
    }
}

/// Attaches context to library errors while keeping their exit code.
pub trait Context<T> {
    fn context(self, msg: impl fmt::Display) -> CmdResult<T>;
}

impl<T> Context<T> for sacnet::Result<T> {
    fn context(self, msg: impl fmt::Display) -> CmdResult<T> {
        self.map_err(|e| {
            let code = code_of(&e);
            Failure::new(code, anyhow::Error::new(e).context(msg.to_string()))
        })
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}
