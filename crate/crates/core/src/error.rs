//! Error type shared by every module in the crate.

use thiserror::Error;

#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("unknown test function id `{0}`")]
    UnknownFunction(String),

    #[error("domain contains no grid point")]
    EmptyDomain,

    #[error("domain covers every grid point (complement is empty)")]
    FullDomain,

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("ball or sphere of radius {radius} at {center:?} exits the grid bounding box")]
    OutOfBounds { center: Vec<f64>, radius: f64 },

    #[error("cannot refine a mask built from an explicit point list (no shape descriptor)")]
    RefineExplicitMask,

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("not enough room around the evaluation point: {0}")]
    InsufficientRoom(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Exit-code class used by the command-line front end:
    /// 2 = configuration/usage, 3 = internal numerical error.
    pub fn exit_class(&self) -> u8 {
        match self {
            Error::NonFinite(_) => 3,
            _ => 2,
        }
    }
}
