use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },

    #[error("{}`{key}` out of range: {message}", line_prefix(*.line))]
    OutOfRange {
        line: Option<usize>,
        key: &'static str,
        message: String,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature did not converge: relative change {rel_change:e} at {nodes}x{nodes} nodes")]
    QuadratureNotConverged { nodes: usize, rel_change: f64 },

    #[error("decoy estimation impossible: signal and decoy intensities coincide")]
    DegenerateDecoy,

    #[error("no key: single-photon yield lower bound is not positive ({0:e})")]
    NoKey(f64),

    #[error("no key at zero distance")]
    NoKeyAtZero,

    #[error("key rate stays positive up to {0} km")]
    NoCutoff(f64),

    #[error("no T_QM crossing in (0, 1): {0}")]
    NoCrossing(String),

    #[error("storage loop routing inconsistent at {0}")]
    Routing(String),
}

fn line_prefix(line: Option<usize>) -> String {
    match line {
        Some(l) => format!("line {l}: "),
        None => String::new(),
    }
}
