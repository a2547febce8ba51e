use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is out of range or the config file is malformed.
    #[error("config error at `{key}`: {msg}")]
    Config { key: String, msg: String },

    /// The plant state became non-finite during integration.
    #[error("integration fault at t = {t:.9} s (last good t = {last_good_t:.9} s)")]
    IntegrationFault { t: f64, last_good_t: f64 },

    #[error("degenerate reference: {0}")]
    DegenerateReference(&'static str),

    #[error("metrics window incomplete: {count} of {window} samples")]
    IncompleteWindow { count: usize, window: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            msg: msg.into(),
        }
    }
}
