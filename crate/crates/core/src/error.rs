use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is missing, out of range or inconsistent.
    #[error("invalid configuration entry `{entry}`: {reason}")]
    Config { entry: String, reason: String },

    /// A (link, start instant, interferer) combination the protocol never produces.
    #[error("unsupported channel query: {0}")]
    Channel(String),

    /// A queue analysis was requested outside its stable regime.
    #[error("queue is not stable (arrival {arrival} >= service {service}); use the saturation rule instead")]
    Unstable { arrival: f64, service: f64 },

    #[error("unknown preset `{name}` (available: {available})")]
    UnknownPreset { name: String, available: String },

    /// An internal invariant did not hold; this is a bug, not bad input.
    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("cannot parse configuration: {0}")]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub fn config(entry: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            entry: entry.into(),
            reason: reason.into(),
        }
    }
}
