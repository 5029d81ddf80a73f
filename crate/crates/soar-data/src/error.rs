use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("split error: {0}")]
    Split(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("format error: {0}")]
    Format(String),

    #[error("checksum mismatch in record {record}: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum {
        record: usize,
        stored: u32,
        computed: u32,
    },

    #[error("validation error: {0}")]
    Validation(String),
}
