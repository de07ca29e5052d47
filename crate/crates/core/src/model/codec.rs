//! Line-oriented record format shared by persistence and the wire.
//!
//! Every record is one line of JSON with the format version as its first
//! field, followed by the record's fields in a fixed order.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::st::SignatureTrace;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CodecError {
    #[error("malformed record: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported record version {found} (expected {FORMAT_VERSION})")]
    Version { found: u32 },
    #[error("invalid record: {0}")]
    Invalid(String),
}

#[derive(Serialize)]
struct Out<'a, T> {
    v: u32,
    #[serde(flatten)]
    body: &'a T,
}

#[derive(Deserialize)]
struct In<T> {
    v: u32,
    #[serde(flatten)]
    body: T,
}

/// Serializes `body` as one versioned record line (no trailing newline).
pub fn encode<T: Serialize>(body: &T) -> String {
    serde_json::to_string(&Out {
        v: FORMAT_VERSION,
        body,
    })
    .expect("record types serialize infallibly")
}

pub fn decode<T: DeserializeOwned>(line: &str) -> Result<T, CodecError> {
    let rec: In<T> = serde_json::from_str(line)?;
    if rec.v != FORMAT_VERSION {
        return Err(CodecError::Version { found: rec.v });
    }
    Ok(rec.body)
}

/// Canonical record line for a signature-trace.
pub fn st_to_record(st: &SignatureTrace) -> String {
    encode(st)
}

/// Parses and validates a signature-trace record.
pub fn st_from_record(line: &str) -> Result<SignatureTrace, CodecError> {
    let st: SignatureTrace = decode(line)?;
    st.validate()
        .map_err(|e| CodecError::Invalid(e.to_string()))?;
    Ok(st)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{EntityCategory, EntityKey, GeneralizedValue};

    #[test]
    fn version_comes_first_and_round_trips() {
        let st = SignatureTrace::builder("n0", 4)
            .entity(
                EntityKey::dotted(EntityCategory::Environment, "env.region"),
                "eu",
            )
            .entity_value(
                EntityKey::dotted(EntityCategory::FieldValue, "server.served"),
                GeneralizedValue::range(1, 9),
            )
            .call("server.accept", 0)
            .call("server.dispatch", 1)
            .fault("io-error")
            .fix("reopen-connection", 2, 3)
            .build()
            .unwrap();
        let line = st_to_record(&st);
        assert!(line.starts_with("{\"v\":1,"), "{line}");
        let back = st_from_record(&line).unwrap();
        assert_eq!(back, st);
        assert_eq!(st_to_record(&back), line);
    }

    #[test]
    fn wrong_version_rejected() {
        let st = SignatureTrace::builder("n0", 0).build().unwrap();
        let line = st_to_record(&st).replacen("\"v\":1", "\"v\":9", 1);
        assert!(matches!(
            st_from_record(&line),
            Err(CodecError::Version { found: 9 })
        ));
    }
}
