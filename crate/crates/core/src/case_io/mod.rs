//! Case ingestion and serialization: Matpower text, risk CSV, native JSON.

mod matpower;
mod risk;

pub use matpower::{
    parse_matpower, parse_matpower_case, write_matpower, MatpowerCase, UNLIMITED_RATING_FACTOR,
};
pub use risk::{generate_risk, parse_risk_csv, RiskOrigin, RiskRng, RiskTable};

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use thiserror::Error;

use crate::network::{LineId, Network, ValidationReport};

/// Version stamped into every JSON document this crate writes.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CaseError {
    #[error("missing {0}")]
    MissingMatrix(String),
    #[error("syntax error at line {line}, column {col}: {message}")]
    Syntax {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("non-numeric token `{token}` at line {line}, column {col}")]
    NonNumeric {
        token: String,
        line: usize,
        col: usize,
    },
    #[error("{0}")]
    Data(String),
    #[error("invalid network: {0}")]
    Invalid(ValidationReport),
    #[error("risk given for unknown line {0}")]
    UnknownRiskLine(LineId),
    #[error("duplicate risk for line {0}")]
    DuplicateRisk(LineId),
    #[error("risk missing for line {0}")]
    MissingRisk(LineId),
    #[error("negative risk {value} for line {line}")]
    NegativeRisk { line: LineId, value: f64 },
    #[error("csv: {0}")]
    Csv(String),
    #[error("malformed json: {0}")]
    Json(String),
    #[error("schema violation: {0}")]
    Schema(String),
}

impl From<serde_json::Error> for CaseError {
    fn from(e: serde_json::Error) -> Self {
        match e.classify() {
            serde_json::error::Category::Data => CaseError::Schema(e.to_string()),
            _ => CaseError::Json(e.to_string()),
        }
    }
}

#[derive(Serialize)]
struct NetworkDocRef<'a> {
    format_version: u32,
    #[serde(flatten)]
    network: &'a Network,
}

#[derive(Deserialize)]
struct NetworkDoc {
    format_version: u32,
    #[serde(flatten)]
    network: Network,
}

/// Native network JSON (pretty-printed, shortest round-trip float form).
pub fn write_network_json(network: &Network) -> String {
    let doc = NetworkDocRef {
        format_version: FORMAT_VERSION,
        network,
    };
    serde_json::to_string_pretty(&doc).expect("network serialization is infallible")
}

pub fn read_network_json(text: &str) -> Result<Network, CaseError> {
    let doc: NetworkDoc = serde_json::from_str(text)?;
    if doc.format_version != FORMAT_VERSION {
        return Err(CaseError::Schema(format!(
            "unsupported format_version {}",
            doc.format_version
        )));
    }
    let report = doc.network.validate();
    if !report.is_empty() {
        return Err(CaseError::Invalid(report));
    }
    Ok(doc.network)
}

/// Loads a case from either Matpower text or network JSON, picked by the
/// first non-blank character.
pub fn read_case(text: &str) -> Result<Network, CaseError> {
    if text.trim_start().starts_with('{') {
        read_network_json(text)
    } else {
        parse_matpower(text)
    }
}

#[derive(Serialize)]
struct Document<'a, T> {
    format_version: u32,
    #[serde(flatten)]
    body: &'a T,
}

/// Pretty JSON of a result document with `format_version` stamped in.
/// `value` must serialize as a JSON object.
pub fn write_document<T: Serialize>(value: &T) -> String {
    let mut text = to_json_pretty(&Document {
        format_version: FORMAT_VERSION,
        body: value,
    });
    text.push('\n');
    text
}

pub fn read_document<T: DeserializeOwned>(text: &str) -> Result<T, CaseError> {
    let mut value: serde_json::Value = serde_json::from_str(text)?;
    let version = value
        .as_object_mut()
        .ok_or_else(|| CaseError::Schema("expected a JSON object".into()))?
        .remove("format_version")
        .ok_or_else(|| CaseError::Schema("missing format_version".into()))?;
    if version.as_u64() != Some(FORMAT_VERSION as u64) {
        return Err(CaseError::Schema(format!("unsupported format_version {version}")));
    }
    Ok(serde_json::from_value(value)?)
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("document serialization is infallible")
}

pub fn from_json<T: DeserializeOwned>(text: &str) -> Result<T, CaseError> {
    Ok(serde_json::from_str(text)?)
}
