//! Dataset configuration files: JSON with field-path and line-anchored
//! errors, and a digest of the canonical form for provenance.

use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::read_file;
use crate::error::{Error, Result};
use crate::geometry::DatasetConfig;

#[derive(Debug, Clone)]
pub struct ParsedConfig {
    pub config: DatasetConfig,
    /// Unknown keys tolerated in lenient mode.
    pub warnings: Vec<String>,
}

/// SHA-256 over the compact JSON serialization, in field declaration order.
pub fn config_digest<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("config serializes");
    hex::encode(Sha256::digest(&bytes))
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let column = offset - before.rfind('\n').map_or(0, |p| p + 1) + 1;
    (line, column)
}

/// Best-effort location of a dotted field path: each key is searched for
/// after the previous one.
fn locate(text: &str, path: &str) -> Option<(usize, usize)> {
    let mut cursor = 0;
    let mut found = None;
    for seg in path.split('.').filter(|s| !s.is_empty() && s.parse::<usize>().is_err()) {
        let needle = format!("\"{seg}\"");
        let pos = cursor + text[cursor..].find(&needle)?;
        found = Some(pos);
        cursor = pos + needle.len();
    }
    found.map(|p| line_col(text, p))
}

fn anchored(text: &str, path: String, message: String) -> Error {
    let (line, column) = match locate(text, &path) {
        Some((l, c)) => (Some(l), Some(c)),
        None => (None, None),
    };
    Error::Schema {
        path,
        line,
        column,
        message,
    }
}

fn unknown_keys(input: &Value, known: &Value, path: &str, out: &mut Vec<String>) {
    match (input, known) {
        (Value::Object(a), Value::Object(b)) => {
            for (k, v) in a {
                let p = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                match b.get(k) {
                    Some(kv) => unknown_keys(v, kv, &p, out),
                    None => out.push(p),
                }
            }
        }
        (Value::Array(a), Value::Array(b)) => {
            for (i, (x, y)) in a.iter().zip(b).enumerate() {
                unknown_keys(x, y, &format!("{path}.{i}"), out);
            }
        }
        _ => {}
    }
}

/// Parse and validate a dataset configuration. Unknown keys are errors when
/// `strict`, warnings otherwise.
pub fn parse_config_str(text: &str, strict: bool) -> Result<ParsedConfig> {
    let mut de = serde_json::Deserializer::from_str(text);
    let config: DatasetConfig = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        Error::Schema {
            path: if path == "." { "<root>".into() } else { path },
            line: Some(inner.line()),
            column: Some(inner.column()),
            message: inner.to_string(),
        }
    })?;
    de.end().map_err(|e| Error::Schema {
        path: "<root>".into(),
        line: Some(e.line()),
        column: Some(e.column()),
        message: e.to_string(),
    })?;

    let input: Value = serde_json::from_str(text).expect("already parsed");
    let known = serde_json::to_value(&config).expect("config serializes");
    let mut extra = Vec::new();
    unknown_keys(&input, &known, "", &mut extra);
    let mut warnings = Vec::new();
    for key in extra {
        if strict {
            return Err(anchored(text, key, "unknown key".into()));
        }
        log::warn!("ignoring unknown config key `{key}`");
        warnings.push(format!("unknown key `{key}`"));
    }

    config.validate().map_err(|e| match e {
        Error::Schema { path, message, .. } => anchored(text, path, message),
        other => other,
    })?;
    Ok(ParsedConfig { config, warnings })
}

pub fn parse_config(path: &Path, strict: bool) -> Result<ParsedConfig> {
    let bytes = read_file(path)?;
    let text = String::from_utf8(bytes).map_err(|e| Error::schema("<root>", format!("not UTF-8: {e}")))?;
    parse_config_str(&text, strict)
}
