//! Plain-text network configuration.
//!
//! One `key = value` pair per line; blank lines and text after `#` are
//! ignored. Recognised keys:
//!
//! ```text
//! classes = 19
//! block1  = 2,2,2
//! block2  = 4,4,8,8,16,16
//! ```
//!
//! Keys not present keep their defaults.

use std::path::Path;

use dabnet_core::net::NetworkSpec;

use crate::{Error, Result};

/// Parses a comma-separated list of positive integers.
pub fn parse_list(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|item| {
            let item = item.trim();
            item.parse::<usize>()
                .ok()
                .filter(|&v| v > 0)
                .ok_or_else(|| Error::Config(format!("'{item}' is not a positive integer")))
        })
        .collect()
}

pub fn parse_config(text: &str) -> Result<NetworkSpec> {
    let mut spec = NetworkSpec::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let lineno = i + 1;
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {lineno}: expected key = value")))?;
        let value = value.trim();
        let at = |e: Error| match e {
            Error::Config(m) => Error::Config(format!("line {lineno}: {m}")),
            e => e,
        };
        match key.trim() {
            "classes" => {
                spec.num_classes = value
                    .parse()
                    .map_err(|_| Error::Config(format!("line {lineno}: bad class count '{value}'")))?
            }
            "block1" => spec.block1 = parse_list(value).map_err(at)?,
            "block2" => spec.block2 = parse_list(value).map_err(at)?,
            other => return Err(Error::Config(format!("line {lineno}: unknown key '{other}'"))),
        }
    }
    spec.validate()?;
    Ok(spec)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<NetworkSpec> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}
