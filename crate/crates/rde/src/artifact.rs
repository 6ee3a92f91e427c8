//! Versioned plain-text artifact files.
//!
//! Every artifact starts with a magic line `#rde <kind> v1` followed by a
//! `#config` line echoing the parameters that produced it, so a run can be
//! reproduced from the file alone and outputs stay diff-able.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Lines, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const VERSION: u32 = 1;

/// Render an f64 so that parsing the text recovers the exact bits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

pub fn parse_f64(s: &str) -> Option<f64> {
    match s {
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        _ => s.parse().ok(),
    }
}

/// Open `path` for writing and emit the two header lines. Config keys are
/// written in sorted order.
pub fn writer(path: &Path, kind: &str, config: &[(&str, String)]) -> Result<BufWriter<File>> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "#rde {kind} v{VERSION}")?;
    let sorted: BTreeMap<&str, &String> = config.iter().map(|(k, v)| (*k, v)).collect();
    let echo: Vec<String> = sorted.iter().map(|(k, v)| format!("{k}={v}")).collect();
    writeln!(w, "#config {}", echo.join(" "))?;
    Ok(w)
}

/// Line reader that has validated the header of an artifact file.
pub struct Reader {
    path: String,
    lines: Lines<BufReader<File>>,
    config: BTreeMap<String, String>,
    lineno: usize,
}

pub fn reader(path: &Path, expect_kind: &str) -> Result<Reader> {
    let path_str = path.display().to_string();
    let file = File::open(path)?;
    let mut lines = BufReader::new(file).lines();

    let magic = lines.next().transpose()?.unwrap_or_default();
    let mut parts = magic.split(' ');
    let ok = parts.next() == Some("#rde")
        && parts.next() == Some(expect_kind)
        && parts.next() == Some(&format!("v{VERSION}"));
    if !ok {
        return Err(Error::BadArtifact {
            path: path_str,
            reason: format!("expected `#rde {expect_kind} v{VERSION}` header, got {magic:?}"),
        });
    }

    let config_line = lines.next().transpose()?.unwrap_or_default();
    let mut config = BTreeMap::new();
    if let Some(rest) = config_line.strip_prefix("#config") {
        for pair in rest.split_whitespace() {
            if let Some((k, v)) = pair.split_once('=') {
                config.insert(k.to_string(), v.to_string());
            }
        }
    } else {
        return Err(Error::BadArtifact {
            path: path_str,
            reason: "missing #config line".into(),
        });
    }

    Ok(Reader {
        path: path_str,
        lines,
        config,
        lineno: 2,
    })
}

impl Reader {
    pub fn config(&self, key: &str) -> Option<&str> {
        self.config.get(key).map(|s| s.as_str())
    }

    pub fn next_line(&mut self) -> Result<Option<String>> {
        match self.lines.next() {
            Some(line) => {
                self.lineno += 1;
                Ok(Some(line?))
            }
            None => Ok(None),
        }
    }

    /// Error constructor carrying path and current line number.
    pub fn bad(&self, reason: impl Into<String>) -> Error {
        Error::BadArtifact {
            path: self.path.clone(),
            reason: format!("line {}: {}", self.lineno, reason.into()),
        }
    }
}

/// Detect the artifact kind without consuming the file.
pub fn peek_kind(path: &Path) -> Result<String> {
    let file = File::open(path)?;
    let mut lines = BufReader::new(file).lines();
    let magic = lines.next().transpose()?.unwrap_or_default();
    let mut parts = magic.split(' ');
    if parts.next() == Some("#rde") {
        if let Some(kind) = parts.next() {
            return Ok(kind.to_string());
        }
    }
    Err(Error::BadArtifact {
        path: path.display().to_string(),
        reason: "not an rde artifact".into(),
    })
}

/// Hex SHA-256 of a file, used to fingerprint count tables inside models.
pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(sha256_hex(&bytes))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Quote a CSV field if it contains a delimiter, quote or newline.
pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f64_text_round_trip_is_exact() {
        for &x in &[
            0.0,
            -0.0,
            1.0 / 3.0,
            2.0 / 3.0 - 0.5,
            f64::MIN_POSITIVE,
            1e300,
            -123.456e-78,
        ] {
            let s = fmt_f64(x);
            let back = parse_f64(&s).unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{s}");
        }
    }

    #[test]
    fn header_round_trip_and_kind_check() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.tsv");
        {
            let mut w = writer(&path, "vocab", &[("b", "2".into()), ("a", "1".into())]).unwrap();
            writeln!(w, "payload").unwrap();
        }
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("#rde vocab v1\n#config a=1 b=2\n"));

        assert_eq!(peek_kind(&path).unwrap(), "vocab");
        let mut r = reader(&path, "vocab").unwrap();
        assert_eq!(r.config("a"), Some("1"));
        assert_eq!(r.next_line().unwrap().as_deref(), Some("payload"));
        assert!(reader(&path, "counts").is_err());
    }

    #[test]
    fn csv_field_quotes_only_when_needed() {
        assert_eq!(csv_field("plain"), "plain");
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
    }
}
