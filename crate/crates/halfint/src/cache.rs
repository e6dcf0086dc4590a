//! Versioned text cache files with a trailing SHA-256 line.
//!
//! Every file is `<header line>\n<body>sha256 <hex>\n`, where the digest
//! covers everything before the final line.

use crate::error::{Error, Result};
use sha2::{Digest, Sha256};
use std::fs;
use std::path::{Path, PathBuf};

/// Header tags accepted by [`gc`].
pub const KNOWN_HEADERS: [&str; 3] = ["QEXP v1", "KOHNEN v1", "LVAL v1"];

pub fn digest(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Append the checksum line.
pub fn seal(content: &str) -> String {
    let mut out = content.to_string();
    if !out.ends_with('\n') {
        out.push('\n');
    }
    let d = digest(&out);
    out.push_str("sha256 ");
    out.push_str(&d);
    out.push('\n');
    out
}

/// Verify the checksum line and return the content before it.
pub fn unseal(text: &str) -> Result<&str> {
    let trimmed = text
        .strip_suffix('\n')
        .ok_or_else(|| Error::Cache("missing final newline".into()))?;
    let cut = trimmed.rfind('\n').map_or(0, |i| i + 1);
    let (content, last) = trimmed.split_at(cut);
    let want = last
        .strip_prefix("sha256 ")
        .ok_or_else(|| Error::Cache("missing checksum line".into()))?;
    if digest(content) != want {
        return Err(Error::Cache("checksum mismatch".into()));
    }
    Ok(content)
}

/// Header line of a sealed file, if it is one of [`KNOWN_HEADERS`].
fn header_tag(content: &str) -> Option<&'static str> {
    let first = content.lines().next()?;
    KNOWN_HEADERS.iter().copied().find(|h| first.starts_with(h))
}

/// Write atomically (temp file then rename).
pub fn write_sealed(path: &Path, content: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, seal(content))?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Read and verify; `Ok(None)` when the file does not exist.
pub fn read_sealed(path: &Path, header: &str) -> Result<Option<String>> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let content = unseal(&text)?;
    if !content.starts_with(header) {
        return Err(Error::Cache(format!(
            "{}: expected header {header}",
            path.display()
        )));
    }
    Ok(Some(content.to_string()))
}

#[derive(Debug, Clone, Default, PartialEq, serde::Serialize)]
pub struct GcReport {
    pub checked: usize,
    pub removed: Vec<(PathBuf, String)>,
}

/// Validate every `.txt` file under `dir`; corrupt ones are deleted and listed.
pub fn gc(dir: &Path) -> Result<GcReport> {
    let mut report = GcReport::default();
    if !dir.exists() {
        return Ok(report);
    }
    let mut stack = vec![dir.to_path_buf()];
    let mut files = Vec::new();
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d)? {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.extension().is_some_and(|e| e == "txt") {
                files.push(path);
            }
        }
    }
    files.sort();
    for path in files {
        report.checked += 1;
        let verdict = match fs::read_to_string(&path) {
            Err(e) => Some(format!("unreadable: {e}")),
            Ok(text) => match unseal(&text) {
                Err(e) => Some(e.to_string()),
                Ok(content) if header_tag(content).is_none() => Some("unknown header".into()),
                Ok(_) => None,
            },
        };
        if let Some(reason) = verdict {
            fs::remove_file(&path)?;
            report.removed.push((path, reason));
        }
    }
    Ok(report)
}
