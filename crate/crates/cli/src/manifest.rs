// SPDX-License-Identifier: Apache-2.0

//! Run manifests: what was run, on which inputs, and digests of what came out.

use std::path::{Path, PathBuf};

use scout_core::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunManifest {
    pub subcommand: String,
    /// Arguments after the program name, exactly as given.
    pub args: Vec<String>,
    pub inputs: Vec<FileDigest>,
    pub seed: u64,
    pub parameters: serde_json::Value,
    pub tool_version: String,
    pub outputs: Vec<FileDigest>,
}

impl RunManifest {
    pub fn path_for(output: &Path) -> PathBuf {
        let mut s = output.as_os_str().to_owned();
        s.push(".manifest.json");
        PathBuf::from(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        scout_core::io::read_json(path)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        scout_core::io::write_json(path, self)
    }
}

/// Columns that hold wall-clock measurements and so never reproduce.
fn is_timing_column(name: &str) -> bool {
    name.ends_with("_ms")
}

/// SHA-256 of a file. For CSV tables, timing columns are blanked first so the
/// digest only covers reproducible content.
pub fn digest(path: &Path) -> Result<FileDigest> {
    let bytes = std::fs::read(path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
    let is_csv = path.extension().is_some_and(|e| e == "csv");
    let mut h = Sha256::new();
    if is_csv {
        let text = String::from_utf8_lossy(&bytes);
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().unwrap_or_default().split(',').collect();
        let keep: Vec<bool> = header.iter().map(|c| !is_timing_column(c)).collect();
        for line in std::iter::once(header.join(",")).chain(lines.map(str::to_string)) {
            let fields: Vec<&str> =
                line.split(',').zip(keep.iter().chain(std::iter::repeat(&true))).filter(|(_, k)| **k).map(|(f, _)| f).collect();
            h.update(fields.join(",").as_bytes());
            h.update(b"\n");
        }
    } else {
        h.update(&bytes);
    }
    Ok(FileDigest { path: path.to_path_buf(), sha256: hex::encode(h.finalize()) })
}
