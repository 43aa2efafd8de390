//! Run manifests: every command writes one next to its primary output so a
//! run can be audited and reproduced. Content is fully determined by the
//! inputs and flags (no timestamps), which is what makes rerun-and-compare
//! verification possible.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub args: BTreeMap<String, String>,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Manifest {
    pub fn new(command: &'static str) -> Manifest {
        Manifest {
            tool: "forgefuzz",
            version: env!("CARGO_PKG_VERSION"),
            command,
            args: BTreeMap::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            seed: None,
        }
    }

    pub fn arg(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.args.insert(key.to_string(), value.to_string());
        self
    }

    pub fn input(&mut self, path: &Path) -> io::Result<&mut Self> {
        let bytes = fs::read(path)?;
        let digest = Sha256::digest(&bytes);
        self.inputs.push(InputDigest {
            path: path.display().to_string(),
            sha256: hex(&digest),
        });
        Ok(self)
    }

    pub fn output(&mut self, path: &Path) -> &mut Self {
        self.outputs.push(path.display().to_string());
        self
    }

    /// Writes `<primary>.manifest.json`.
    pub fn write_beside(&self, primary_output: &Path) -> io::Result<PathBuf> {
        let mut name = primary_output
            .file_name()
            .unwrap_or_default()
            .to_os_string();
        name.push(".manifest.json");
        let path = primary_output.with_file_name(name);
        let mut body = serde_json::to_vec_pretty(self)?;
        body.push(b'\n');
        fs::write(&path, body)?;
        Ok(path)
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
