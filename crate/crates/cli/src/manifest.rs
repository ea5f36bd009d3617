use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliResult;

#[derive(Debug, Serialize)]
pub struct FileRecord {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Versions {
    pub cli: &'static str,
    pub core: &'static str,
    pub dataset_format: u32,
    pub policy_format: u32,
    pub tree_format: u32,
}

/// Machine-readable record of one invocation, printed to stdout.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub command: &'static str,
    pub versions: Versions,
    pub seed: Option<u64>,
    pub threads: usize,
    pub settings: serde_json::Value,
    pub schema_hash: Option<String>,
    pub inputs: Vec<FileRecord>,
    pub outputs: Vec<FileRecord>,
    pub summary: serde_json::Value,
}

pub fn file_sha256(path: &Path) -> CliResult<String> {
    let bytes = std::fs::read(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl Manifest {
    pub fn new(command: &'static str, threads: usize) -> Self {
        Self {
            tool: "tapol",
            command,
            versions: Versions {
                cli: env!("CARGO_PKG_VERSION"),
                core: tapol_core::VERSION,
                dataset_format: tapol_core::io::FORMAT_VERSION,
                policy_format: tapol_core::policy::POLICY_FORMAT_VERSION,
                tree_format: tapol_core::tree::TREE_FORMAT_VERSION,
            },
            seed: None,
            threads,
            settings: serde_json::Value::Null,
            schema_hash: None,
            inputs: Vec::new(),
            outputs: Vec::new(),
            summary: serde_json::Value::Null,
        }
    }

    fn record(role: &str, path: &Path) -> CliResult<FileRecord> {
        Ok(FileRecord {
            role: role.to_string(),
            path: path.display().to_string(),
            sha256: file_sha256(path)?,
        })
    }

    pub fn input(&mut self, role: &str, path: &Path) -> CliResult<()> {
        self.inputs.push(Self::record(role, path)?);
        Ok(())
    }

    pub fn output(&mut self, role: &str, path: &Path) -> CliResult<()> {
        self.outputs.push(Self::record(role, path)?);
        Ok(())
    }
}
