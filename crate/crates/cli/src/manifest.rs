//! Run manifests: a JSON record emitted alongside every output artifact
//! so a run can be audited and reproduced. The manifest captures the
//! exact command line, the resolved settings (after merging flags over
//! the config file), the seed, and 64-bit FNV-1a digests of all input
//! and output files.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::CliError;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a digest of a byte stream.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Record of one command invocation, serialized next to its outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command_line: Vec<String>,
    pub seed: u64,
    /// Settings after merging command-line flags over the config file.
    pub settings: BTreeMap<String, String>,
    /// Input path -> FNV-1a 64 digest (hex).
    pub inputs: BTreeMap<String, String>,
    /// Output path -> FNV-1a 64 digest (hex).
    pub outputs: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(command_line: Vec<String>, seed: u64, settings: BTreeMap<String, String>) -> Self {
        Self {
            tool: "chrseg",
            version: env!("CARGO_PKG_VERSION"),
            command_line,
            seed,
            settings,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    fn digest_of(path: &Path) -> Result<String, CliError> {
        let bytes = fs::read(path).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(format!("{:016x}", fnv1a64(&bytes)))
    }

    /// Records an input file's digest.
    pub fn add_input(&mut self, path: &Path) -> Result<(), CliError> {
        let digest = Self::digest_of(path)?;
        self.inputs.insert(path.display().to_string(), digest);
        Ok(())
    }

    /// Records an output file's digest (call after writing the file).
    pub fn add_output(&mut self, path: &Path) -> Result<(), CliError> {
        let digest = Self::digest_of(path)?;
        self.outputs.insert(path.display().to_string(), digest);
        Ok(())
    }

    /// Writes the manifest as `<primary>.manifest.json`, or
    /// `manifest.json` inside `primary` when it is a directory.
    pub fn write_alongside(&self, primary: &Path) -> Result<(), CliError> {
        let path = if primary.is_dir() {
            primary.join("manifest.json")
        } else {
            let mut name = primary.file_name().unwrap_or_default().to_os_string();
            name.push(".manifest.json");
            primary.with_file_name(name)
        };
        let body = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(&path, body).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}
