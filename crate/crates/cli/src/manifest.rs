//! Run manifests and atomic output writing.
//!
//! Every subcommand records what it read, what it wrote, and the fully
//! resolved configuration it ran with. Manifests carry no timestamps or
//! machine identifiers, so rerunning a command on the same inputs
//! reproduces every output file — manifest included — byte for byte.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use opmeter_core::{Error, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

const MANIFEST_FORMAT: &str = "opmeter-manifest";
const MANIFEST_FORMAT_VERSION: u32 = 1;

/// SHA-256 of a file's contents, lowercase hex.
pub fn hash_file(path: &Path) -> Result<String> {
    let mut file = fs::File::open(path)
        .map_err(|e| Error::data(format!("cannot open {}: {e}", path.display())))?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

fn hash_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Write `bytes` to `dir/name` atomically (temp file + rename).
pub fn atomic_write(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let target = dir.join(name);
    let mut tmp = tempfile::Builder::new()
        .prefix(".opmeter-tmp-")
        .tempfile_in(dir)
        .map_err(|e| Error::data(format!("cannot create temp file in {}: {e}", dir.display())))?;
    std::io::Write::write_all(&mut tmp, bytes)?;
    tmp.persist(&target)
        .map_err(|e| Error::data(format!("cannot write {}: {e}", target.display())))?;
    Ok(target)
}

#[derive(Serialize)]
struct FileEntry {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct ManifestDoc<'a> {
    format: &'a str,
    format_version: u32,
    toolkit_version: &'a str,
    command: &'a str,
    config: &'a serde_json::Value,
    inputs: &'a [FileEntry],
    outputs: &'a [FileEntry],
}

/// Collects inputs and outputs for one command run, then writes
/// `manifest-<command>.json` alongside the outputs.
pub struct Manifest {
    command: String,
    config: serde_json::Value,
    out_dir: PathBuf,
    inputs: Vec<FileEntry>,
    outputs: Vec<FileEntry>,
}

impl Manifest {
    pub fn new(command: &str, out_dir: &Path, config: serde_json::Value) -> Manifest {
        Manifest {
            command: command.to_string(),
            config,
            out_dir: out_dir.to_path_buf(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    /// Record (and hash) an input file, keyed by the path as the user gave it.
    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(FileEntry {
            path: path.display().to_string(),
            sha256: hash_file(path)?,
        });
        Ok(())
    }

    /// Write one output file atomically into the out directory and record it.
    pub fn write_output(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        atomic_write(&self.out_dir, name, bytes)?;
        self.outputs.push(FileEntry { path: name.to_string(), sha256: hash_bytes(bytes) });
        Ok(())
    }

    /// Write the manifest itself. Call last.
    pub fn finish(self) -> Result<()> {
        let doc = ManifestDoc {
            format: MANIFEST_FORMAT,
            format_version: MANIFEST_FORMAT_VERSION,
            toolkit_version: opmeter_core::VERSION,
            command: &self.command,
            config: &self.config,
            inputs: &self.inputs,
            outputs: &self.outputs,
        };
        let text = serde_json::to_string_pretty(&doc)
            .map_err(|e| Error::internal(format!("manifest serialization failed: {e}")))?;
        let name = format!("manifest-{}.json", self.command);
        atomic_write(&self.out_dir, &name, text.as_bytes())?;
        Ok(())
    }
}
