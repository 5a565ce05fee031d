//! `manifest.json`: every file a run wrote, with size and SHA-256.
//! No timestamps or worker details, so identical inputs give an identical
//! manifest.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Serialize)]
struct Entry {
    file: String,
    bytes: u64,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    operation: &'a str,
    tag: &'a str,
    outputs: Vec<Entry>,
}

pub struct Outputs {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Outputs {
    pub fn new(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::output(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    /// Path for a new output file, recorded for the manifest.
    pub fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.files.push(p.clone());
        p
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<PathBuf, CliError> {
        let p = self.path(name);
        std::fs::write(&p, text).map_err(|e| CliError::output(&p, e))?;
        Ok(p)
    }

    pub fn finish(self, operation: &str, tag: &str) -> Result<(), CliError> {
        let mut outputs = Vec::with_capacity(self.files.len());
        for f in &self.files {
            let data = std::fs::read(f).map_err(|e| CliError::output(f, e))?;
            outputs.push(Entry {
                file: f.file_name().unwrap().to_string_lossy().into_owned(),
                bytes: data.len() as u64,
                sha256: hex::encode(Sha256::digest(&data)),
            });
            println!("wrote {}", f.display());
        }
        let m = Manifest { operation, tag, outputs };
        let path = self.dir.join("manifest.json");
        let mut json = serde_json::to_string_pretty(&m).expect("manifest serializes");
        json.push('\n');
        std::fs::write(&path, json).map_err(|e| CliError::output(&path, e))?;
        println!("wrote {}", path.display());
        Ok(())
    }
}
