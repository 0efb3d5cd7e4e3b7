use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::CliError;

pub const MANIFEST: &str = "manifest.json";
pub const SNAPSHOT: &str = "config.resolved.toml";

fn io_err(what: &str, path: &Path, e: std::io::Error) -> CliError {
    CliError::data(format!("{what} {}: {e}", path.display()))
}

/// Create the output directory. An existing non-empty one needs `force`.
pub fn prepare_out(out: &Path, force: bool) -> Result<(), CliError> {
    if out.is_file() {
        return Err(CliError::config(format!("output path {} is a file", out.display())));
    }
    if out.is_dir() && !force {
        let mut entries = fs::read_dir(out).map_err(|e| io_err("reading", out, e))?;
        if entries.next().is_some() {
            return Err(CliError::config(format!(
                "output directory {} is not empty; pass --force to write into it",
                out.display()
            )));
        }
    }
    fs::create_dir_all(out).map_err(|e| io_err("creating", out, e))
}

pub fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| io_err("creating", dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| io_err("writing", path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::data(e.to_string()))?;
    text.push('\n');
    write(path, text.as_bytes())
}

fn files_under(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), CliError> {
    for entry in fs::read_dir(dir).map_err(|e| io_err("reading", dir, e))? {
        let path = entry.map_err(|e| io_err("reading", dir, e))?.path();
        if path.is_dir() {
            files_under(root, &path, out)?;
        } else {
            out.push(path.strip_prefix(root).expect("walk stays under root").to_path_buf());
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct FileEntry {
    path: String,
    bytes: u64,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    seed: u64,
    config_sha256: String,
    files: Vec<FileEntry>,
}

fn sha256(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Write the resolved config and a manifest of every file under `out`.
pub fn finish(command: &str, cfg: &RunConfig) -> Result<(), CliError> {
    let out = &cfg.paths.out;
    let snapshot = cfg.to_toml()?;
    write(&out.join(SNAPSHOT), snapshot.as_bytes())?;
    let mut paths = Vec::new();
    files_under(out, out, &mut paths)?;
    paths.retain(|p| p != Path::new(MANIFEST));
    paths.sort();
    let mut files = Vec::with_capacity(paths.len());
    for rel in paths {
        let full = out.join(&rel);
        let bytes = fs::read(&full).map_err(|e| io_err("reading", &full, e))?;
        files.push(FileEntry {
            path: rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/"),
            bytes: bytes.len() as u64,
            sha256: sha256(&bytes),
        });
    }
    let manifest = Manifest {
        command,
        version: env!("CARGO_PKG_VERSION"),
        seed: cfg.seed,
        config_sha256: sha256(snapshot.as_bytes()),
        files,
    };
    write_json(&out.join(MANIFEST), &manifest)
}
