//! File plumbing shared by the subcommands.

use std::fs;
use std::path::{Path, PathBuf};

use fvmc::{Mdp, MdpDocument, Scalar};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::args::{Format, GlobalArgs};
use crate::error::{CliError, CliResult};

/// Version of every emitted JSON document and CSV column layout.
pub const FORMAT_VERSION: u32 = 1;

pub fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::parse(path, e))
}

/// Reads the `--config` file, or falls back to the default when none is given.
pub fn config_or_default<T: DeserializeOwned + Default>(global: &GlobalArgs) -> CliResult<T> {
    match &global.config {
        Some(path) => read_json(path),
        None => Ok(T::default()),
    }
}

pub fn require_config(global: &GlobalArgs, command: &str) -> CliResult<PathBuf> {
    global
        .config
        .clone()
        .ok_or_else(|| CliError::Usage(format!("{command} needs --config")))
}

pub fn read_document(path: &Path) -> CliResult<MdpDocument> {
    read_json(path)
}

pub fn load_mdp<S: Scalar>(path: &Path) -> CliResult<Mdp<S>> {
    let doc = read_document(path)?;
    Ok(Mdp::from_document(&doc)?)
}

/// Resolves a path from a config file relative to that file's directory.
pub fn relative_to(config: &Path, target: &Path) -> PathBuf {
    if target.is_absolute() {
        return target.to_path_buf();
    }
    config.parent().unwrap_or(Path::new("")).join(target)
}

pub fn pretty(value: &impl Serialize) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("output serializes");
    text.push('\n');
    text
}

/// Artifact sink: files go under the output directory.
pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> CliResult<Self> {
        fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(Self { root: root.to_path_buf() })
    }

    /// The `--out-dir` flag, required by subcommands whose artifacts are files.
    pub fn required(global: &GlobalArgs, command: &str) -> CliResult<Self> {
        match &global.out_dir {
            Some(dir) => Self::create(dir),
            None => Err(CliError::Usage(format!("{command} needs --out-dir"))),
        }
    }

    pub fn write(&self, name: &str, contents: &[u8]) -> CliResult<PathBuf> {
        let path = self.root.join(name);
        fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }

    pub fn write_json(&self, name: &str, value: &impl Serialize) -> CliResult<PathBuf> {
        self.write(name, pretty(value).as_bytes())
    }
}

/// Prints to stdout and, with `--out-dir`, also saves under `name`.
pub fn emit_text(global: &GlobalArgs, name: &str, text: &str) -> CliResult<()> {
    if let Some(dir) = &global.out_dir {
        OutDir::create(dir)?.write(name, text.as_bytes())?;
    }
    print!("{text}");
    Ok(())
}

pub fn emit_report(global: &GlobalArgs, name: &str, report: &Value) -> CliResult<()> {
    emit_text(global, name, &pretty(report))
}

pub fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::Usage(format!("csv encoding failed: {e}"));
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| CliError::Usage(format!("csv encoding failed: {e}")))
}

pub fn only_json(global: &GlobalArgs, command: &str) -> CliResult<()> {
    match global.format {
        Some(Format::Csv) => Err(CliError::Usage(format!("{command} only emits json"))),
        _ => Ok(()),
    }
}

/// Shortest round-trip decimal for an f64.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

pub fn print_report(report: &Value) {
    print!("{}", pretty(report));
}
