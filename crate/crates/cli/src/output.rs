//! Files written under `--output-dir`, listed in `manifest.json`.
//!
//! Reports are deterministic for a given config and seed; wall-clock data
//! goes to `metadata.json` only.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Map, Value};

pub struct Output {
    root: PathBuf,
    files: Vec<String>,
    metadata: Map<String, Value>,
}

impl Output {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Output {
            root: root.to_path_buf(),
            files: Vec::new(),
            metadata: Map::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Opens `name` (relative, may contain a subdirectory) and hands a writer to `body`.
    pub fn file(&mut self, name: &str, body: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
        let path = self.root.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let mut w = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
        body(&mut w)?;
        w.flush()?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let text = serde_json::to_string_pretty(value)?;
        self.file(name, |w| {
            writeln!(w, "{text}")?;
            Ok(())
        })
    }

    /// A CSV with a header row and one line per record.
    pub fn csv<R: AsRef<[f64]>>(&mut self, name: &str, header: &str, rows: impl IntoIterator<Item = R>) -> Result<()> {
        self.file(name, |w| {
            writeln!(w, "{header}")?;
            for row in rows {
                let line: Vec<String> = row.as_ref().iter().map(|v| format!("{v:?}")).collect();
                writeln!(w, "{}", line.join(","))?;
            }
            Ok(())
        })
    }

    pub fn note(&mut self, key: &str, value: Value) {
        self.metadata.insert(key.to_string(), value);
    }

    /// Writes `metadata.json` and the manifest of every file produced.
    pub fn finish(mut self, command: &str) -> Result<()> {
        let metadata = Value::Object(std::mem::take(&mut self.metadata));
        self.json("metadata.json", &metadata)?;
        let manifest = json!({ "command": command, "files": self.files });
        let text = serde_json::to_string_pretty(&manifest)?;
        fs::write(self.root.join("manifest.json"), format!("{text}\n"))?;
        Ok(())
    }
}
