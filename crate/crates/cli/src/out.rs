//! Output files. Every CSV opens with `#` metadata lines and every JSON
//! document carries a `meta` object, so each artifact names the run that
//! produced it.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use tourism_core::{Error, Result};

#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
    pub preset: String,
}

impl Meta {
    fn csv_header(&self) -> String {
        format!(
            "# tool: {}\n# version: {}\n# command: {}\n# config_sha256: {}\n# seed: {}\n# preset: {}\n",
            self.tool, self.version, self.command, self.config_sha256, self.seed, self.preset
        )
    }
}

pub struct OutDir {
    pub root: PathBuf,
    pub meta: Meta,
    pub written: Vec<PathBuf>,
}

impl OutDir {
    pub fn create(root: &Path, meta: Meta) -> Result<Self> {
        fs::create_dir_all(root).map_err(|e| Error::Io(format!("{}: {e}", root.display())))?;
        Ok(Self {
            root: root.to_path_buf(),
            meta,
            written: Vec::new(),
        })
    }

    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(name);
        fs::write(&path, bytes).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        self.written.push(path);
        Ok(())
    }

    /// Writes a CSV with the metadata preamble, a header row and `rows`.
    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let mut buf = self.meta.csv_header().into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(header)?;
            for r in rows {
                w.write_record(r)?;
            }
            w.flush()?;
        }
        self.put(name, &buf)
    }

    /// Writes raw CSV bytes after the metadata preamble.
    pub fn csv_raw(&mut self, name: &str, body: &[u8]) -> Result<()> {
        let mut buf = self.meta.csv_header().into_bytes();
        buf.write_all(body)?;
        self.put(name, &buf)
    }

    /// Writes `{"meta": ..., ...body}` as pretty JSON. `body` must serialize
    /// to an object.
    pub fn json<T: Serialize>(&mut self, name: &str, body: &T) -> Result<()> {
        let mut value = serde_json::to_value(body).map_err(|e| Error::Format(e.to_string()))?;
        let meta = serde_json::to_value(&self.meta).map_err(|e| Error::Format(e.to_string()))?;
        match value.as_object_mut() {
            Some(obj) => {
                obj.insert("meta".into(), meta);
            }
            None => return Err(Error::Format(format!("{name}: body is not an object"))),
        }
        let mut text = serde_json::to_string_pretty(&value).map_err(|e| Error::Format(e.to_string()))?;
        text.push('\n');
        self.put(name, text.as_bytes())
    }
}

/// Shortest round-trip decimal form.
pub fn num(v: f64) -> String {
    format!("{v}")
}
