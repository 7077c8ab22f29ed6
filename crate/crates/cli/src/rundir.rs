use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{invalid, runtime, CliError};

/// Output directory of one command invocation. Outputs never overwrite an
/// earlier run: an explicit directory must be new or empty, the default is
/// `runs/<command>-<timestamp>`.
pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    pub fn create(explicit: Option<&Path>, command: &str) -> Result<Self, CliError> {
        let root = match explicit {
            Some(p) => {
                if p.exists() && fs::read_dir(p).map_err(runtime)?.next().is_some() {
                    return Err(invalid(format!("run directory {} is not empty", p.display())));
                }
                p.to_path_buf()
            }
            None => {
                let stamp = chrono::Local::now().format("%Y%m%d-%H%M%S");
                let base = PathBuf::from("runs").join(format!("{command}-{stamp}"));
                let mut candidate = base.clone();
                let mut n = 1;
                while candidate.exists() {
                    candidate = PathBuf::from(format!("{}-{n}", base.display()));
                    n += 1;
                }
                candidate
            }
        };
        fs::create_dir_all(&root).map_err(|e| runtime(format!("{}: {e}", root.display())))?;
        Ok(RunDir { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn create_file(&self, name: &str) -> Result<BufWriter<File>, CliError> {
        let path = self.path(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| runtime(format!("{}: {e}", parent.display())))?;
        }
        let f = File::create(&path).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
        Ok(BufWriter::new(f))
    }

    pub fn write(&self, name: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf, CliError> {
        let mut f = self.create_file(name)?;
        f.write_all(contents.as_ref())?;
        f.flush()?;
        Ok(self.path(name))
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let text = serde_json::to_string_pretty(value).map_err(runtime)?;
        self.write(name, text + "\n")
    }

    pub fn write_jsonl<T: Serialize>(&self, name: &str, rows: &[T]) -> Result<PathBuf, CliError> {
        let mut f = self.create_file(name)?;
        for r in rows {
            serde_json::to_writer(&mut f, r).map_err(runtime)?;
            f.write_all(b"\n")?;
        }
        f.flush()?;
        Ok(self.path(name))
    }
}
