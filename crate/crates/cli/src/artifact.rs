//! Output files: a `# key=value` run header followed by the payload, written
//! through a temporary file in the destination directory and renamed into place.

use std::io::{self, Write};
use std::path::Path;

use tempfile::NamedTempFile;

/// Resolved run configuration, in the order it is echoed.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RunHeader {
    pub entries: Vec<(String, String)>,
}

impl RunHeader {
    pub fn push(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.entries.push((key.into(), value.into()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("# {k}={v}\n")).collect()
    }

    /// Header block at the top of an artifact: the leading run of `# key=value` lines.
    pub fn parse(text: &str) -> Self {
        let entries = text
            .lines()
            .map_while(|l| l.strip_prefix("# "))
            .filter_map(|l| l.split_once('='))
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        Self { entries }
    }

    /// Argument vector (without the program name) that reproduces the run.
    pub fn to_args(&self) -> Option<Vec<String>> {
        let command = self.get("command")?;
        let mut args = vec![command.to_string()];
        for (k, v) in self.entries.iter().filter(|(k, _)| k != "command") {
            args.push(format!("--{k}"));
            args.push(v.clone());
        }
        Some(args)
    }
}

/// Writes `path` so that it either keeps its old content or holds everything
/// `fill` produced. An error from `fill` leaves no trace in the directory.
pub fn write_atomic_with<F>(path: &Path, fill: F) -> io::Result<()>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = NamedTempFile::new_in(dir)?;
    {
        let mut w = io::BufWriter::new(tmp.as_file_mut());
        fill(&mut w)?;
        w.flush()?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn write_atomic(path: &Path, contents: &str) -> io::Result<()> {
    write_atomic_with(path, |w| w.write_all(contents.as_bytes()))
}
