use std::collections::BTreeMap;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

/// Where a run writes its artifacts. One sink per run.
pub trait ArtifactSink: Send + Sync {
    fn write(&self, name: &str, contents: &str) -> io::Result<()>;
    /// Human-readable location of an artifact, for printing.
    fn location(&self, name: &str) -> String;
}

/// Writes artifacts as files in one directory, created on first write.
#[derive(Debug, Clone)]
pub struct DirSink {
    dir: PathBuf,
}

impl DirSink {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}

impl ArtifactSink for DirSink {
    fn write(&self, name: &str, contents: &str) -> io::Result<()> {
        std::fs::create_dir_all(&self.dir)?;
        std::fs::write(self.dir.join(name), contents)
    }

    fn location(&self, name: &str) -> String {
        self.dir.join(name).display().to_string()
    }
}

/// Keeps artifacts in memory; used by tests and the C interface.
#[derive(Debug, Default)]
pub struct MemorySink {
    files: Mutex<BTreeMap<String, String>>,
}

impl MemorySink {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, name: &str) -> Option<String> {
        self.files.lock().expect("sink lock").get(name).cloned()
    }

    pub fn names(&self) -> Vec<String> {
        self.files.lock().expect("sink lock").keys().cloned().collect()
    }
}

impl ArtifactSink for MemorySink {
    fn write(&self, name: &str, contents: &str) -> io::Result<()> {
        self.files
            .lock()
            .expect("sink lock")
            .insert(name.to_string(), contents.to_string());
        Ok(())
    }

    fn location(&self, name: &str) -> String {
        format!("memory:{name}")
    }
}
