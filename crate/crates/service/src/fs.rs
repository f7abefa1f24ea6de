//! Crash-safe file replacement.
//!
//! A file is replaced by writing a sibling temp file, syncing it, renaming it
//! over the target and syncing the directory. A crash at any point leaves
//! either the old or the new content at the target path, plus possibly a
//! stray temp file that [`remove_temp_files`] cleans up.

use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

pub(crate) const TEMP_SUFFIX: &str = ".tmp";

/// Points in a write at which a fault can be injected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    /// Part of the bytes are in the temp file.
    PartialWrite,
    /// All bytes are written but not synced.
    Written,
    /// The temp file is synced but not renamed.
    Synced,
    /// The rename is done but the directory is not synced.
    Renamed,
    /// About to delete a file.
    Remove,
}

/// Called at each stage; an error aborts the operation as a crash would,
/// without cleanup.
pub trait FaultHook: Send + Sync {
    fn check(&self, stage: Stage) -> io::Result<()>;
}

/// No faults.
pub struct NoFaults;

impl FaultHook for NoFaults {
    fn check(&self, _: Stage) -> io::Result<()> {
        Ok(())
    }
}

static COUNTER: AtomicU64 = AtomicU64::new(0);

fn temp_path(path: &Path) -> PathBuf {
    let n = COUNTER.fetch_add(1, Ordering::Relaxed);
    let name = path.file_name().and_then(|s| s.to_str()).unwrap_or("file");
    path.with_file_name(format!(".{name}.{}.{n}{TEMP_SUFFIX}", std::process::id()))
}

fn sync_dir(dir: &Path) -> io::Result<()> {
    // Directory fsync is not supported everywhere; failure to open is not fatal.
    match File::open(dir) {
        Ok(f) => f.sync_all().or(Ok(())),
        Err(_) => Ok(()),
    }
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8], hook: &dyn FaultHook) -> io::Result<()> {
    let tmp = temp_path(path);
    let mut f = OpenOptions::new().write(true).create_new(true).open(&tmp)?;
    let half = bytes.len() / 2;
    f.write_all(&bytes[..half])?;
    hook.check(Stage::PartialWrite)?;
    f.write_all(&bytes[half..])?;
    hook.check(Stage::Written)?;
    f.sync_all()?;
    drop(f);
    hook.check(Stage::Synced)?;
    fs::rename(&tmp, path)?;
    hook.check(Stage::Renamed)?;
    sync_dir(path.parent().unwrap_or(Path::new(".")))
}

pub(crate) fn remove(path: &Path, hook: &dyn FaultHook) -> io::Result<()> {
    hook.check(Stage::Remove)?;
    match fs::remove_file(path) {
        Err(e) if e.kind() == io::ErrorKind::NotFound => {}
        other => other?,
    }
    sync_dir(path.parent().unwrap_or(Path::new(".")))
}

pub(crate) fn remove_temp_files(dir: &Path) -> io::Result<()> {
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        let name = entry.file_name();
        let name = name.to_string_lossy();
        if name.starts_with('.') && name.ends_with(TEMP_SUFFIX) {
            fs::remove_file(entry.path())?;
        }
    }
    Ok(())
}
