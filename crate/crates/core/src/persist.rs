//! Crash-safe file replacement: write a sibling temp file, flush, fsync,
//! rename over the target.
//!
//! [`FaultInjector`] stops a write at a chosen step to simulate a crash. A
//! write interrupted at any step leaves the target at its previous contents.

use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

/// Replaces the file at `path` with `contents`.
pub trait Persister: Send + Sync {
    fn write(&self, path: &Path, contents: &[u8]) -> io::Result<()>;
}

/// The production persister.
#[derive(Debug, Default, Clone, Copy)]
pub struct AtomicFile;

impl Persister for AtomicFile {
    fn write(&self, path: &Path, contents: &[u8]) -> io::Result<()> {
        atomic_write(path, contents, None)
    }
}

/// Step of [`atomic_write`] at which an injected fault strikes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaultPoint {
    /// Before the temp file exists.
    CreateTemp,
    /// After half of the contents reached the temp file.
    PartialWrite,
    /// Temp file complete and synced, rename not attempted.
    BeforeRename,
    /// The rename itself fails.
    Rename,
}

impl FaultPoint {
    pub const ALL: [FaultPoint; 4] = [
        FaultPoint::CreateTemp,
        FaultPoint::PartialWrite,
        FaultPoint::BeforeRename,
        FaultPoint::Rename,
    ];
}

/// Persister that fails the `nth` write (0-based) at `point`, then behaves
/// like [`AtomicFile`]. Interrupted temp files are left on disk, as a killed
/// process would leave them.
#[derive(Debug)]
pub struct FaultInjector {
    schedule: Mutex<Option<(u64, FaultPoint)>>,
    calls: AtomicU64,
}

impl FaultInjector {
    pub fn new() -> Self {
        Self {
            schedule: Mutex::new(None),
            calls: AtomicU64::new(0),
        }
    }

    /// Arms a single fault `after` writes from now.
    pub fn arm(&self, after: u64, point: FaultPoint) {
        let now = self.calls.load(Ordering::SeqCst);
        *self.schedule.lock().unwrap() = Some((now + after, point));
    }
}

impl Default for FaultInjector {
    fn default() -> Self {
        Self::new()
    }
}

impl Persister for FaultInjector {
    fn write(&self, path: &Path, contents: &[u8]) -> io::Result<()> {
        let call = self.calls.fetch_add(1, Ordering::SeqCst);
        let fault = {
            let mut schedule = self.schedule.lock().unwrap();
            match *schedule {
                Some((at, point)) if at == call => {
                    *schedule = None;
                    Some(point)
                }
                _ => None,
            }
        };
        atomic_write(path, contents, fault)
    }
}

static TEMP_COUNTER: AtomicU64 = AtomicU64::new(0);

fn temp_path(path: &Path) -> PathBuf {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let n = TEMP_COUNTER.fetch_add(1, Ordering::Relaxed);
    path.with_file_name(format!(".{name}.tmp-{}-{n}", std::process::id()))
}

fn injected(point: FaultPoint) -> io::Error {
    io::Error::other(format!("injected fault at {point:?}"))
}

/// Write-to-temp-and-rename. `fault` aborts at the given step.
pub fn atomic_write(path: &Path, contents: &[u8], fault: Option<FaultPoint>) -> io::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    if fault == Some(FaultPoint::CreateTemp) {
        return Err(injected(FaultPoint::CreateTemp));
    }
    let tmp = temp_path(path);
    let result = write_then_rename(&tmp, path, contents, fault);
    if result.is_err() && fault.is_none() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

fn write_then_rename(
    tmp: &Path,
    path: &Path,
    contents: &[u8],
    fault: Option<FaultPoint>,
) -> io::Result<()> {
    let mut file = File::create(tmp)?;
    if fault == Some(FaultPoint::PartialWrite) {
        file.write_all(&contents[..contents.len() / 2])?;
        return Err(injected(FaultPoint::PartialWrite));
    }
    file.write_all(contents)?;
    file.flush()?;
    file.sync_all()?;
    drop(file);
    match fault {
        Some(FaultPoint::BeforeRename) | Some(FaultPoint::Rename) => {
            return Err(injected(fault.unwrap()))
        }
        _ => {}
    }
    fs::rename(tmp, path)?;
    sync_parent(path);
    Ok(())
}

#[cfg(unix)]
fn sync_parent(path: &Path) {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        if let Ok(d) = File::open(dir) {
            let _ = d.sync_all();
        }
    }
}

#[cfg(not(unix))]
fn sync_parent(_path: &Path) {}
