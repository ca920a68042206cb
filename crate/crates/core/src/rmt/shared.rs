use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use super::{RmtError, Store};

/// Single-writer, multi-reader handle. Writers are serialized by the lock;
/// readers see the last committed state. With a backing path, every
/// successful mutation is written through atomically before the lock is
/// released.
#[derive(Debug, Clone)]
pub struct SharedStore {
    inner: Arc<RwLock<Store>>,
    path: Option<Arc<PathBuf>>,
}

impl SharedStore {
    pub fn in_memory(store: Store) -> Self {
        SharedStore {
            inner: Arc::new(RwLock::new(store)),
            path: None,
        }
    }

    /// Loads `path`, or starts empty if it does not exist yet.
    pub fn open(path: &Path) -> Result<Self, RmtError> {
        let store = if path.exists() {
            Store::load(path)?
        } else {
            Store::new()
        };
        Ok(SharedStore {
            inner: Arc::new(RwLock::new(store)),
            path: Some(Arc::new(path.to_path_buf())),
        })
    }

    pub fn read<R>(&self, f: impl FnOnce(&Store) -> R) -> R {
        let guard = self.inner.read().unwrap_or_else(|e| e.into_inner());
        f(&guard)
    }

    pub fn write<R>(&self, f: impl FnOnce(&mut Store) -> Result<R, RmtError>) -> Result<R, RmtError> {
        let mut guard = self.inner.write().unwrap_or_else(|e| e.into_inner());
        let out = f(&mut guard)?;
        if let Some(path) = &self.path {
            guard.save(path)?;
        }
        Ok(out)
    }

    pub fn snapshot(&self) -> Store {
        self.read(Store::clone)
    }

    pub fn flush(&self) -> Result<(), RmtError> {
        match &self.path {
            Some(path) => self.read(|s| s.save(path)),
            None => Ok(()),
        }
    }
}
