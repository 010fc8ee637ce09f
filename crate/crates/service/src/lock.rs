use std::fs::{self, File, OpenOptions, TryLockError};
use std::path::{Path, PathBuf};

use crate::error::ServiceError;

pub const LOCK_FILE: &str = "service.lock";

/// Exclusive hold on a data directory. Released on drop.
#[derive(Debug)]
pub struct DataDirLock {
    _file: File,
    path: PathBuf,
}

impl DataDirLock {
    pub fn acquire(data_dir: &Path) -> Result<Self, ServiceError> {
        fs::create_dir_all(data_dir)
            .map_err(|e| ServiceError::Io(data_dir.display().to_string(), e))?;
        let path = data_dir.join(LOCK_FILE);
        let file = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(&path)
            .map_err(|e| ServiceError::Io(path.display().to_string(), e))?;
        match file.try_lock() {
            Ok(()) => Ok(DataDirLock { _file: file, path }),
            Err(TryLockError::WouldBlock) => {
                Err(ServiceError::Locked(data_dir.display().to_string()))
            }
            Err(TryLockError::Error(e)) => Err(ServiceError::Io(path.display().to_string(), e)),
        }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}
