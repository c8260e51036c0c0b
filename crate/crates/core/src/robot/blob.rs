//! Local content-addressed store standing in for cloud image hosting.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::RobotError;

#[derive(Debug, Clone)]
pub struct BlobStore {
    dir: PathBuf,
}

impl BlobStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        BlobStore { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Stores `blob` under the hex SHA-256 of its bytes and returns a
    /// `file://` URL. Storing the same bytes twice yields the same URL.
    pub fn put(&self, blob: &[u8]) -> Result<String, RobotError> {
        if blob.is_empty() {
            return Err(RobotError::EmptyBlob);
        }
        let unwritable =
            |e: std::io::Error| RobotError::StoreUnwritable(format!("{}: {e}", self.dir.display()));
        fs::create_dir_all(&self.dir).map_err(unwritable)?;
        let ext = if blob.starts_with(b"P5\n") {
            "pgm"
        } else {
            "bin"
        };
        let name = format!("{}.{ext}", hex::encode(Sha256::digest(blob)));
        let path = self.dir.join(&name);
        if !path.exists() {
            let tmp = self.dir.join(format!(".{name}.tmp"));
            fs::write(&tmp, blob).map_err(unwritable)?;
            fs::rename(&tmp, &path).map_err(unwritable)?;
        }
        let abs = fs::canonicalize(&path).map_err(unwritable)?;
        Ok(format!("file://{}", abs.display()))
    }

    pub fn get(&self, url: &str) -> Option<Vec<u8>> {
        let path = url.strip_prefix("file://")?;
        let path = Path::new(path);
        // only serve files from this store
        let dir = fs::canonicalize(&self.dir).ok()?;
        if path.parent()? != dir {
            return None;
        }
        fs::read(path).ok()
    }
}
