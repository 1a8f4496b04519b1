//! Plain-file record store. Each record is one JSON file; writes go to a
//! temporary file in the same directory and are renamed into place.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use parking_lot::Mutex;
use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("store I/O error at {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("corrupt record {path}: {source}")]
    Corrupt { path: PathBuf, source: serde_json::Error },
    #[error("invalid record id `{0}`")]
    InvalidId(String),
    #[error("record {0} not found")]
    Missing(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Kind {
    Datasets,
    Models,
    Spaces,
    Sessions,
    Jobs,
}

impl Kind {
    pub const ALL: [Kind; 5] = [Kind::Datasets, Kind::Models, Kind::Spaces, Kind::Sessions, Kind::Jobs];

    pub fn dir(self) -> &'static str {
        match self {
            Kind::Datasets => "datasets",
            Kind::Models => "models",
            Kind::Spaces => "spaces",
            Kind::Sessions => "sessions",
            Kind::Jobs => "jobs",
        }
    }
}

pub struct Store {
    root: PathBuf,
    locks: Mutex<HashMap<PathBuf, Arc<Mutex<()>>>>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.to_path_buf(), source }
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        for kind in Kind::ALL {
            let dir = root.join(kind.dir());
            fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        }
        Ok(Self { root, locks: Mutex::new(HashMap::new()) })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn path(&self, kind: Kind, id: &str) -> Result<PathBuf, StoreError> {
        let ok = !id.is_empty()
            && id.len() <= 128
            && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_');
        if !ok {
            return Err(StoreError::InvalidId(id.to_string()));
        }
        Ok(self.root.join(kind.dir()).join(format!("{id}.json")))
    }

    fn lock_for(&self, path: &Path) -> Arc<Mutex<()>> {
        self.locks.lock().entry(path.to_path_buf()).or_default().clone()
    }

    fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
        let dir = path.parent().expect("record paths have a parent");
        let tmp = dir.join(format!(".{}.tmp", ulid::Ulid::new()));
        let result = (|| {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(bytes)?;
            f.sync_all()?;
            fs::rename(&tmp, path)
        })();
        if result.is_err() {
            let _ = fs::remove_file(&tmp);
        }
        result.map_err(io_err(path))
    }

    pub fn exists(&self, kind: Kind, id: &str) -> bool {
        self.path(kind, id).map(|p| p.is_file()).unwrap_or(false)
    }

    pub fn put<T: Serialize>(&self, kind: Kind, id: &str, value: &T) -> Result<(), StoreError> {
        let path = self.path(kind, id)?;
        let bytes = serde_json::to_vec(value).map_err(|source| StoreError::Corrupt { path: path.clone(), source })?;
        let lock = self.lock_for(&path);
        let _guard = lock.lock();
        Self::write_atomic(&path, &bytes)
    }

    /// Writes only when no record with this id exists. Returns whether it wrote.
    pub fn put_new<T: Serialize>(&self, kind: Kind, id: &str, value: &T) -> Result<bool, StoreError> {
        let path = self.path(kind, id)?;
        let lock = self.lock_for(&path);
        let _guard = lock.lock();
        if path.is_file() {
            return Ok(false);
        }
        let bytes = serde_json::to_vec(value).map_err(|source| StoreError::Corrupt { path: path.clone(), source })?;
        Self::write_atomic(&path, &bytes)?;
        Ok(true)
    }

    pub fn get_bytes(&self, kind: Kind, id: &str) -> Result<Option<Vec<u8>>, StoreError> {
        let path = self.path(kind, id)?;
        match fs::read(&path) {
            Ok(b) => Ok(Some(b)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(io_err(&path)(e)),
        }
    }

    pub fn get<T: DeserializeOwned>(&self, kind: Kind, id: &str) -> Result<Option<T>, StoreError> {
        let path = self.path(kind, id)?;
        match self.get_bytes(kind, id)? {
            None => Ok(None),
            Some(b) => serde_json::from_slice(&b).map(Some).map_err(|source| StoreError::Corrupt { path, source }),
        }
    }

    /// Read-modify-write under the record's lock. The record is rewritten only if
    /// `f` succeeds.
    pub fn update<T, R, E>(&self, kind: Kind, id: &str, f: impl FnOnce(&mut T) -> Result<R, E>) -> Result<R, E>
    where
        T: Serialize + DeserializeOwned,
        E: From<StoreError>,
    {
        let path = self.path(kind, id)?;
        let lock = self.lock_for(&path);
        let _guard = lock.lock();
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(StoreError::Missing(format!("{}/{id}", kind.dir())).into())
            }
            Err(e) => return Err(io_err(&path)(e).into()),
        };
        let mut value: T =
            serde_json::from_slice(&bytes).map_err(|source| StoreError::Corrupt { path: path.clone(), source })?;
        let out = f(&mut value)?;
        let bytes = serde_json::to_vec(&value).map_err(|source| StoreError::Corrupt { path: path.clone(), source })?;
        Self::write_atomic(&path, &bytes)?;
        Ok(out)
    }

    /// Record ids of one kind, sorted.
    pub fn list(&self, kind: Kind) -> Result<Vec<String>, StoreError> {
        let dir = self.root.join(kind.dir());
        let mut ids: Vec<String> = fs::read_dir(&dir)
            .map_err(io_err(&dir))?
            .filter_map(|e| e.ok())
            .filter_map(|e| {
                let name = e.file_name().into_string().ok()?;
                if name.starts_with('.') {
                    return None;
                }
                name.strip_suffix(".json").map(str::to_string)
            })
            .collect();
        ids.sort();
        Ok(ids)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_update_and_listing() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        store.put(Kind::Jobs, "b", &vec![1, 2]).unwrap();
        store.put(Kind::Jobs, "a", &vec![3]).unwrap();
        assert_eq!(store.get::<Vec<i32>>(Kind::Jobs, "b").unwrap(), Some(vec![1, 2]));
        assert_eq!(store.get::<Vec<i32>>(Kind::Jobs, "zz").unwrap(), None);
        assert_eq!(store.list(Kind::Jobs).unwrap(), ["a", "b"]);

        let n: Result<usize, StoreError> = store.update(Kind::Jobs, "b", |v: &mut Vec<i32>| {
            v.push(9);
            Ok(v.len())
        });
        assert_eq!(n.unwrap(), 3);
        assert_eq!(store.get::<Vec<i32>>(Kind::Jobs, "b").unwrap(), Some(vec![1, 2, 9]));

        let failed: Result<(), StoreError> = store.update(Kind::Jobs, "b", |v: &mut Vec<i32>| {
            v.clear();
            Err(StoreError::InvalidId("x".into()))
        });
        assert!(failed.is_err());
        assert_eq!(store.get::<Vec<i32>>(Kind::Jobs, "b").unwrap(), Some(vec![1, 2, 9]));

        assert!(!store.put_new(Kind::Jobs, "a", &vec![0]).unwrap());
        assert!(matches!(store.put(Kind::Jobs, "../x", &0), Err(StoreError::InvalidId(_))));
    }

    #[test]
    fn temp_files_are_invisible() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        fs::write(dir.path().join("models").join(".partial.tmp"), b"{").unwrap();
        assert!(store.list(Kind::Models).unwrap().is_empty());
    }

    #[test]
    fn concurrent_updates_serialize() {
        let dir = tempfile::tempdir().unwrap();
        let store = Arc::new(Store::open(dir.path()).unwrap());
        store.put(Kind::Sessions, "s", &0u64).unwrap();
        let handles: Vec<_> = (0..8)
            .map(|_| {
                let s = store.clone();
                std::thread::spawn(move || {
                    for _ in 0..25 {
                        let r: Result<(), StoreError> = s.update(Kind::Sessions, "s", |n: &mut u64| {
                            *n += 1;
                            Ok(())
                        });
                        r.unwrap();
                    }
                })
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        assert_eq!(store.get::<u64>(Kind::Sessions, "s").unwrap(), Some(200));
    }
}
