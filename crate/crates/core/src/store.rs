//! File-backed, content-addressed document collection for generated SLAs.
//!
//! Layout under the store root:
//!
//! * `slas/<id>.json` holds the canonical bytes; `<id>` is their SHA-256.
//! * `index.json` is an array of [`StoredSlaSummary`] objects. It is a cache
//!   over `slas/` and can be rebuilt by [`FileStore::rescan`].
//! * `.lock` exists while a writer mutates the store and records the
//!   writer pid and acquisition time.
//!
//! Mutations take the lock; reads never do. Both the documents and the
//! index are replaced by rename, so readers see either the old or the new
//! file. A document's `created_at` is also stamped on the file as its
//! modification time, which is what lets a rescan reproduce the index.

use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::thread;
use std::time::{Duration, SystemTime};

use chrono::{DateTime, SubsecRound, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::composer::{parse, serialize_canonical, SlaDocument};

pub const SLAS_DIR: &str = "slas";
pub const INDEX_FILE: &str = "index.json";
pub const LOCK_FILE: &str = ".lock";

pub const DEFAULT_LOCK_TIMEOUT: Duration = Duration::from_secs(5);
pub const DEFAULT_STALE_LOCK_AGE: Duration = Duration::from_secs(60);

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("store I/O error on {}: {source}", path.display())]
    StoreIoError {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("store is locked by another writer ({} held longer than {waited:?})", path.display())]
    StoreLocked { path: PathBuf, waited: Duration },
    #[error("no stored SLA with id `{0}`")]
    NotFound(String),
    #[error("stored SLA `{id}` is corrupt: {reason}")]
    CorruptDocument { id: String, reason: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::StoreIoError {
        path: path.to_path_buf(),
        source,
    }
}

/// Index entry for one stored document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredSlaSummary {
    pub id: String,
    pub application_type: String,
    #[serde(with = "timestamp")]
    pub created_at: DateTime<Utc>,
    pub size_bytes: u64,
}

mod timestamp {
    use chrono::{DateTime, Utc};
    use serde::{de, Deserialize, Deserializer, Serializer};

    use crate::model::{format_timestamp, parse_timestamp};

    pub fn serialize<S: Serializer>(t: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_timestamp(t))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let s = String::deserialize(d)?;
        parse_timestamp(&s).ok_or_else(|| de::Error::custom(format!("bad timestamp `{s}`")))
    }
}

/// Storage contract for SLA documents. [`FileStore`] is the default
/// implementation; a server-backed document database can stand in.
pub trait SlaStore {
    /// Stores `doc` and returns its id. Storing an identical document again
    /// returns the same id and keeps a single copy.
    fn put(&self, doc: &SlaDocument) -> Result<String, StoreError>;
    /// Canonical bytes of a stored document, verified against its id.
    fn get_canonical(&self, id: &str) -> Result<Vec<u8>, StoreError>;
    fn get(&self, id: &str) -> Result<SlaDocument, StoreError> {
        let bytes = self.get_canonical(id)?;
        parse(&bytes).map_err(|e| StoreError::CorruptDocument {
            id: id.to_owned(),
            reason: e.to_string(),
        })
    }
    /// Summaries sorted by `created_at`, then id.
    fn list(&self) -> Result<Vec<StoredSlaSummary>, StoreError>;
    fn delete(&self, id: &str) -> Result<(), StoreError>;
}

/// Directory-backed [`SlaStore`].
#[derive(Debug, Clone)]
pub struct FileStore {
    root: PathBuf,
    lock_timeout: Duration,
    stale_lock_age: Duration,
}

/// `^[0-9a-f]{64}$`
pub fn is_document_id(id: &str) -> bool {
    id.len() == 64
        && id
            .bytes()
            .all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
}

impl FileStore {
    /// Opens (creating if needed) a store rooted at `root`.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        let slas = root.join(SLAS_DIR);
        fs::create_dir_all(&slas).map_err(io_err(&slas))?;
        Ok(Self {
            root,
            lock_timeout: DEFAULT_LOCK_TIMEOUT,
            stale_lock_age: DEFAULT_STALE_LOCK_AGE,
        })
    }

    pub fn with_lock_timeout(mut self, timeout: Duration) -> Self {
        self.lock_timeout = timeout;
        self
    }

    pub fn with_stale_lock_age(mut self, age: Duration) -> Self {
        self.stale_lock_age = age;
        self
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn document_path(&self, id: &str) -> PathBuf {
        self.root.join(SLAS_DIR).join(format!("{id}.json"))
    }

    fn index_path(&self) -> PathBuf {
        self.root.join(INDEX_FILE)
    }

    fn read_index(&self) -> Result<Vec<StoredSlaSummary>, StoreError> {
        let path = self.index_path();
        match fs::read(&path) {
            Ok(bytes) => serde_json::from_slice(&bytes).map_err(|e| StoreError::StoreIoError {
                path,
                source: io::Error::new(io::ErrorKind::InvalidData, e),
            }),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(Vec::new()),
            Err(e) => Err(io_err(&path)(e)),
        }
    }

    fn write_index(&self, index: &mut [StoredSlaSummary]) -> Result<(), StoreError> {
        sort_summaries(index);
        let bytes = serde_json::to_vec(index).expect("summaries always serialize");
        write_atomically(&self.index_path(), &bytes, None)
    }

    /// Rebuilds the summaries from `slas/` alone.
    pub fn rescan(&self) -> Result<Vec<StoredSlaSummary>, StoreError> {
        let dir = self.root.join(SLAS_DIR);
        let mut summaries = Vec::new();
        for entry in fs::read_dir(&dir).map_err(io_err(&dir))? {
            let entry = entry.map_err(io_err(&dir))?;
            let name = entry.file_name();
            let Some(id) = name.to_str().and_then(|n| n.strip_suffix(".json")) else {
                continue;
            };
            if !is_document_id(id) {
                continue;
            }
            let bytes = self.get_canonical(id)?;
            let doc = parse(&bytes).map_err(|e| StoreError::CorruptDocument {
                id: id.to_owned(),
                reason: e.to_string(),
            })?;
            let path = entry.path();
            let modified = entry
                .metadata()
                .and_then(|m| m.modified())
                .map_err(io_err(&path))?;
            summaries.push(StoredSlaSummary {
                id: id.to_owned(),
                application_type: doc.header.application_type,
                created_at: DateTime::<Utc>::from(modified).trunc_subsecs(6),
                size_bytes: bytes.len() as u64,
            });
        }
        sort_summaries(&mut summaries);
        Ok(summaries)
    }

    /// Replaces `index.json` with the result of [`rescan`](Self::rescan).
    pub fn rebuild_index(&self) -> Result<Vec<StoredSlaSummary>, StoreError> {
        let _lock = self.lock()?;
        let mut summaries = self.rescan()?;
        self.write_index(&mut summaries)?;
        Ok(summaries)
    }

    fn lock(&self) -> Result<LockGuard, StoreError> {
        LockGuard::acquire(&self.root.join(LOCK_FILE), self.lock_timeout, self.stale_lock_age)
    }
}

impl SlaStore for FileStore {
    fn put(&self, doc: &SlaDocument) -> Result<String, StoreError> {
        let bytes = serialize_canonical(doc);
        let id = hex::encode(Sha256::digest(&bytes));
        let path = self.document_path(&id);

        let _lock = self.lock()?;
        let mut index = self.read_index()?;
        if index.iter().any(|s| s.id == id) && path.exists() {
            return Ok(id);
        }
        index.retain(|s| s.id != id);

        let created_at = Utc::now().trunc_subsecs(6);
        write_atomically(&path, &bytes, Some(created_at.into()))?;
        index.push(StoredSlaSummary {
            id: id.clone(),
            application_type: doc.header.application_type.clone(),
            created_at,
            size_bytes: bytes.len() as u64,
        });
        self.write_index(&mut index)?;
        Ok(id)
    }

    fn get_canonical(&self, id: &str) -> Result<Vec<u8>, StoreError> {
        if !is_document_id(id) {
            return Err(StoreError::NotFound(id.to_owned()));
        }
        let path = self.document_path(id);
        let bytes = match fs::read(&path) {
            Ok(bytes) => bytes,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(StoreError::NotFound(id.to_owned())),
            Err(e) => return Err(io_err(&path)(e)),
        };
        let digest = hex::encode(Sha256::digest(&bytes));
        if digest != id {
            return Err(StoreError::CorruptDocument {
                id: id.to_owned(),
                reason: format!("content hashes to {digest}"),
            });
        }
        Ok(bytes)
    }

    fn list(&self) -> Result<Vec<StoredSlaSummary>, StoreError> {
        let mut index = self.read_index()?;
        sort_summaries(&mut index);
        Ok(index)
    }

    fn delete(&self, id: &str) -> Result<(), StoreError> {
        if !is_document_id(id) {
            return Err(StoreError::NotFound(id.to_owned()));
        }
        let _lock = self.lock()?;
        let mut index = self.read_index()?;
        let before = index.len();
        index.retain(|s| s.id != id);
        let path = self.document_path(id);
        let removed_file = match fs::remove_file(&path) {
            Ok(()) => true,
            Err(e) if e.kind() == io::ErrorKind::NotFound => false,
            Err(e) => return Err(io_err(&path)(e)),
        };
        if index.len() == before && !removed_file {
            return Err(StoreError::NotFound(id.to_owned()));
        }
        self.write_index(&mut index)
    }
}

fn sort_summaries(summaries: &mut [StoredSlaSummary]) {
    summaries.sort_by(|a, b| (a.created_at, &a.id).cmp(&(b.created_at, &b.id)));
}

static TEMP_COUNTER: AtomicU64 = AtomicU64::new(0);

/// Writes `bytes` to a sibling temp file and renames it over `path`.
fn write_atomically(path: &Path, bytes: &[u8], modified: Option<SystemTime>) -> Result<(), StoreError> {
    let dir = path.parent().expect("store paths have a parent");
    let tmp = dir.join(format!(
        ".tmp-{}-{}-{}",
        std::process::id(),
        TEMP_COUNTER.fetch_add(1, Ordering::Relaxed),
        path.file_name().and_then(|n| n.to_str()).unwrap_or("file")
    ));
    let result = (|| {
        let mut file = File::create(&tmp)?;
        file.write_all(bytes)?;
        if let Some(t) = modified {
            file.set_modified(t)?;
        }
        file.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(io_err(path))
}

/// Exclusive lock file, removed on drop.
struct LockGuard {
    path: PathBuf,
}

impl LockGuard {
    fn acquire(path: &Path, timeout: Duration, stale_after: Duration) -> Result<Self, StoreError> {
        let started = SystemTime::now();
        let mut backoff = Duration::from_millis(1);
        loop {
            match OpenOptions::new().write(true).create_new(true).open(path) {
                Ok(mut file) => {
                    let stamp = crate::model::format_timestamp(&Utc::now());
                    writeln!(file, "{}\n{stamp}", std::process::id()).map_err(io_err(path))?;
                    return Ok(Self {
                        path: path.to_path_buf(),
                    });
                }
                Err(e) if e.kind() == io::ErrorKind::AlreadyExists => {
                    if let Some(age) = lock_age(path) {
                        if age > stale_after {
                            log::warn!("breaking stale store lock {} (age {age:?})", path.display());
                            match fs::remove_file(path) {
                                Ok(()) => continue,
                                Err(e) if e.kind() == io::ErrorKind::NotFound => continue,
                                Err(e) => return Err(io_err(path)(e)),
                            }
                        }
                    }
                    let waited = started.elapsed().unwrap_or_default();
                    if waited >= timeout {
                        return Err(StoreError::StoreLocked {
                            path: path.to_path_buf(),
                            waited,
                        });
                    }
                    thread::sleep(backoff);
                    backoff = (backoff * 2).min(Duration::from_millis(20));
                }
                Err(e) => return Err(io_err(path)(e)),
            }
        }
    }
}

/// Age of a lock from its recorded acquisition time, falling back to the
/// file's modification time. `None` when the lock vanished meanwhile.
fn lock_age(path: &Path) -> Option<Duration> {
    let recorded = fs::read_to_string(path)
        .ok()
        .and_then(|text| text.lines().nth(1).and_then(crate::model::parse_timestamp));
    let acquired: SystemTime = match recorded {
        Some(t) => t.into(),
        None => fs::metadata(path).and_then(|m| m.modified()).ok()?,
    };
    Some(SystemTime::now().duration_since(acquired).unwrap_or_default())
}

impl Drop for LockGuard {
    fn drop(&mut self) {
        if let Err(e) = fs::remove_file(&self.path) {
            log::warn!("failed to release store lock {}: {e}", self.path.display());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::load_catalog;
    use crate::model::Value;
    use crate::testkit::{default_catalog_dir, rhms_document};
    use tempfile::TempDir;

    fn rhms() -> SlaDocument {
        rhms_document(&load_catalog(default_catalog_dir()).unwrap())
    }

    #[test]
    fn put_is_idempotent() {
        let dir = TempDir::new().unwrap();
        let store = FileStore::open(dir.path()).unwrap();
        let doc = rhms();
        let a = store.put(&doc).unwrap();
        let b = store.put(&doc).unwrap();
        assert_eq!(a, b);
        assert_eq!(store.list().unwrap().len(), 1);
        assert_eq!(fs::read_dir(dir.path().join(SLAS_DIR)).unwrap().count(), 1);
    }

    #[test]
    fn stored_bytes_are_canonical_and_round_trip() {
        let dir = TempDir::new().unwrap();
        let store = FileStore::open(dir.path()).unwrap();
        let doc = rhms();
        let id = store.put(&doc).unwrap();
        let on_disk = fs::read(dir.path().join(SLAS_DIR).join(format!("{id}.json"))).unwrap();
        assert_eq!(on_disk, serialize_canonical(&doc));
        assert_eq!(hex::encode(Sha256::digest(&on_disk)), id);
        assert_eq!(store.get(&id).unwrap(), doc);
    }

    #[test]
    fn list_shows_each_application_type() {
        let dir = TempDir::new().unwrap();
        let store = FileStore::open(dir.path()).unwrap();
        let first = rhms();
        let mut second = rhms();
        second.header.application_type = "Smart Building".into();
        store.put(&first).unwrap();
        store.put(&second).unwrap();
        let mut types: Vec<_> = store
            .list()
            .unwrap()
            .into_iter()
            .map(|s| s.application_type)
            .collect();
        types.sort();
        assert_eq!(types, ["Remote Health Monitoring", "Smart Building"]);
    }

    #[test]
    fn empty_store_lists_nothing() {
        let dir = TempDir::new().unwrap();
        let store = FileStore::open(dir.path()).unwrap();
        assert!(store.list().unwrap().is_empty());
    }

    #[test]
    fn unknown_and_malformed_ids_are_not_found() {
        let dir = TempDir::new().unwrap();
        let store = FileStore::open(dir.path()).unwrap();
        let unknown = "0".repeat(64);
        assert!(matches!(store.get(&unknown), Err(StoreError::NotFound(_))));
        assert!(matches!(store.get("../index"), Err(StoreError::NotFound(_))));
        assert!(matches!(store.delete(&unknown), Err(StoreError::NotFound(_))));
    }

    #[test]
    fn tampered_file_is_corrupt() {
        let dir = TempDir::new().unwrap();
        let store = FileStore::open(dir.path()).unwrap();
        let id = store.put(&rhms()).unwrap();
        let path = store.document_path(&id);
        let mut bytes = fs::read(&path).unwrap();
        let pos = bytes.iter().position(|b| *b == b'6').unwrap();
        bytes[pos] = b'7';
        fs::write(&path, bytes).unwrap();
        assert!(matches!(store.get(&id), Err(StoreError::CorruptDocument { .. })));
    }

    #[test]
    fn delete_removes_document_and_entry() {
        let dir = TempDir::new().unwrap();
        let store = FileStore::open(dir.path()).unwrap();
        let d1 = rhms();
        let mut d2 = rhms();
        d2.app_slos[0].value = Value::Number(30.0);
        let id1 = store.put(&d1).unwrap();
        let id2 = store.put(&d2).unwrap();
        store.delete(&id1).unwrap();
        assert!(matches!(store.get(&id1), Err(StoreError::NotFound(_))));
        let ids: Vec<_> = store.list().unwrap().into_iter().map(|s| s.id).collect();
        assert_eq!(ids, [id2]);
    }

    #[test]
    fn rescan_equals_index() {
        let dir = TempDir::new().unwrap();
        let store = FileStore::open(dir.path()).unwrap();
        for v in [1.0, 2.0, 3.5, 10.0] {
            let mut d = rhms();
            d.app_slos[0].value = Value::Number(v);
            store.put(&d).unwrap();
        }
        let index = store.list().unwrap();
        assert_eq!(index.len(), 4);
        assert_eq!(store.rescan().unwrap(), index);
        fs::remove_file(dir.path().join(INDEX_FILE)).unwrap();
        assert!(store.list().unwrap().is_empty());
        assert_eq!(store.rebuild_index().unwrap(), index);
        assert_eq!(store.list().unwrap(), index);
    }

    #[test]
    fn index_has_documented_key_order() {
        let dir = TempDir::new().unwrap();
        let store = FileStore::open(dir.path()).unwrap();
        store.put(&rhms()).unwrap();
        let text = fs::read_to_string(dir.path().join(INDEX_FILE)).unwrap();
        let i = |k: &str| text.find(k).unwrap();
        assert!(i("\"id\"") < i("\"application_type\""));
        assert!(i("\"application_type\"") < i("\"created_at\""));
        assert!(i("\"created_at\"") < i("\"size_bytes\""));
    }

    #[test]
    fn held_lock_times_out() {
        let dir = TempDir::new().unwrap();
        let store = FileStore::open(dir.path())
            .unwrap()
            .with_lock_timeout(Duration::from_millis(50));
        let lock = dir.path().join(LOCK_FILE);
        let stamp = crate::model::format_timestamp(&Utc::now());
        fs::write(&lock, format!("1\n{stamp}\n")).unwrap();
        assert!(matches!(store.put(&rhms()), Err(StoreError::StoreLocked { .. })));
        assert!(lock.exists());
    }

    #[test]
    fn stale_lock_is_broken() {
        let dir = TempDir::new().unwrap();
        let store = FileStore::open(dir.path()).unwrap();
        fs::write(dir.path().join(LOCK_FILE), "1\n2000-01-01T00:00:00Z\n").unwrap();
        store.put(&rhms()).unwrap();
        assert!(!dir.path().join(LOCK_FILE).exists());
    }

    #[test]
    fn concurrent_threads_keep_index_consistent() {
        let dir = TempDir::new().unwrap();
        let doc = rhms();
        thread::scope(|s| {
            for t in 0..4 {
                let root = dir.path().to_path_buf();
                let doc = doc.clone();
                s.spawn(move || {
                    let store = FileStore::open(root).unwrap();
                    for k in 0..15 {
                        let mut d = doc.clone();
                        d.app_slos[0].value = Value::Number((t * 100 + k) as f64);
                        store.put(&d).unwrap();
                    }
                });
            }
        });
        let store = FileStore::open(dir.path()).unwrap();
        let index = store.list().unwrap();
        assert_eq!(index.len(), 60);
        assert_eq!(store.rescan().unwrap(), index);
    }
}
