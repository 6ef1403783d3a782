use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::RwLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::UserProfile;

pub const STORE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("store {}: {message}", path.display())]
    Io { path: PathBuf, message: String },
    #[error("store {}: unsupported version {version}", path.display())]
    Version { path: PathBuf, version: u32 },
    #[error("store unavailable: {0}")]
    Unavailable(String),
}

/// Persistent per-chat profiles plus the update cursor.
pub trait ProfileStore: Send + Sync {
    fn load(&self, chat_id: i64) -> Result<Option<UserProfile>, StoreError>;
    fn save(&self, profile: &UserProfile) -> Result<(), StoreError>;
    /// Offset of the next update to fetch.
    fn cursor(&self) -> Result<i64, StoreError>;
    fn set_cursor(&self, offset: i64) -> Result<(), StoreError>;
}

/// On-disk layout of the store file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreFile {
    pub version: u32,
    pub cursor: i64,
    pub profiles: BTreeMap<i64, UserProfile>,
}

impl Default for StoreFile {
    fn default() -> Self {
        Self { version: STORE_VERSION, cursor: 0, profiles: BTreeMap::new() }
    }
}

/// A single JSON file, replaced atomically (write temp, fsync, rename) on
/// every mutation. Readers share a lock; writers are serialized.
#[derive(Debug)]
pub struct FileStore {
    path: PathBuf,
    state: RwLock<StoreFile>,
}

impl FileStore {
    /// Opens `path`, starting empty if the file does not exist yet.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let path = path.into();
        let io = |e: std::io::Error| StoreError::Io { path: path.clone(), message: e.to_string() };
        let state = match fs::read_to_string(&path) {
            Ok(text) => {
                let file: StoreFile = serde_json::from_str(&text)
                    .map_err(|e| StoreError::Io { path: path.clone(), message: e.to_string() })?;
                if file.version != STORE_VERSION {
                    return Err(StoreError::Version { path, version: file.version });
                }
                file
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => StoreFile::default(),
            Err(e) => return Err(io(e)),
        };
        Ok(Self { path, state: RwLock::new(state) })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn snapshot(&self) -> StoreFile {
        self.state.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    fn mutate(&self, f: impl FnOnce(&mut StoreFile)) -> Result<(), StoreError> {
        let mut guard = self.state.write().unwrap_or_else(|e| e.into_inner());
        let mut next = guard.clone();
        f(&mut next);
        write_atomically(&self.path, &next)?;
        *guard = next;
        Ok(())
    }
}

fn write_atomically(path: &Path, contents: &StoreFile) -> Result<(), StoreError> {
    let io = |e: std::io::Error| StoreError::Io { path: path.to_path_buf(), message: e.to_string() };
    let mut tmp_name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    tmp_name.push(format!(".tmp-{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    let mut json = serde_json::to_vec_pretty(contents).expect("store serializes");
    json.push(b'\n');
    let mut file = File::create(&tmp).map_err(io)?;
    file.write_all(&json).map_err(io)?;
    file.sync_all().map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

impl ProfileStore for FileStore {
    fn load(&self, chat_id: i64) -> Result<Option<UserProfile>, StoreError> {
        Ok(self.state.read().unwrap_or_else(|e| e.into_inner()).profiles.get(&chat_id).cloned())
    }

    fn save(&self, profile: &UserProfile) -> Result<(), StoreError> {
        self.mutate(|s| {
            s.profiles.insert(profile.chat_id, profile.clone());
        })
    }

    fn cursor(&self) -> Result<i64, StoreError> {
        Ok(self.state.read().unwrap_or_else(|e| e.into_inner()).cursor)
    }

    fn set_cursor(&self, offset: i64) -> Result<(), StoreError> {
        self.mutate(|s| s.cursor = offset)
    }
}
