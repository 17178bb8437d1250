//! Volumes on disk and sessions in memory.

use crate::error::{ApiError, ApiResult};
use radcut_core::nrrd::{read_mask_nrrd, read_nrrd};
use radcut_core::session::Session;
use radcut_core::volume::{MaskVolume, Volume3D};
use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

/// A session and the volume it was started on. The mutex is only ever
/// acquired with `try_lock`, so a second writer is rejected rather than queued.
pub struct SessionSlot {
    pub id: String,
    pub volume_id: String,
    pub session: Mutex<Session>,
}

pub struct Store {
    data_dir: PathBuf,
    volumes: Mutex<HashMap<String, Arc<Volume3D>>>,
    sessions: RwLock<HashMap<String, Arc<SessionSlot>>>,
    next_id: AtomicU64,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && !id.starts_with('.') && id.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c))
}

impl Store {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        Self {
            data_dir: data_dir.into(),
            volumes: Mutex::new(HashMap::new()),
            sessions: RwLock::new(HashMap::new()),
            next_id: AtomicU64::new(1),
        }
    }

    pub fn data_dir(&self) -> &Path {
        &self.data_dir
    }

    /// Ids (file stems) of the `.nrrd` files in the data directory, sorted.
    pub fn volume_ids(&self) -> ApiResult<Vec<String>> {
        let entries = std::fs::read_dir(&self.data_dir)
            .map_err(|e| ApiError::internal(format!("cannot list {}: {e}", self.data_dir.display())))?;
        let mut ids: Vec<String> = entries
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "nrrd"))
            .filter_map(|p| p.file_stem().and_then(|s| s.to_str()).map(String::from))
            .filter(|id| valid_id(id))
            .collect();
        ids.sort();
        Ok(ids)
    }

    fn path_of(&self, id: &str) -> ApiResult<PathBuf> {
        let path = self.data_dir.join(format!("{id}.nrrd"));
        if !valid_id(id) || !path.is_file() {
            return Err(ApiError::not_found("unknown-volume", format!("no volume {id:?}")));
        }
        Ok(path)
    }

    fn read(&self, id: &str) -> ApiResult<Vec<u8>> {
        std::fs::read(self.path_of(id)?).map_err(|e| ApiError::internal(format!("cannot read volume {id}: {e}")))
    }

    /// Loads a volume once and shares it afterwards.
    pub fn volume(&self, id: &str) -> ApiResult<Arc<Volume3D>> {
        if let Some(v) = self.volumes.lock().expect("volume cache").get(id) {
            return Ok(v.clone());
        }
        let vol = Arc::new(read_nrrd(&self.read(id)?)?);
        Ok(self
            .volumes
            .lock()
            .expect("volume cache")
            .entry(id.to_string())
            .or_insert(vol)
            .clone())
    }

    pub fn mask(&self, id: &str) -> ApiResult<MaskVolume> {
        Ok(read_mask_nrrd(&self.read(id)?)?)
    }

    pub fn insert(&self, volume_id: String, session: Session) -> Arc<SessionSlot> {
        let id = format!("s{}", self.next_id.fetch_add(1, Ordering::Relaxed));
        let slot = Arc::new(SessionSlot {
            id: id.clone(),
            volume_id,
            session: Mutex::new(session),
        });
        self.sessions.write().expect("session table").insert(id, slot.clone());
        slot
    }

    pub fn session(&self, id: &str) -> ApiResult<Arc<SessionSlot>> {
        self.sessions
            .read()
            .expect("session table")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("unknown-session", format!("no session {id:?}")))
    }
}

impl SessionSlot {
    /// Runs `f` with exclusive access, or fails with 409 if another request holds the session.
    pub fn with<T>(&self, f: impl FnOnce(&mut Session) -> ApiResult<T>) -> ApiResult<T> {
        let mut guard = match self.session.try_lock() {
            Ok(g) => g,
            Err(std::sync::TryLockError::WouldBlock) => return Err(ApiError::busy(&self.id)),
            Err(std::sync::TryLockError::Poisoned(_)) => {
                return Err(ApiError::internal(format!(
                    "session {} was poisoned by a panic",
                    self.id
                )))
            }
        };
        f(&mut guard)
    }
}
