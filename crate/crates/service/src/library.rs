//! Loaded corpora and session admission.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::Arc;

use rubsynth::{Corpus, Engine, SynthParams};
use serde::Serialize;

use crate::session::{Session, SessionConfig};

const IMAGE_EXTENSIONS: [&str; 4] = ["png", "jpg", "jpeg", "webp"];

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("unknown corpus {0:?}")]
    UnknownCorpus(String),
    #[error("session capacity of {0} reached")]
    Capacity(usize),
    #[error("dpi must be positive, got {0}")]
    InvalidDpi(f64),
    #[error(transparent)]
    Synth(#[from] rubsynth::Error),
}

impl ServiceError {
    /// Code used in error control messages.
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::UnknownCorpus(_) => "unknown_corpus",
            ServiceError::Capacity(_) => "capacity",
            ServiceError::InvalidDpi(_) => "bad_request",
            ServiceError::Synth(_) => "internal",
        }
    }
}

/// A corpus available to sessions.
#[derive(Debug)]
pub struct Material {
    pub engine: Arc<Engine>,
    pub image: Option<PathBuf>,
}

/// Entry of `GET /corpora`.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct CorpusSummary {
    pub id: String,
    pub fragments: usize,
    pub duration_s: f64,
}

/// Shared, read-only corpora plus the session counter.
#[derive(Debug)]
pub struct Library {
    materials: BTreeMap<String, Material>,
    params: SynthParams,
    capacity: usize,
    active: Arc<AtomicUsize>,
    next_id: AtomicU64,
}

impl Library {
    pub fn new(params: SynthParams, capacity: usize) -> Self {
        Library {
            materials: BTreeMap::new(),
            params,
            capacity,
            active: Arc::new(AtomicUsize::new(0)),
            next_id: AtomicU64::new(1),
        }
    }

    /// Loads every `<id>.json` manifest in `dir`; a sibling `<id>.png` (or
    /// jpg/jpeg/webp) is served as the material photo.
    pub fn load_dir(dir: &Path, params: SynthParams, capacity: usize) -> rubsynth::Result<Self> {
        let mut library = Library::new(params, capacity);
        let entries = std::fs::read_dir(dir).map_err(|e| rubsynth::Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
        let mut manifests: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        manifests.sort();
        for path in manifests {
            let id = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            let corpus = Corpus::load(&path)?;
            let image = IMAGE_EXTENSIONS
                .iter()
                .map(|ext| path.with_extension(ext))
                .find(|p| p.is_file());
            log::info!("loaded corpus {id}: {} fragments", corpus.len());
            library.insert(id, Engine::new(corpus)?, image);
        }
        Ok(library)
    }

    pub fn insert(&mut self, id: impl Into<String>, engine: Arc<Engine>, image: Option<PathBuf>) {
        self.materials.insert(id.into(), Material { engine, image });
    }

    pub fn get(&self, id: &str) -> Option<&Material> {
        self.materials.get(id)
    }

    pub fn params(&self) -> &SynthParams {
        &self.params
    }

    pub fn summaries(&self) -> Vec<CorpusSummary> {
        self.materials
            .iter()
            .map(|(id, m)| CorpusSummary {
                id: id.clone(),
                fragments: m.engine.corpus().len(),
                duration_s: m.engine.corpus().audio().duration_secs(),
            })
            .collect()
    }

    pub fn active_sessions(&self) -> usize {
        self.active.load(Ordering::SeqCst)
    }

    /// Admits a new session in the silent state.
    pub fn open_session(&self, config: &SessionConfig) -> Result<SessionSlot, ServiceError> {
        if !(config.dpi > 0.0 && config.dpi.is_finite()) {
            return Err(ServiceError::InvalidDpi(config.dpi));
        }
        let material = self
            .get(&config.corpus_id)
            .ok_or_else(|| ServiceError::UnknownCorpus(config.corpus_id.clone()))?;
        let admitted = self
            .active
            .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| {
                (n < self.capacity).then_some(n + 1)
            })
            .is_ok();
        if !admitted {
            return Err(ServiceError::Capacity(self.capacity));
        }
        let guard = SlotGuard(Arc::clone(&self.active));
        let seed = config.seed.unwrap_or_else(rand::random);
        let id = format!("s{}", self.next_id.fetch_add(1, Ordering::SeqCst));
        let session = Session::new(
            id,
            Arc::clone(&material.engine),
            self.params,
            config.dpi,
            seed,
        )?;
        Ok(SessionSlot {
            session,
            _guard: guard,
        })
    }
}

#[derive(Debug)]
struct SlotGuard(Arc<AtomicUsize>);

impl Drop for SlotGuard {
    fn drop(&mut self) {
        self.0.fetch_sub(1, Ordering::SeqCst);
    }
}

/// An admitted session; dropping it frees its capacity slot.
#[derive(Debug)]
pub struct SessionSlot {
    pub session: Session,
    _guard: SlotGuard,
}
