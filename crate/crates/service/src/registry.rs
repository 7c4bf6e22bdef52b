use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use wheelsim_core::level::{load_level, Level, LevelError};

/// Read-only set of levels, keyed by id.
#[derive(Debug, Clone, Default)]
pub struct LevelRegistry {
    levels: BTreeMap<String, Arc<Level>>,
}

#[derive(Debug, thiserror::Error)]
pub enum RegistryError {
    #[error("cannot read level directory {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Level { path: PathBuf, source: LevelError },
    #[error("duplicate level id {id:?} in {path}")]
    Duplicate { id: String, path: PathBuf },
}

impl LevelRegistry {
    pub fn new(levels: impl IntoIterator<Item = Level>) -> Self {
        Self {
            levels: levels
                .into_iter()
                .map(|l| (l.id.clone(), Arc::new(l)))
                .collect(),
        }
    }

    /// Loads every `*.level.json` file in `dir`. Files that fail to load are
    /// returned alongside the registry instead of aborting.
    pub fn load_dir(dir: &Path) -> Result<(Self, Vec<RegistryError>), RegistryError> {
        let io_err = |source| RegistryError::Io {
            path: dir.to_path_buf(),
            source,
        };
        let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(io_err)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.ends_with(".level.json"))
            })
            .collect();
        paths.sort();
        let mut registry = Self::default();
        let mut skipped = Vec::new();
        for path in paths {
            let loaded = std::fs::read(&path)
                .map_err(|source| RegistryError::Io {
                    path: path.clone(),
                    source,
                })
                .and_then(|bytes| {
                    load_level(&bytes).map_err(|source| RegistryError::Level {
                        path: path.clone(),
                        source,
                    })
                });
            match loaded {
                Ok(level) if registry.levels.contains_key(&level.id) => {
                    skipped.push(RegistryError::Duplicate { id: level.id, path })
                }
                Ok(level) => {
                    registry.levels.insert(level.id.clone(), Arc::new(level));
                }
                Err(e) => skipped.push(e),
            }
        }
        Ok((registry, skipped))
    }

    pub fn get(&self, id: &str) -> Option<Arc<Level>> {
        self.levels.get(id).cloned()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.levels.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }
}
