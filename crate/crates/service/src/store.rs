//! Exercise files: one JSON document per exercise in `<data-dir>/exercises`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use thiserror::Error;
use threadtrace_core::{Exercise, ExerciseError};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Exercise {
        path: PathBuf,
        source: ExerciseError,
    },
    #[error("{path}: exercise id `{id}` is already defined by {first}")]
    DuplicateId {
        path: PathBuf,
        id: String,
        first: PathBuf,
    },
}

/// Exercises keyed by id, prepared for grading.
#[derive(Clone, Debug, Default)]
pub struct ExerciseStore {
    exercises: BTreeMap<String, Arc<Exercise>>,
}

pub fn read_exercise(path: &Path) -> Result<Exercise, StoreError> {
    let text = fs::read_to_string(path).map_err(|source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let exercise = Exercise::from_json(&text).map_err(|source| StoreError::Exercise {
        path: path.to_path_buf(),
        source,
    })?;
    // fail at load time rather than on the first request
    exercise
        .correct_execution()
        .map_err(|source| StoreError::Exercise {
            path: path.to_path_buf(),
            source,
        })?;
    Ok(exercise)
}

impl ExerciseStore {
    pub fn new(exercises: impl IntoIterator<Item = Exercise>) -> Self {
        ExerciseStore {
            exercises: exercises
                .into_iter()
                .map(|e| (e.id.clone(), Arc::new(e)))
                .collect(),
        }
    }

    /// Loads every `*.json` file under `<data_dir>/exercises`. A missing
    /// directory gives an empty store.
    pub fn load(data_dir: &Path) -> Result<Self, StoreError> {
        let dir = data_dir.join("exercises");
        let entries = match fs::read_dir(&dir) {
            Ok(entries) => entries,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Self::default()),
            Err(source) => return Err(StoreError::Io { path: dir, source }),
        };
        let mut paths: Vec<PathBuf> = entries
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        let mut exercises = BTreeMap::new();
        let mut origin: BTreeMap<String, PathBuf> = BTreeMap::new();
        for path in paths {
            let exercise = read_exercise(&path)?;
            if let Some(first) = origin.get(&exercise.id) {
                return Err(StoreError::DuplicateId {
                    id: exercise.id,
                    first: first.clone(),
                    path,
                });
            }
            origin.insert(exercise.id.clone(), path);
            exercises.insert(exercise.id.clone(), Arc::new(exercise));
        }
        Ok(ExerciseStore { exercises })
    }

    pub fn get(&self, id: &str) -> Option<&Arc<Exercise>> {
        self.exercises.get(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Arc<Exercise>> {
        self.exercises.values()
    }

    pub fn len(&self) -> usize {
        self.exercises.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exercises.is_empty()
    }
}
