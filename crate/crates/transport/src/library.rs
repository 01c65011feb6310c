//! Directory of songs: `<id>.song.json` with an optional `<id>.curves.json`.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use dynsong_core::curves::{CurveFileError, CurveSet};
use dynsong_core::graph::{is_valid_node_id, LoadError, SongDocument};

const SONG_SUFFIX: &str = ".song.json";
const CURVES_SUFFIX: &str = ".curves.json";

#[derive(Debug, Error)]
pub enum LibraryError {
    #[error("no song {0:?} in the library")]
    NotFound(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Song {
        path: PathBuf,
        #[source]
        source: LoadError,
    },
    #[error(transparent)]
    Curves(#[from] CurveFileError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SongSummary {
    pub id: String,
    pub title: String,
    pub length_bars: u32,
    pub has_curves: bool,
}

#[derive(Debug, Clone)]
pub struct Library {
    dir: PathBuf,
}

impl Library {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Library { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn song_path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}{SONG_SUFFIX}"))
    }

    pub fn curves_path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}{CURVES_SUFFIX}"))
    }

    /// Songs sorted by id. Files that fail to parse are skipped.
    pub fn list(&self) -> Result<Vec<SongSummary>, LibraryError> {
        let entries = std::fs::read_dir(&self.dir).map_err(|source| LibraryError::Io {
            path: self.dir.clone(),
            source,
        })?;
        let mut out = Vec::new();
        for entry in entries.flatten() {
            let name = entry.file_name().to_string_lossy().into_owned();
            let Some(id) = name.strip_suffix(SONG_SUFFIX) else { continue };
            if !is_valid_node_id(id) {
                continue;
            }
            if let Ok(doc) = SongDocument::load(&entry.path()) {
                out.push(SongSummary {
                    id: id.to_string(),
                    title: doc.title,
                    length_bars: doc.length_bars,
                    has_curves: self.curves_path(id).is_file(),
                });
            }
        }
        out.sort_by(|a, b| a.id.cmp(&b.id));
        Ok(out)
    }

    pub fn song(&self, id: &str) -> Result<SongDocument, LibraryError> {
        let path = self.checked_song_path(id)?;
        SongDocument::load(&path).map_err(|source| LibraryError::Song { path, source })
    }

    /// The song's curves, or flat 0.5 curves when it has none.
    pub fn curves(&self, id: &str) -> Result<CurveSet<f64>, LibraryError> {
        self.checked_song_path(id)?;
        let path = self.curves_path(id);
        if !path.exists() {
            return Ok(CurveSet::constant(0.5, 0.5, 0.5));
        }
        Ok(CurveSet::load(&path)?)
    }

    /// Writes the curves next to the song through a temporary file and a
    /// rename, so readers never see a partial file.
    pub fn save_curves(&self, id: &str, curves: &CurveSet<f64>) -> Result<PathBuf, LibraryError> {
        self.checked_song_path(id)?;
        let path = self.curves_path(id);
        let io = |source| LibraryError::Io {
            path: path.clone(),
            source,
        };
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir).map_err(io)?;
        tmp.write_all(curves.to_json_pretty().as_bytes()).map_err(io)?;
        tmp.as_file().sync_all().map_err(io)?;
        tmp.persist(&path).map_err(|e| io(e.error))?;
        Ok(path)
    }

    fn checked_song_path(&self, id: &str) -> Result<PathBuf, LibraryError> {
        let path = self.song_path(id);
        if !is_valid_node_id(id) || !path.is_file() {
            return Err(LibraryError::NotFound(id.into()));
        }
        Ok(path)
    }
}
