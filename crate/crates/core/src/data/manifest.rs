use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::label::Label;

pub const MANIFEST_HEADER: &str = "id,path,label";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestRow {
    pub id: String,
    pub path: PathBuf,
    pub label: Label,
}

/// Labelled image list. Relative paths are resolved against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DatasetManifest {
    pub rows: Vec<ManifestRow>,
}

impl DatasetManifest {
    pub fn new(rows: Vec<ManifestRow>) -> Result<Self> {
        let mut seen = HashSet::new();
        for row in &rows {
            if row.id.is_empty() {
                return Err(Error::InvalidArgument("empty sample id".into()));
            }
            if row.path.as_os_str().is_empty() {
                return Err(Error::InvalidArgument(format!("sample `{}` has an empty path", row.id)));
            }
            if !seen.insert(row.id.as_str()) {
                return Err(Error::InvalidArgument(format!("duplicate sample id `{}`", row.id)));
            }
        }
        Ok(DatasetManifest { rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let mut counts = [0; 2];
        for row in &self.rows {
            counts[row.label.index()] += 1;
        }
        counts
    }

    /// Parses manifest text. `base` resolves relative image paths; `origin` is
    /// only used in error messages.
    pub fn parse(text: &str, base: &Path, origin: &Path) -> Result<Self> {
        let err = |line: usize, detail: String| Error::Manifest {
            path: origin.to_path_buf(),
            line,
            detail,
        };
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header.trim_end_matches('\r') == MANIFEST_HEADER => {}
            Some((_, header)) => {
                return Err(err(1, format!("header must be `{MANIFEST_HEADER}`, found `{header}`")))
            }
            None => return Err(err(1, "missing header".into())),
        }
        let mut rows = Vec::new();
        let mut seen = HashSet::new();
        for (i, line) in lines {
            let lineno = i + 1;
            let line = line.trim_end_matches('\r');
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            let [id, path, label] = fields[..] else {
                return Err(err(lineno, format!("expected 3 fields, found {}", fields.len())));
            };
            if id.is_empty() {
                return Err(err(lineno, "empty id".into()));
            }
            if path.is_empty() {
                return Err(err(lineno, format!("empty path for `{id}`")));
            }
            let label = match label {
                "0" => Label::Male,
                "1" => Label::Female,
                other => return Err(err(lineno, format!("label `{other}` is not 0 or 1"))),
            };
            if !seen.insert(id.to_string()) {
                return Err(err(lineno, format!("duplicate id `{id}`")));
            }
            let path = Path::new(path);
            let path = if path.is_absolute() { path.to_path_buf() } else { base.join(path) };
            rows.push(ManifestRow { id: id.to_string(), path, label });
        }
        Ok(DatasetManifest { rows })
    }

    /// Renders the manifest with paths relative to `base` where possible
    /// (`..` components included when both are absolute).
    pub fn render(&self, base: &Path) -> String {
        let mut out = String::from(MANIFEST_HEADER);
        out.push('\n');
        for row in &self.rows {
            let path = match row.path.is_absolute() && base.is_absolute() {
                true => pathdiff::diff_paths(&row.path, base).unwrap_or_else(|| row.path.clone()),
                false => row.path.strip_prefix(base).unwrap_or(&row.path).to_path_buf(),
            };
            writeln!(out, "{},{},{}", row.id, path.display(), row.label.index()).unwrap();
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.render(&parent_dir(path)?)).map_err(|e| Error::io(path, e))
    }
}

fn parent_dir(path: &Path) -> Result<PathBuf> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::path::absolute(dir).map_err(|e| Error::io(dir, e))
}

/// Image paths are resolved against the manifest's own directory and made
/// absolute, so the rows stay valid wherever they are written next.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    DatasetManifest::parse(&text, &parent_dir(path)?, path)
}
