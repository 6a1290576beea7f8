use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{load_image, preprocess};
use crate::error::{Error, Result};
use crate::numerics::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            _ => Err(Error::Invalid(format!("unknown split {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub path: String,
    pub split: Split,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Manifest {
    pub records: Vec<ManifestRecord>,
    /// Relative paths resolve against this directory.
    pub base: PathBuf,
}

impl Manifest {
    pub fn new(records: Vec<ManifestRecord>, base: impl Into<PathBuf>) -> Result<Self> {
        let mut seen = HashSet::new();
        for r in &records {
            if !seen.insert(r.path.as_str()) {
                return Err(Error::Invalid(format!("duplicate manifest path {:?}", r.path)));
            }
        }
        Ok(Manifest {
            records,
            base: base.into(),
        })
    }

    /// Parses a `path,split` CSV and checks that every file exists.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut reader = csv::Reader::from_path(path)?;
        let headers = reader.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["path", "split"] {
            return Err(Error::Invalid(format!(
                "{}: expected header path,split, got {:?}",
                path.display(),
                headers
            )));
        }
        let records = reader.deserialize().collect::<std::result::Result<Vec<ManifestRecord>, _>>()?;
        if records.is_empty() {
            return Err(Error::Empty(format!("manifest {}", path.display())));
        }
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let manifest = Manifest::new(records, base)?;
        for r in &manifest.records {
            let p = manifest.resolve(r);
            if !p.is_file() {
                return Err(Error::Invalid(format!(
                    "manifest {} references missing file {}",
                    path.display(),
                    p.display()
                )));
            }
        }
        Ok(manifest)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(path.as_ref())?;
        for r in &self.records {
            w.serialize(r)?;
        }
        w.flush()
            .map_err(|e| Error::io(format!("writing {}", path.as_ref().display()), e))
    }

    pub fn resolve(&self, record: &ManifestRecord) -> PathBuf {
        let p = Path::new(&record.path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &ManifestRecord> {
        self.records.iter().filter(move |r| r.split == split)
    }

    /// Loads and preprocesses every image of `split` in manifest order.
    pub fn load_images(&self, split: Split, crop: usize, size: usize) -> Result<Vec<Tensor<f32>>> {
        let images = self
            .split(split)
            .map(|r| preprocess(&load_image(self.resolve(r))?, crop, size))
            .collect::<Result<Vec<_>>>()?;
        if images.is_empty() {
            return Err(Error::Empty(format!("no {split} images in manifest")));
        }
        Ok(images)
    }
}
