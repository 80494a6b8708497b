//! Dataset directories: a manifest of `index<TAB>image_path<TAB>mask_path`
//! lines, images as `SA2T` blobs (or `P5` greymaps), masks as `P5` greymaps.

use std::fs;
use std::path::{Path, PathBuf};

use super::{read_pgm, write_pgm, Sample};
use crate::tensor::io::{load_tensor, save_tensor};
use crate::tensor::{Float, Tensor};
use crate::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.tsv";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub index: u64,
    pub image: PathBuf,
    pub mask: PathBuf,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        let mut offset = 0;
        for line in text.split_inclusive('\n') {
            let at = offset as u64;
            offset += line.len();
            let body = line.trim_end_matches(['\n', '\r']);
            if body.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = body.split('\t').collect();
            let [index, image, mask] = fields[..] else {
                return Err(Error::Parse { offset: at, detail: format!("expected 3 tab-separated fields, got {}", fields.len()) });
            };
            let index = index
                .parse()
                .map_err(|_| Error::Parse { offset: at, detail: format!("bad sample index {index:?}") })?;
            if image.is_empty() || mask.is_empty() {
                return Err(Error::Parse { offset: at, detail: "empty path".into() });
            }
            entries.push(ManifestEntry { index, image: image.into(), mask: mask.into() });
        }
        Ok(Manifest { entries })
    }

    pub fn render(&self) -> String {
        self.entries
            .iter()
            .map(|e| format!("{}\t{}\t{}\n", e.index, e.image.display(), e.mask.display()))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Reads a `C×H×W` image from an `SA2T` blob or a `P5` greymap, chosen by extension.
pub fn read_image<T: Float>(path: impl AsRef<Path>) -> Result<Tensor<T>> {
    let path = path.as_ref();
    let t = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm")) {
        read_pgm(path)?
    } else {
        load_tensor(path)?.cast()
    };
    if t.dims().len() != 3 {
        return Err(Error::dim("read_image", format!("{} holds {:?}, expected C×H×W", path.display(), t.shape())));
    }
    Ok(t)
}

/// Writes samples as `image_NNNNN.sa2t` / `mask_NNNNN.pgm` plus the manifest.
pub fn write_dataset<T: Float>(dir: impl AsRef<Path>, samples: &[Sample<T>]) -> Result<Manifest> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut manifest = Manifest::default();
    for s in samples {
        let image = PathBuf::from(format!("image_{:05}.sa2t", s.id));
        let mask = PathBuf::from(format!("mask_{:05}.pgm", s.id));
        save_tensor(dir.join(&image), &s.image)?;
        write_pgm(&s.mask, dir.join(&mask))?;
        manifest.entries.push(ManifestEntry { index: s.id, image, mask });
    }
    fs::write(dir.join(MANIFEST_FILE), manifest.render())?;
    Ok(manifest)
}

/// Loads every sample listed in `dir/manifest.tsv`; relative paths resolve against `dir`.
pub fn load_dataset<T: Float>(dir: impl AsRef<Path>) -> Result<Vec<Sample<T>>> {
    let dir = dir.as_ref();
    let manifest = Manifest::parse(&fs::read_to_string(dir.join(MANIFEST_FILE))?)?;
    manifest
        .entries
        .iter()
        .map(|e| Sample::new(read_image(dir.join(&e.image))?, read_pgm(dir.join(&e.mask))?, e.index))
        .collect()
}
