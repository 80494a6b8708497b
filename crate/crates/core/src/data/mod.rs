//! Synthetic cell images, augmentation, and on-disk datasets.

mod augment;
mod manifest;
mod pgm;
mod split;
mod synth;

pub use augment::{augment, Augmentation};
pub use manifest::{load_dataset, read_image, write_dataset, Manifest, ManifestEntry, MANIFEST_FILE};
pub use pgm::{decode_pgm, encode_pgm, read_pgm, write_pgm};
pub use split::{kfold_split, Fold};
pub use synth::{gen_sample, rasterize_ellipse, Ellipse, SynthSpec};

use crate::loss::ensure_binary;
use crate::tensor::{Float, Tensor};
use crate::{Error, Result};

/// One image with its binary foreground mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample<T> {
    /// `C×H×W`, values in `[0, 1]`.
    pub image: Tensor<T>,
    /// `1×H×W`, values in `{0, 1}`.
    pub mask: Tensor<T>,
    pub id: u64,
}

impl<T: Float> Sample<T> {
    pub fn new(image: Tensor<T>, mask: Tensor<T>, id: u64) -> Result<Self> {
        let id_dims = image.dims();
        let m_dims = mask.dims();
        if id_dims.len() != 3 || m_dims.len() != 3 || m_dims[0] != 1 || id_dims[1..] != m_dims[1..] {
            return Err(Error::dim("sample", format!("image {:?} and mask {:?} do not pair", image.shape(), mask.shape())));
        }
        ensure_binary("mask", &mask)?;
        Ok(Sample { image, mask, id })
    }

    pub fn height(&self) -> usize {
        self.image.dims()[1]
    }

    pub fn width(&self) -> usize {
        self.image.dims()[2]
    }

    pub fn channels(&self) -> usize {
        self.image.dims()[0]
    }
}
