//! `SA2C` checkpoint files.
//!
//! ```text
//! "SA2C" | version u8 | u32 fingerprint length | fingerprint bytes
//! | u32 entry count | entries: u16 name length, name, SA2T blob
//! | optional "ADAM" | u64 step | u32 count | per entry: u16 name length, name, m blob, v blob
//! ```
//!
//! The fingerprint bytes are the canonical text of the [`ModelConfig`], so a
//! checkpoint is self-describing; its short display form is a SHA-256 prefix.
//! All integers are little-endian.

use std::fs;
use std::io::Write;
use std::path::Path;

use indexmap::IndexMap;

use super::{param_specs, ModelConfig};
use crate::blocks::ParamStore;
use crate::tensor::io::{encode_tensor, read_tensor, AnyTensor, ByteReader};
use crate::tensor::{Float, Tensor};
use crate::train::{AdamState, Moments};
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"SA2C";
pub const ADAM_MAGIC: &[u8; 4] = b"ADAM";
pub const CHECKPOINT_VERSION: u8 = 1;

/// Parameters plus the configuration that shaped them and optional optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<T> {
    pub config: ModelConfig,
    pub params: ParamStore<T>,
    pub adam: Option<AdamState<T>>,
}

impl<T: Float> Checkpoint<T> {
    pub fn new(config: ModelConfig, params: ParamStore<T>, adam: Option<AdamState<T>>) -> Self {
        Checkpoint { config, params, adam }
    }

    pub fn fingerprint_id(&self) -> String {
        self.config.fingerprint_id()
    }

    /// Fails unless this checkpoint was produced for an architecture equal to `cfg`.
    pub fn ensure_compatible(&self, cfg: &ModelConfig) -> Result<()> {
        if self.config.canonical() != cfg.canonical() {
            return Err(Error::IncompatibleCheckpoint { expected: cfg.fingerprint_id(), found: self.fingerprint_id() });
        }
        Ok(())
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.push(CHECKPOINT_VERSION);
        let fp = self.config.canonical();
        out.extend_from_slice(&(fp.len() as u32).to_le_bytes());
        out.extend_from_slice(fp.as_bytes());
        out.extend_from_slice(&(self.params.len() as u32).to_le_bytes());
        for (name, t) in self.params.iter() {
            write_name(&mut out, name);
            encode_tensor(t, &mut out);
        }
        if let Some(adam) = &self.adam {
            out.extend_from_slice(ADAM_MAGIC);
            out.extend_from_slice(&adam.step.to_le_bytes());
            out.extend_from_slice(&(adam.moments.len() as u32).to_le_bytes());
            for (name, mo) in &adam.moments {
                write_name(&mut out, name);
                encode_tensor(&mo.m, &mut out);
                encode_tensor(&mo.v, &mut out);
            }
        }
        out
    }

    /// Decodes a whole checkpoint. Stored tensors are converted to `T` when
    /// their dtype differs. Any structural problem yields an integrity error
    /// at the offending byte offset and no partial result.
    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        r.magic(CHECKPOINT_MAGIC)?;
        let at = r.offset();
        let version = r.u8("checkpoint version")?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::integrity(at, format!("unsupported checkpoint version {version}")));
        }
        let fp_len = r.u32("fingerprint length")? as usize;
        let at = r.offset();
        let fp = r.take(fp_len, "fingerprint")?;
        let config = std::str::from_utf8(fp)
            .map_err(|_| Error::integrity(at, "fingerprint is not UTF-8"))
            .and_then(|s| {
                ModelConfig::from_canonical(s).map_err(|e| Error::integrity(at, format!("unreadable fingerprint: {e}")))
            })?;
        let specs = param_specs(&config);
        let at = r.offset();
        let count = r.u32("entry count")? as usize;
        if count != specs.len() {
            return Err(Error::integrity(at, format!("{count} entries, configuration declares {}", specs.len())));
        }
        let mut params = ParamStore::new();
        for spec in &specs {
            let at = r.offset();
            let name = read_name(&mut r)?;
            let t = read_tensor(&mut r)?;
            if name != spec.name || t.shape().dims() != spec.dims.as_slice() {
                return Err(Error::integrity(
                    at,
                    format!("entry `{name}` {:?} does not match expected `{}` {:?}", t.shape(), spec.name, spec.dims),
                ));
            }
            params.insert(name, to_dtype(&t))?;
        }
        let adam = if r.is_empty() { None } else { Some(read_adam(&mut r, &params)?) };
        if !r.is_empty() {
            return Err(Error::integrity(r.offset(), format!("{} trailing bytes", r.remaining())));
        }
        Ok(Checkpoint { config, params, adam })
    }

    /// Writes via a temporary sibling file and a rename, so readers never
    /// observe a half-written checkpoint.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let tmp = path.with_extension("tmp");
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&self.encode())?;
            f.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::decode(&fs::read(path)?)
    }

    /// Loads and checks compatibility with `cfg` in one go.
    pub fn load_for(path: impl AsRef<Path>, cfg: &ModelConfig) -> Result<Self> {
        let ck = Self::load(path)?;
        ck.ensure_compatible(cfg)?;
        Ok(ck)
    }
}

fn to_dtype<T: Float>(t: &AnyTensor) -> Tensor<T> {
    t.exact().unwrap_or_else(|_| t.cast())
}

fn write_name(out: &mut Vec<u8>, name: &str) {
    let len = u16::try_from(name.len()).expect("parameter names are short");
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(name.as_bytes());
}

fn read_name(r: &mut ByteReader<'_>) -> Result<String> {
    let len = r.u16("name length")? as usize;
    let at = r.offset();
    let raw = r.take(len, "name")?;
    String::from_utf8(raw.to_vec()).map_err(|_| Error::integrity(at, "name is not UTF-8"))
}

fn read_adam<T: Float>(r: &mut ByteReader<'_>, params: &ParamStore<T>) -> Result<AdamState<T>> {
    r.magic(ADAM_MAGIC)?;
    let step = r.u64("adam step")?;
    let at = r.offset();
    let count = r.u32("adam entry count")? as usize;
    if count > params.len() {
        return Err(Error::integrity(at, format!("{count} optimizer entries for {} parameters", params.len())));
    }
    let mut moments = IndexMap::new();
    for _ in 0..count {
        let at = r.offset();
        let name = read_name(r)?;
        let m = read_tensor(r)?;
        let v = read_tensor(r)?;
        let Some(p) = params.get(&name) else {
            return Err(Error::integrity(at, format!("optimizer state for unknown parameter `{name}`")));
        };
        if m.shape() != p.shape() || v.shape() != p.shape() {
            return Err(Error::integrity(at, format!("optimizer state shape mismatch for `{name}`")));
        }
        if moments.insert(name.clone(), Moments { m: to_dtype(&m), v: to_dtype(&v) }).is_some() {
            return Err(Error::integrity(at, format!("duplicate optimizer entry `{name}`")));
        }
    }
    Ok(AdamState { step, moments })
}
