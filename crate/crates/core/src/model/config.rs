use sha2::{Digest, Sha256};

use crate::blocks::{LsaConfig, STAGES};
use crate::kv::KvFile;
use crate::{Error, Result};

/// Architecture hyperparameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelConfig {
    /// Image channels, 1 (grayscale) or 3.
    pub in_channels: usize,
    /// Shared width of all stage features after projection.
    pub channels: usize,
    pub lsa: LsaConfig,
    /// (H, W), both divisible by 16 and at least 32.
    pub input_size: (usize, usize),
    /// Backbone width of each encoder stage before projection.
    pub encoder_widths: [usize; STAGES],
    /// When false the scale-aware attention module is bypassed (`O_i = F_i`).
    pub sa2: bool,
    /// Initialization seed. Not part of the fingerprint.
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            in_channels: 1,
            channels: 64,
            lsa: LsaConfig::default(),
            input_size: (64, 64),
            encoder_widths: [16, 32, 64, 128],
            sa2: true,
            seed: 0,
        }
    }
}

/// Largest accepted spatial extent.
pub const MAX_EXTENT: usize = 4096;
/// Largest accepted channel width.
pub const MAX_WIDTH: usize = 4096;

pub(crate) const MODEL_KEYS: &[&str] = &[
    "in_channels",
    "channels",
    "height",
    "width",
    "lsa.groups",
    "lsa.kernel_sizes",
    "encoder.widths",
    "sa2",
    "seed",
];

fn join(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if !matches!(self.in_channels, 1 | 3) {
            return Err(Error::Config(format!("in_channels must be 1 or 3, got {}", self.in_channels)));
        }
        let (h, w) = self.input_size;
        if h < 32 || w < 32 || h % 16 != 0 || w % 16 != 0 {
            return Err(Error::Config(format!("input size {h}×{w} must be at least 32 and divisible by 16")));
        }
        if self.lsa.channels() != self.channels {
            return Err(Error::Config(format!(
                "LSA width {} differs from model width {}",
                self.lsa.channels(),
                self.channels
            )));
        }
        if h > MAX_EXTENT || w > MAX_EXTENT {
            return Err(Error::Config(format!("input size {h}×{w} exceeds {MAX_EXTENT}")));
        }
        if self.channels > MAX_WIDTH || self.encoder_widths.iter().any(|&w| w == 0 || w > MAX_WIDTH) {
            return Err(Error::Config(format!("channel widths must lie in 1..={MAX_WIDTH}")));
        }
        Ok(())
    }

    /// Reads the model keys of a flat config file, defaulting absent ones.
    pub fn from_kv(kv: &KvFile) -> Result<Self> {
        let d = ModelConfig::default();
        let channels = kv.get_or("channels", d.channels)?;
        let groups = kv.get_or("lsa.groups", d.lsa.groups())?;
        let kernels = kv.list("lsa.kernel_sizes")?.unwrap_or_else(|| d.lsa.kernel_sizes().to_vec());
        let widths: Vec<usize> = kv.list("encoder.widths")?.unwrap_or_else(|| d.encoder_widths.to_vec());
        let encoder_widths = widths
            .try_into()
            .map_err(|w: Vec<usize>| Error::Config(format!("encoder.widths needs {STAGES} values, got {}", w.len())))?;
        let cfg = ModelConfig {
            in_channels: kv.get_or("in_channels", d.in_channels)?,
            channels,
            lsa: LsaConfig::new(channels, groups, kernels)?,
            input_size: (kv.get_or("height", d.input_size.0)?, kv.get_or("width", d.input_size.1)?),
            encoder_widths,
            sa2: kv.get_or("sa2", d.sa2)?,
            seed: kv.get_or("seed", d.seed)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Canonical text form of every architecture field (seed excluded).
    /// Two configs are checkpoint-compatible iff these strings are equal.
    pub fn canonical(&self) -> String {
        let mut kv = KvFile::default();
        kv.set("in_channels", self.in_channels);
        kv.set("channels", self.channels);
        kv.set("height", self.input_size.0);
        kv.set("width", self.input_size.1);
        kv.set("lsa.groups", self.lsa.groups());
        kv.set("lsa.kernel_sizes", join(self.lsa.kernel_sizes()));
        kv.set("encoder.widths", join(&self.encoder_widths));
        kv.set("sa2", self.sa2);
        kv.render()
    }

    /// Short identifier of [`ModelConfig::canonical`]: the first 16 hex digits of its SHA-256.
    pub fn fingerprint_id(&self) -> String {
        fingerprint_id(self.canonical().as_bytes())
    }

    pub fn from_canonical(text: &str) -> Result<Self> {
        let kv = KvFile::parse(text)?;
        kv.reject_unknown(MODEL_KEYS)?;
        Self::from_kv(&kv)
    }
}

pub fn fingerprint_id(canonical: &[u8]) -> String {
    Sha256::digest(canonical).iter().take(8).map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_round_trip() {
        let mut cfg = ModelConfig { channels: 32, lsa: LsaConfig::new(32, 2, vec![3, 5]).unwrap(), ..Default::default() };
        cfg.seed = 77;
        let back = ModelConfig::from_canonical(&cfg.canonical()).unwrap();
        assert_eq!(back, ModelConfig { seed: 0, ..cfg.clone() });
        assert_eq!(back.fingerprint_id(), cfg.fingerprint_id());
    }

    #[test]
    fn seed_does_not_change_fingerprint() {
        let a = ModelConfig::default();
        let b = ModelConfig { seed: 5, ..ModelConfig::default() };
        assert_eq!(a.fingerprint_id(), b.fingerprint_id());
        let c = ModelConfig { sa2: false, ..ModelConfig::default() };
        assert_ne!(a.fingerprint_id(), c.fingerprint_id());
    }

    #[test]
    fn validation() {
        assert!(ModelConfig { input_size: (48, 40), ..Default::default() }.validate().is_err());
        assert!(ModelConfig { input_size: (16, 16), ..Default::default() }.validate().is_err());
        assert!(ModelConfig { in_channels: 2, ..Default::default() }.validate().is_err());
        assert!(ModelConfig::default().validate().is_ok());
        let kv = KvFile::parse("channels = 30\nlsa.groups = 4").unwrap();
        assert!(matches!(ModelConfig::from_kv(&kv), Err(Error::Config(_))));
    }
}
