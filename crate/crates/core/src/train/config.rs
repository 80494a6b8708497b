use super::AdamConfig;
use crate::kv::KvFile;
use crate::model::MODEL_KEYS;
use crate::{Error, Result};

/// Optimization settings.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    /// Number of optimizer updates.
    pub steps: usize,
    /// Seeds batch order and augmentation draws.
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub augment: bool,
    /// Save an intermediate checkpoint every this many steps; 0 disables.
    pub checkpoint_every: usize,
    /// Supervise all four decoder outputs rather than only the finest.
    pub deep_supervision: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-3,
            batch_size: 4,
            steps: 200,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            augment: true,
            checkpoint_every: 0,
            deep_supervision: true,
        }
    }
}

const TRAIN_KEYS: &[&str] = &[
    "lr",
    "batch_size",
    "steps",
    "epochs",
    "data_seed",
    "beta1",
    "beta2",
    "eps",
    "augment",
    "checkpoint_every",
    "deep_supervision",
];

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::Config(format!("lr must be positive, got {}", self.lr)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Config(format!("{name} must lie in [0, 1), got {b}")));
            }
        }
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return Err(Error::Config(format!("eps must be positive, got {}", self.eps)));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig { lr: self.lr, beta1: self.beta1, beta2: self.beta2, eps: self.eps }
    }

    /// Reads the training keys of a config file that may also hold model keys.
    /// `epochs` is converted to steps using `dataset_len`; giving both
    /// `epochs` and `steps` is an error.
    pub fn from_kv(kv: &KvFile, dataset_len: usize) -> Result<Self> {
        let known: Vec<&str> = TRAIN_KEYS.iter().chain(MODEL_KEYS).copied().collect();
        kv.reject_unknown(&known)?;
        let d = TrainConfig::default();
        let batch_size = kv.get_or("batch_size", d.batch_size)?;
        let steps = match (kv.get::<usize>("steps")?, kv.get::<usize>("epochs")?) {
            (Some(_), Some(_)) => return Err(Error::Config("give either `steps` or `epochs`, not both".into())),
            (Some(s), None) => s,
            (None, Some(e)) => e * dataset_len.div_ceil(batch_size.max(1)),
            (None, None) => d.steps,
        };
        let cfg = TrainConfig {
            lr: kv.get_or("lr", d.lr)?,
            batch_size,
            steps,
            seed: kv.get_or("data_seed", d.seed)?,
            beta1: kv.get_or("beta1", d.beta1)?,
            beta2: kv.get_or("beta2", d.beta2)?,
            eps: kv.get_or("eps", d.eps)?,
            augment: kv.get_or("augment", d.augment)?,
            checkpoint_every: kv.get_or("checkpoint_every", d.checkpoint_every)?,
            deep_supervision: kv.get_or("deep_supervision", d.deep_supervision)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epochs_become_steps() {
        let kv = KvFile::parse("epochs = 3\nbatch_size = 4\nchannels = 64").unwrap();
        assert_eq!(TrainConfig::from_kv(&kv, 10).unwrap().steps, 9);
        let both = KvFile::parse("epochs = 3\nsteps = 4").unwrap();
        assert!(TrainConfig::from_kv(&both, 10).is_err());
        assert!(TrainConfig::from_kv(&KvFile::parse("lr = 0").unwrap(), 1).is_err());
        assert!(TrainConfig::from_kv(&KvFile::parse("lrate = 1").unwrap(), 1).is_err());
    }
}
