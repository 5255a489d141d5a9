use std::fs;
use std::path::Path;

use crate::codec::tsr;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, SplitMix64};
use crate::tensor::Tensor;

pub const IMAGE_CHANNELS: usize = 3;

/// Parameter groups in checkpoint order. Weights are stored `out × in`, row-major.
pub const PARAM_GROUPS: [&str; 8] = [
    "enc_mix1.weight",
    "enc_mix1.bias",
    "enc_proj.weight",
    "enc_proj.bias",
    "dec_proj.weight",
    "dec_proj.bias",
    "dec_mix1.weight",
    "dec_mix1.bias",
];

pub const PARAMS_FILE: &str = "params.tsr";
pub const HPARAMS_FILE: &str = "hparams.csv";

const INIT_STREAM: u64 = 0x696e_6974; // "init"

/// Layer sizes. The image side is twice the scene side (one fixed 2×2 pool).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModelConfig {
    pub features: usize,
    pub image_size: usize,
    pub scene_channels: usize,
    pub scene_size: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { features: 16, image_size: 16, scene_channels: 4, scene_size: 8 }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.features == 0 || self.scene_channels == 0 || self.scene_size == 0 {
            return Err(Error::Invalid(format!("degenerate model config {self:?}")));
        }
        if self.image_size != 2 * self.scene_size {
            return Err(Error::Invalid(format!(
                "image size {} must be twice the scene size {}",
                self.image_size, self.scene_size
            )));
        }
        Ok(())
    }

    /// Channels of the flattened scene code, `C_s · D_s`.
    pub fn code_channels(&self) -> usize {
        self.scene_channels * self.scene_size
    }

    pub fn image_shape(&self) -> [usize; 3] {
        [IMAGE_CHANNELS, self.image_size, self.image_size]
    }

    pub fn scene_shape(&self) -> [usize; 4] {
        let n = self.scene_size;
        [self.scene_channels, n, n, n]
    }

    /// `(out, in)` of each linear map, in group order.
    fn maps(&self) -> [(usize, usize); 4] {
        let (f, o) = (self.features, self.code_channels());
        [(f, IMAGE_CHANNELS), (o, f), (f, o), (IMAGE_CHANNELS, f)]
    }

    pub fn group_lens(&self) -> [usize; 8] {
        let m = self.maps();
        [m[0].0 * m[0].1, m[0].0, m[1].0 * m[1].1, m[1].0, m[2].0 * m[2].1, m[2].0, m[3].0 * m[3].1, m[3].0]
    }

    pub fn num_params(&self) -> usize {
        self.group_lens().iter().sum()
    }
}

/// Weights of the encoder `f` and decoder `g`. Also used for gradients.
#[derive(Clone, Debug, PartialEq)]
pub struct ToyParams {
    config: ModelConfig,
    groups: [Vec<f64>; 8],
}

impl ToyParams {
    pub fn zeros(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let groups = config.group_lens().map(|len| vec![0.0; len]);
        Ok(ToyParams { config, groups })
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        let mut p = Self::zeros(config)?;
        let mut rng = SplitMix64::new(derive_seed(seed, INIT_STREAM));
        for (k, (out, inp)) in config.maps().into_iter().enumerate() {
            let bound = (6.0 / (out + inp) as f64).sqrt();
            for w in &mut p.groups[2 * k] {
                *w = rng.uniform(-bound, bound);
            }
        }
        Ok(p)
    }

    pub fn config(&self) -> ModelConfig {
        self.config
    }

    pub fn groups(&self) -> &[Vec<f64>; 8] {
        &self.groups
    }

    pub fn groups_mut(&mut self) -> &mut [Vec<f64>; 8] {
        &mut self.groups
    }

    pub fn group(&self, name: &str) -> Option<&[f64]> {
        PARAM_GROUPS.iter().position(|g| *g == name).map(|i| self.groups[i].as_slice())
    }

    pub(crate) fn enc_mix1(&self) -> (&[f64], &[f64]) {
        (&self.groups[0], &self.groups[1])
    }

    pub(crate) fn enc_proj(&self) -> (&[f64], &[f64]) {
        (&self.groups[2], &self.groups[3])
    }

    pub(crate) fn dec_proj(&self) -> (&[f64], &[f64]) {
        (&self.groups[4], &self.groups[5])
    }

    pub(crate) fn dec_mix1(&self) -> (&[f64], &[f64]) {
        (&self.groups[6], &self.groups[7])
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.groups.concat()
    }

    pub fn from_flat(config: ModelConfig, flat: &[f64]) -> Result<Self> {
        let mut p = Self::zeros(config)?;
        if flat.len() != config.num_params() {
            return Err(Error::Invalid(format!(
                "expected {} parameters, got {}",
                config.num_params(),
                flat.len()
            )));
        }
        let mut off = 0;
        for g in &mut p.groups {
            let len = g.len();
            g.copy_from_slice(&flat[off..off + len]);
            off += len;
        }
        Ok(p)
    }

    pub fn ensure_compatible(&self, other: &ToyParams) -> Result<()> {
        if self.config != other.config {
            return Err(Error::Invalid(format!(
                "parameter shapes differ: {:?} vs {:?}",
                self.config, other.config
            )));
        }
        Ok(())
    }
}

/// Hyperparameters written next to a checkpoint.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CheckpointMeta {
    pub steps: usize,
    pub lr: f64,
    pub scene_weight: f64,
    pub seed: u64,
}

/// Writes `params.tsr` (all groups concatenated in [`PARAM_GROUPS`] order, f64)
/// and `hparams.csv` (`key,value`).
pub fn save_checkpoint(dir: impl AsRef<Path>, params: &ToyParams, meta: &CheckpointMeta) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let flat = params.flatten();
    tsr::write(&Tensor::from_vec(vec![flat.len()], flat)?, dir.join(PARAMS_FILE))?;
    let c = params.config();
    let path = dir.join(HPARAMS_FILE);
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["key", "value"])?;
    for (k, v) in [
        ("features", c.features.to_string()),
        ("image_size", c.image_size.to_string()),
        ("scene_channels", c.scene_channels.to_string()),
        ("scene_size", c.scene_size.to_string()),
        ("steps", meta.steps.to_string()),
        ("lr", meta.lr.to_string()),
        ("scene_weight", meta.scene_weight.to_string()),
        ("seed", meta.seed.to_string()),
    ] {
        w.write_record([k, v.as_str()])?;
    }
    w.flush().map_err(|e| Error::io(&path, e))
}

pub fn load_checkpoint(dir: impl AsRef<Path>) -> Result<(ToyParams, CheckpointMeta)> {
    let dir = dir.as_ref();
    let path = dir.join(HPARAMS_FILE);
    let mut r = csv::Reader::from_path(&path)?;
    let mut kv = std::collections::HashMap::new();
    for row in r.records() {
        let row = row?;
        if row.len() != 2 {
            return Err(Error::Invalid(format!("{}: bad row {row:?}", path.display())));
        }
        kv.insert(row[0].to_string(), row[1].to_string());
    }
    fn get<T: std::str::FromStr>(kv: &std::collections::HashMap<String, String>, key: &str, path: &Path) -> Result<T> {
        kv.get(key)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::Invalid(format!("{}: missing or bad `{key}`", path.display())))
    }
    let config = ModelConfig {
        features: get(&kv, "features", &path)?,
        image_size: get(&kv, "image_size", &path)?,
        scene_channels: get(&kv, "scene_channels", &path)?,
        scene_size: get(&kv, "scene_size", &path)?,
    };
    let meta = CheckpointMeta {
        steps: get(&kv, "steps", &path)?,
        lr: get(&kv, "lr", &path)?,
        scene_weight: get(&kv, "scene_weight", &path)?,
        seed: get(&kv, "seed", &path)?,
    };
    let flat: Tensor<f64> = tsr::read(dir.join(PARAMS_FILE))?;
    Ok((ToyParams::from_flat(config, flat.data())?, meta))
}
