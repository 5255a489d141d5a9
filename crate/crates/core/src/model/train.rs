use std::path::Path;

use rayon::prelude::*;

use crate::equivariance::{equivariance_gap, DEFAULT_SCENE_WEIGHT};
use crate::error::{Error, Result};
use crate::metrics::psnr;
use crate::rng::{derive_seed, SplitMix64};
use crate::synth::{DatasetEntry, TrainSample};

use super::adam::{adam_step, AdamState};
use super::net::{encode, pair_forward, pair_loss_and_grad};
use super::params::{ModelConfig, ToyParams};

const SAMPLE_STREAM: u64 = 0x7361_6d70; // "samp"

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub steps: usize,
    pub lr: f64,
    pub scene_weight: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { steps: 2000, lr: 2e-4, scene_weight: DEFAULT_SCENE_WEIGHT, seed: 0 }
    }
}

/// One optimisation step. Losses are those of the sampled pair before the
/// update; `psnr` is `g(R f(x1))` against `x2` on a held-out pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogRow {
    pub step: usize,
    pub l_render: f64,
    pub l_scene: f64,
    pub total: f64,
    pub psnr: f64,
}

/// Adam on single pairs drawn uniformly with replacement.
///
/// Parameters are initialised from `seed`; the sampling stream is derived from
/// it. Held-out pairs are visited round-robin for the logged PSNR; when
/// `heldout` is empty the training pairs are used.
pub fn train(
    train_set: &[TrainSample],
    heldout: &[TrainSample],
    model: ModelConfig,
    config: &TrainConfig,
) -> Result<(ToyParams, Vec<LogRow>)> {
    if train_set.is_empty() {
        return Err(Error::Invalid("training set is empty".into()));
    }
    if !(config.lr > 0.0 && config.lr.is_finite()) {
        return Err(Error::Invalid(format!("learning rate must be positive, got {}", config.lr)));
    }
    let probe = if heldout.is_empty() { train_set } else { heldout };
    let mut params = ToyParams::init(model, config.seed)?;
    let mut adam = AdamState::new(&params, config.lr);
    let mut rng = SplitMix64::new(derive_seed(config.seed, SAMPLE_STREAM));
    let mut log = Vec::with_capacity(config.steps);
    for step in 0..config.steps {
        let sample = &train_set[rng.below(train_set.len())];
        let (loss, grads) = pair_loss_and_grad(&params, sample, config.scene_weight)?;
        if !loss.total.is_finite() {
            return Err(Error::Invalid(format!("loss diverged at step {step}")));
        }
        let held = &probe[step % probe.len()];
        let pred = pair_forward(&params, held, config.scene_weight)?.pred_x2;
        let psnr = psnr(&pred, &held.x2.cast::<f64>())?;
        log.push(LogRow { step, l_render: loss.l_render, l_scene: loss.l_scene, total: loss.total, psnr });
        adam_step(&mut adam, &mut params, &grads)?;
    }
    Ok((params, log))
}

/// Splits a dataset so the last `heldout_scenes` scene indices are held out.
pub fn split_heldout(entries: &[DatasetEntry], heldout_scenes: usize) -> Result<(Vec<TrainSample>, Vec<TrainSample>)> {
    let scenes = entries.iter().map(|e| e.scene + 1).max().unwrap_or(0);
    if heldout_scenes >= scenes {
        return Err(Error::Invalid(format!(
            "cannot hold out {heldout_scenes} of {scenes} scenes and still train"
        )));
    }
    let cut = scenes - heldout_scenes;
    let (held, train): (Vec<&DatasetEntry>, Vec<&DatasetEntry>) = entries.iter().partition(|e| e.scene >= cut);
    Ok((
        train.into_iter().map(|e| e.sample.clone()).collect(),
        held.into_iter().map(|e| e.sample.clone()).collect(),
    ))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalSummary {
    pub pairs: usize,
    /// PSNR of `g(R f(x1))` against `x2`.
    pub mean_psnr_db: f64,
    /// `rms(R f(x1) − f(x2)) / rms(f(x1))`; `x2` is the true rotated view.
    pub mean_equiv_gap: f64,
    pub mean_l_render: f64,
    pub mean_l_scene: f64,
    pub mean_total: f64,
}

/// Per-pair evaluation in parallel, reduced in input order.
pub fn evaluate(params: &ToyParams, samples: &[TrainSample], scene_weight: f64) -> Result<EvalSummary> {
    if samples.is_empty() {
        return Err(Error::Invalid("evaluation set is empty".into()));
    }
    let rows: Vec<[f64; 5]> = samples
        .par_iter()
        .map(|s| {
            let fwd = pair_forward(params, s, scene_weight)?;
            let psnr = psnr(&fwd.pred_x2, &s.x2.cast::<f64>())?;
            let gap = equivariance_gap(|x| encode(params, x), &s.x1, s.pose, |_, _| Ok(s.x2.clone()))?;
            Ok([psnr, gap, fwd.loss.l_render, fwd.loss.l_scene, fwd.loss.total])
        })
        .collect::<Result<_>>()?;
    let n = rows.len() as f64;
    let mean = |k: usize| rows.iter().map(|r| r[k]).sum::<f64>() / n;
    Ok(EvalSummary {
        pairs: rows.len(),
        mean_psnr_db: mean(0),
        mean_equiv_gap: mean(1),
        mean_l_render: mean(2),
        mean_l_scene: mean(3),
        mean_total: mean(4),
    })
}

/// Writes `step,l_render,l_scene,total,psnr`.
pub fn write_log(path: impl AsRef<Path>, rows: &[LogRow]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["step", "l_render", "l_scene", "total", "psnr"])?;
    for r in rows {
        w.write_record([
            r.step.to_string(),
            r.l_render.to_string(),
            r.l_scene.to_string(),
            r.total.to_string(),
            r.psnr.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_log(path: impl AsRef<Path>) -> Result<Vec<LogRow>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in r.records() {
        let row = row?;
        let bad = || Error::Invalid(format!("{}: bad log row {row:?}", path.display()));
        let num = |i: usize| row.get(i).and_then(|s| s.parse::<f64>().ok()).ok_or_else(bad);
        out.push(LogRow {
            step: row.get(0).and_then(|s| s.parse().ok()).ok_or_else(bad)?,
            l_render: num(1)?,
            l_scene: num(2)?,
            total: num(3)?,
            psnr: num(4)?,
        });
    }
    Ok(out)
}
