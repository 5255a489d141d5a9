//! A small differentiable encoder/decoder pair trained for equivariance.
//!
//! `f`: per-pixel linear 3→F, LeakyReLU(0.2), 2×2 average pool, per-position
//! linear F→C_s·D_s, reshape to a `C_s×D×D×D` scene, spherical mask.
//!
//! `g`: per-position linear C_s·D_s→F, LeakyReLU(0.2), nearest 2× upsample,
//! per-pixel linear F→3, sigmoid.
//!
//! All parameters and gradient math are f64.

mod adam;
mod net;
mod params;
mod train;

pub use adam::{adam_step, AdamState};
pub use net::{decode, encode, pair_forward, pair_loss_and_grad, PairForward, LEAKY_SLOPE};
pub use params::{
    load_checkpoint, save_checkpoint, CheckpointMeta, ModelConfig, ToyParams, HPARAMS_FILE, IMAGE_CHANNELS,
    PARAMS_FILE, PARAM_GROUPS,
};
pub use train::{evaluate, read_log, split_heldout, train, write_log, EvalSummary, LogRow, TrainConfig};
