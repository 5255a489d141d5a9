use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use eqrender::bench::{
    angle_sweep, load_image_dir, resolution_table, run_aliasing, synthetic_images, write_aliasing_csv,
    write_resolution_csv, BenchMethod,
};
use eqrender::codec::{pnm, tsr};
use eqrender::equivariance::{rotate_scene, unrotate_scene, RelativePose, RotationMethod, DEFAULT_SCENE_WEIGHT};
use eqrender::model::{
    evaluate, load_checkpoint, save_checkpoint, split_heldout, train, write_log, CheckpointMeta, ModelConfig,
    TrainConfig,
};
use eqrender::resample::resample_rotate2d;
use eqrender::shear::{decompose_angle, shear_rotate2d};
use eqrender::synth::{read_dataset, write_dataset, DatasetConfig};
use eqrender::tensor::{Element, Tensor};

#[derive(Parser)]
#[command(name = "eqrender", version, about = "Exact shear rotations and equivariant scene codes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Forward/back rotation error of bilinear and shear rotation over an angle sweep.
    BenchAliasing(BenchArgs),
    /// Smallest angle that moves a pixel, by formula and by brute force.
    TableResolution(TableArgs),
    /// Rotate a TSR tensor (C×n×n or C×n×n×n) or a PPM/PGM image.
    Rotate(RotateArgs),
    /// Generate a synthetic posed-pair dataset.
    Synth(SynthArgs),
    /// Train the toy encoder/decoder on a dataset.
    Train(TrainArgs),
    /// Mean PSNR and equivariance gap of a checkpoint on a dataset.
    Eval(EvalArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum BenchMethodArg {
    Bilinear,
    Shear,
    Both,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 500)]
    count: usize,
    #[arg(long, default_value_t = 32)]
    size: usize,
    #[arg(long, default_value_t = 1.0)]
    angle_step: f64,
    #[arg(long, value_enum, default_value_t = BenchMethodArg::Both)]
    method: BenchMethodArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory of square PPM/PGM images to use instead of synthetic ones.
    #[arg(long)]
    source: Option<PathBuf>,
    /// Output CSV (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TableArgs {
    #[arg(long, value_delimiter = ',', default_value = "8,16,32,64")]
    size: Vec<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RotateMethodArg {
    Shear,
    /// Bilinear in 2D, trilinear in 3D.
    Bilinear,
    Trilinear,
}

#[derive(Args)]
struct RotateArgs {
    input: PathBuf,
    /// Degrees: the 2D angle, or the elevation for scenes.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    theta: f64,
    /// Azimuth in degrees (scenes only).
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    phi: f64,
    #[arg(long, value_enum, default_value_t = RotateMethodArg::Shear)]
    method: RotateMethodArg,
    /// Apply the inverse rotation instead.
    #[arg(long)]
    inverse: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of scenes.
    #[arg(long, default_value_t = 64)]
    count: usize,
    #[arg(long, default_value_t = 8)]
    pairs: usize,
    /// Scene grid size.
    #[arg(long, default_value_t = 8)]
    size: usize,
    #[arg(long, default_value_t = 16)]
    image_size: usize,
    #[arg(long, default_value_t = 3)]
    blobs: usize,
    /// Also write PPM previews.
    #[arg(long)]
    ppm: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 2000)]
    steps: usize,
    #[arg(long, default_value_t = 2e-4)]
    lr: f64,
    #[arg(long, default_value_t = DEFAULT_SCENE_WEIGHT)]
    scene_weight: f64,
    #[arg(long, default_value_t = 16)]
    features: usize,
    /// Scenes (highest indices) excluded from training.
    #[arg(long, default_value_t = 8)]
    heldout_scenes: usize,
    /// Checkpoint directory; also receives `train_log.csv`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Evaluate only the last N scenes; 0 evaluates every pair.
    #[arg(long, default_value_t = 8)]
    heldout_scenes: usize,
    #[arg(long)]
    scene_weight: Option<f64>,
    /// Directory receiving `eval.csv`.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::BenchAliasing(a) => cmd_bench_aliasing(a),
        Command::TableResolution(a) => cmd_table_resolution(a),
        Command::Rotate(a) => cmd_rotate(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            Box::new(fs::File::create(p).with_context(|| format!("creating {}", p.display()))?)
        }
        None => Box::new(io::stdout().lock()),
    })
}

fn cmd_bench_aliasing(a: BenchArgs) -> Result<()> {
    if a.count == 0 {
        bail!("--count must be at least 1");
    }
    let images = match &a.source {
        Some(dir) => load_image_dir(dir, a.count)?,
        None => synthetic_images(a.count, a.size, a.seed)?,
    };
    let methods: &[BenchMethod] = match a.method {
        BenchMethodArg::Bilinear => &[BenchMethod::Bilinear],
        BenchMethodArg::Shear => &[BenchMethod::Shear],
        BenchMethodArg::Both => &BenchMethod::ALL,
    };
    let records = run_aliasing(&images, &angle_sweep(a.angle_step)?, methods)?;
    write_aliasing_csv(output(a.out.as_deref())?, &records)?;
    Ok(())
}

fn cmd_table_resolution(a: TableArgs) -> Result<()> {
    if let Some(&n) = a.size.iter().find(|&&n| n < 2) {
        bail!("grid size must be at least 2, got {n}");
    }
    write_resolution_csv(output(a.out.as_deref())?, &resolution_table(&a.size)?)?;
    Ok(())
}

fn is_pnm(path: &Path) -> bool {
    matches!(path.extension().and_then(|e| e.to_str()), Some("ppm" | "pgm"))
}

fn cmd_rotate(a: RotateArgs) -> Result<()> {
    if is_pnm(&a.input) {
        let img = pnm::read(&a.input)?;
        let out = rotate_2d(&img, &a)?;
        pnm::write(&out, &a.out)?;
        return Ok(());
    }
    let bytes = fs::read(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let encoded = match tsr::peek_dtype(&bytes)? {
        <f32 as Element>::DTYPE => rotate_tsr::<f32>(&bytes, &a)?,
        _ => rotate_tsr::<f64>(&bytes, &a)?,
    };
    fs::write(&a.out, encoded).with_context(|| format!("writing {}", a.out.display()))?;
    Ok(())
}

fn rotate_tsr<T: Element>(bytes: &[u8], a: &RotateArgs) -> Result<Vec<u8>> {
    let t: Tensor<T> = tsr::decode(bytes)?;
    let out = match t.ndim() {
        3 => rotate_2d(&t, a)?,
        4 => {
            for (axis, angle) in [("elevation", a.theta), ("azimuth", a.phi)] {
                print_decomposition(axis, angle)?;
            }
            let method = match a.method {
                RotateMethodArg::Shear => RotationMethod::Shear,
                _ => RotationMethod::Trilinear,
            };
            let pose = RelativePose::new(a.phi, a.theta);
            if a.inverse {
                unrotate_scene(&t, pose, method)?
            } else {
                rotate_scene(&t, pose, method)?
            }
        }
        _ => bail!("cannot rotate a tensor of shape {:?}: expected C×n×n or C×n×n×n", t.shape()),
    };
    Ok(tsr::encode(&out))
}

fn rotate_2d<T: Element>(t: &Tensor<T>, a: &RotateArgs) -> Result<Tensor<T>> {
    if a.phi != 0.0 {
        bail!("--phi applies only to 4-D scene tensors");
    }
    let theta = if a.inverse { -a.theta } else { a.theta };
    print_decomposition("theta", theta)?;
    Ok(match a.method {
        RotateMethodArg::Shear => shear_rotate2d(t, theta)?,
        _ => resample_rotate2d(t, theta)?,
    })
}

fn print_decomposition(axis: &str, angle: f64) -> Result<()> {
    let d = decompose_angle(angle)?;
    println!("{axis} {angle}: quarter turns {} + shear {}", d.quarter_turns(), d.small);
    Ok(())
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    let config = DatasetConfig {
        num_scenes: a.count,
        pairs_per_scene: a.pairs,
        scene_size: a.size,
        image_size: a.image_size,
        num_blobs: a.blobs,
        seed: a.seed,
        export_ppm: a.ppm,
    };
    if config.num_scenes == 0 || config.pairs_per_scene == 0 {
        bail!("--count and --pairs must be at least 1");
    }
    let rows = write_dataset(&a.out, &config)?;
    println!("wrote {} pairs to {}", rows.len(), a.out.display());
    Ok(())
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let entries = read_dataset(&a.data)?;
    let (train_set, heldout) = split_heldout(&entries, a.heldout_scenes)?;
    let image_size = train_set[0].x1.shape()[1];
    let model = ModelConfig { features: a.features, image_size, scene_channels: 4, scene_size: image_size / 2 };
    let config = TrainConfig { steps: a.steps, lr: a.lr, scene_weight: a.scene_weight, seed: a.seed };
    let (params, log) = train(&train_set, &heldout, model, &config)?;
    let meta = CheckpointMeta { steps: a.steps, lr: a.lr, scene_weight: a.scene_weight, seed: a.seed };
    save_checkpoint(&a.out, &params, &meta)?;
    write_log(a.out.join("train_log.csv"), &log)?;
    if let Some(last) = log.last() {
        println!("step {}: total {} psnr {} dB", last.step, last.total, last.psnr);
    }
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let entries = read_dataset(&a.data)?;
    let (params, meta) = load_checkpoint(&a.checkpoint)?;
    let samples = if a.heldout_scenes == 0 {
        entries.into_iter().map(|e| e.sample).collect()
    } else {
        split_heldout(&entries, a.heldout_scenes)?.1
    };
    let s = evaluate(&params, &samples, a.scene_weight.unwrap_or(meta.scene_weight))?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let mut w = csv::Writer::from_path(a.out.join("eval.csv"))?;
    w.write_record(["pairs", "mean_psnr_db", "mean_equiv_gap"])?;
    w.write_record([s.pairs.to_string(), s.mean_psnr_db.to_string(), s.mean_equiv_gap.to_string()])?;
    w.flush()?;
    println!("pairs {} mean_psnr_db {} mean_equiv_gap {}", s.pairs, s.mean_psnr_db, s.mean_equiv_gap);
    Ok(())
}
