//! Round-trip aliasing benchmark and the angle-resolution table.

use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::codec::pnm;
use crate::error::{Error, Result};
use crate::metrics::{l1_mean, max_abs};
use crate::resample::resample_rotate2d;
use crate::rng::SplitMix64;
use crate::shear::{angle_resolution, shear_rotate2d, smallest_effective_angle_bruteforce, SweepOutcome};
use crate::tensor::{square_side, Image};

/// Sweep step used by the resolution table.
pub const BRUTEFORCE_STEP_DEG: f64 = 0.005;

const BINOMIAL: [f64; 5] = [1.0, 4.0, 6.0, 4.0, 1.0];

/// White noise smoothed twice by a 5×5 binomial kernel (periodic boundary),
/// then min-max normalised to `[0, 1]`. Three channels.
pub fn gen_bandlimited_image(n: usize, seed: u64) -> Result<Image> {
    if n < 8 {
        return Err(Error::Invalid(format!("band-limited images need n >= 8, got {n}")));
    }
    let mut rng = SplitMix64::new(seed);
    let mut data: Vec<f64> = (0..3 * n * n).map(|_| rng.next_f64()).collect();
    for plane in data.chunks_exact_mut(n * n) {
        for _ in 0..2 {
            let smoothed = binomial_blur(plane, n);
            plane.copy_from_slice(&smoothed);
        }
    }
    let lo = data.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    Image::from_vec(vec![3, n, n], data.iter().map(|v| ((v - lo) / span) as f32).collect())
}

fn binomial_blur(plane: &[f64], n: usize) -> Vec<f64> {
    let pass = |src: &[f64], horizontal: bool| -> Vec<f64> {
        let mut out = vec![0.0; n * n];
        for r in 0..n {
            for c in 0..n {
                let mut acc = 0.0;
                for (k, w) in BINOMIAL.iter().enumerate() {
                    let off = (k + n - 2) % n;
                    let (rr, cc) = if horizontal { (r, (c + off) % n) } else { ((r + off) % n, c) };
                    acc += w * src[rr * n + cc];
                }
                out[r * n + c] = acc / 16.0;
            }
        }
        out
    };
    pass(&pass(plane, true), false)
}

/// Variance of the 4-neighbour Laplacian with periodic boundary, pooled over channels.
pub fn laplacian_variance(img: &Image) -> Result<f64> {
    let n = square_side(img)?;
    let mut vals = Vec::with_capacity(img.len());
    for plane in img.data().chunks_exact(n * n) {
        let at = |r: usize, c: usize| f64::from(plane[(r % n) * n + c % n]);
        for r in 0..n {
            for c in 0..n {
                vals.push(at(r + 1, c) + at(r + n - 1, c) + at(r, c + 1) + at(r, c + n - 1) - 4.0 * at(r, c));
            }
        }
    }
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    Ok(vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / vals.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BenchMethod {
    Bilinear,
    Shear,
}

impl BenchMethod {
    pub const ALL: [BenchMethod; 2] = [BenchMethod::Bilinear, BenchMethod::Shear];

    pub fn name(self) -> &'static str {
        match self {
            BenchMethod::Bilinear => "bilinear",
            BenchMethod::Shear => "shear",
        }
    }

    fn round_trip(self, img: &Image, theta: f64) -> Result<Image> {
        match self {
            BenchMethod::Bilinear => resample_rotate2d(&resample_rotate2d(img, theta)?, -theta),
            BenchMethod::Shear => shear_rotate2d(&shear_rotate2d(img, theta)?, -theta),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AliasingRecord {
    pub angle_deg: f64,
    pub method: BenchMethod,
    /// Mean over images of the per-image mean absolute round-trip error.
    pub mean_abs_err: f64,
    /// Largest single-pixel error over all images.
    pub max_abs_err: f64,
    pub num_images: usize,
}

/// `0, step, 2·step, …` strictly below 360.
pub fn angle_sweep(step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::Invalid(format!("angle step must be positive, got {step}")));
    }
    Ok((0..).map(|i| i as f64 * step).take_while(|&a| a < 360.0).collect())
}

/// Rotates every image forward and back at every angle with each method.
///
/// Angles run in parallel; each angle accumulates its images in index order,
/// so results do not depend on the number of workers. Rows are sorted by
/// method, then angle.
pub fn run_aliasing(images: &[Image], angles: &[f64], methods: &[BenchMethod]) -> Result<Vec<AliasingRecord>> {
    if images.is_empty() {
        return Err(Error::Invalid("aliasing benchmark needs at least one image".into()));
    }
    let mut methods = methods.to_vec();
    methods.sort();
    methods.dedup();
    let jobs: Vec<(BenchMethod, f64)> =
        methods.iter().flat_map(|&m| angles.iter().map(move |&a| (m, a))).collect();
    jobs.par_iter()
        .map(|&(method, angle)| {
            let mut sum = 0.0;
            let mut worst = 0.0f64;
            for img in images {
                let back = method.round_trip(img, angle)?;
                sum += l1_mean(&back, img)?;
                worst = worst.max(max_abs(&back, img)?);
            }
            Ok(AliasingRecord {
                angle_deg: angle,
                method,
                mean_abs_err: sum / images.len() as f64,
                max_abs_err: worst,
                num_images: images.len(),
            })
        })
        .collect()
}

pub fn synthetic_images(count: usize, size: usize, seed: u64) -> Result<Vec<Image>> {
    if count == 0 {
        return Err(Error::Invalid("image count must be at least 1".into()));
    }
    (0..count as u64)
        .map(|i| gen_bandlimited_image(size, crate::rng::derive_seed(seed, i)))
        .collect()
}

/// Reads up to `count` square `.ppm` / `.pgm` files from `dir`, sorted by file name.
pub fn load_image_dir(dir: impl AsRef<Path>, count: usize) -> Result<Vec<Image>> {
    let dir = dir.as_ref();
    let mut paths: Vec<_> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<_>>()?;
    paths.retain(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("ppm" | "pgm")));
    paths.sort();
    paths.truncate(count);
    if paths.is_empty() {
        return Err(Error::Invalid(format!("{}: no .ppm or .pgm images", dir.display())));
    }
    paths
        .iter()
        .map(|p| {
            let img = pnm::read(p)?;
            square_side(&img)?;
            Ok(img)
        })
        .collect()
}

pub fn write_aliasing_csv(out: impl Write, records: &[AliasingRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["angle_deg", "method", "mean_abs_err", "max_abs_err", "num_images"])?;
    for r in records {
        w.write_record([
            r.angle_deg.to_string(),
            r.method.name().to_string(),
            r.mean_abs_err.to_string(),
            r.max_abs_err.to_string(),
            r.num_images.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::Invalid(format!("writing aliasing csv: {e}")))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResolutionRow {
    pub n: usize,
    pub formula_deg: f64,
    /// `None` when no angle below 45° changes the grid.
    pub bruteforce_deg: Option<f64>,
}

pub fn resolution_table(sizes: &[usize]) -> Result<Vec<ResolutionRow>> {
    sizes
        .par_iter()
        .map(|&n| {
            let formula_deg = angle_resolution(n)?;
            let bruteforce_deg = match smallest_effective_angle_bruteforce(n, BRUTEFORCE_STEP_DEG)? {
                SweepOutcome::Changed(a) => Some(a),
                SweepOutcome::NoChange => None,
            };
            Ok(ResolutionRow { n, formula_deg, bruteforce_deg })
        })
        .collect()
}

/// Brute-force column is left empty when nothing changes below 45°.
pub fn write_resolution_csv(out: impl Write, rows: &[ResolutionRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "formula_deg", "bruteforce_deg"])?;
    for r in rows {
        w.write_record([
            r.n.to_string(),
            r.formula_deg.to_string(),
            r.bruteforce_deg.map(|a| a.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| Error::Invalid(format!("writing resolution csv: {e}")))
}
