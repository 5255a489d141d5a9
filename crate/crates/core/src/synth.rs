//! Synthetic posed-view datasets.
//!
//! Scenes are 4-channel voxel grids (opacity, then RGB emission) built from
//! random Gaussian blobs. Views are front-to-back emission-absorption
//! projections along the depth axis. Pairs are produced by rotating the scene
//! with the same shear rotation the model uses, so every stored pair is
//! exactly consistent with the latent rotation operator.
//!
//! # Random draw order
//!
//! All randomness comes from [`SplitMix64`].
//!
//! * Scene `i` of a dataset with seed `s` uses the stream seeded with `s ^ i`.
//!   For each blob, in order: direction (3 normals, 6 draws), centre radius
//!   (1), three axis sigmas (3), three orientation angles (3), opacity scale
//!   (1), RGB colour (3).
//! * Pairs of scene `i` use the stream seeded with
//!   `derive_seed(s ^ i, PAIR_STREAM)`. For each pair, in order: base
//!   elevation, base azimuth, relative elevation, relative azimuth.

use std::fs;
use std::path::{Path, PathBuf};

use crate::codec::{pnm, tsr};
use crate::equivariance::{rotate_scene, spherical_mask, RelativePose, RotationMethod, SAFE_MASK_RADIUS};
use crate::error::{Error, Result};
use crate::resample::RotationMatrix3;
use crate::rng::{derive_seed, SplitMix64};
use crate::tensor::{cubic_side, Image, SceneTensor, Tensor};

/// Opacity plus RGB emission.
pub const SCENE_CHANNELS: usize = 4;

const PAIR_STREAM: u64 = 0x7061_6972; // "pair"

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SceneSpec {
    pub n: usize,
    pub num_blobs: usize,
    pub seed: u64,
}

/// Generates one masked blob scene of shape `4×n×n×n`.
pub fn gen_scene(spec: &SceneSpec) -> Result<SceneTensor> {
    let n = spec.n;
    if n < 8 {
        return Err(Error::Invalid(format!("scene grid must be at least 8, got {n}")));
    }
    if spec.num_blobs == 0 {
        return Err(Error::Invalid("a scene needs at least one blob".into()));
    }
    let mut rng = SplitMix64::new(spec.seed);
    let c = (n as f64 - 1.0) / 2.0;
    let safe = SAFE_MASK_RADIUS * c;

    struct Blob {
        centre: [f64; 3],
        inv_sigma: [f64; 3],
        axes: RotationMatrix3,
        scale: f64,
        colour: [f64; 3],
    }
    let blobs: Vec<Blob> = (0..spec.num_blobs)
        .map(|b| {
            let dir = unit_vector(&mut rng);
            // the first blob sits off-centre so no scene is rotationally symmetric
            let r = if b == 0 { rng.uniform(0.3, 0.6) } else { rng.uniform(0.0, 0.6) } * safe;
            let centre = [dir[0] * r, dir[1] * r, dir[2] * r];
            let mut inv_sigma = [0.0; 3];
            for s in &mut inv_sigma {
                *s = 1.0 / (rng.uniform(0.09, 0.2) * n as f64);
            }
            let (a, e, g) = (rng.uniform(0.0, 360.0), rng.uniform(0.0, 360.0), rng.uniform(0.0, 360.0));
            let axes = RotationMatrix3::azimuth(a) * RotationMatrix3::elevation(e) * RotationMatrix3::azimuth(g);
            let scale = rng.uniform(0.3, 1.0);
            let colour = [rng.next_f64(), rng.next_f64(), rng.next_f64()];
            Blob { centre, inv_sigma, axes, scale, colour }
        })
        .collect();

    let cube = n * n * n;
    let mut data = vec![0.0f32; SCENE_CHANNELS * cube];
    for d in 0..n {
        for h in 0..n {
            for w in 0..n {
                let p = [d as f64 - c, h as f64 - c, w as f64 - c];
                let mut density = 0.0;
                let mut rgb = [0.0; 3];
                for blob in &blobs {
                    let rel = [p[0] - blob.centre[0], p[1] - blob.centre[1], p[2] - blob.centre[2]];
                    let local = blob.axes.transpose().apply(rel);
                    let q: f64 = (0..3).map(|k| (local[k] * blob.inv_sigma[k]).powi(2)).sum();
                    let g = blob.scale * (-0.5 * q).exp();
                    density += g;
                    for (acc, c) in rgb.iter_mut().zip(blob.colour) {
                        *acc += g * c;
                    }
                }
                let i = (d * n + h) * n + w;
                data[i] = density.clamp(0.0, 1.0) as f32;
                if density > 0.0 {
                    for k in 0..3 {
                        data[(k + 1) * cube + i] = (rgb[k] / density).clamp(0.0, 1.0) as f32;
                    }
                }
            }
        }
    }
    let z = Tensor::from_vec(vec![SCENE_CHANNELS, n, n, n], data)?;
    spherical_mask(&z, SAFE_MASK_RADIUS)
}

fn unit_vector(rng: &mut SplitMix64) -> [f64; 3] {
    loop {
        let v = [rng.normal(), rng.normal(), rng.normal()];
        let len = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if len > 1e-9 {
            return [v[0] / len, v[1] / len, v[2] / len];
        }
    }
}

/// Front-to-back emission-absorption along depth (index 0 is nearest):
/// `out = Σ_d c_d · a_d · Π_{e<d} (1 − a_e)`, clamped to `[0, 1]`.
pub fn project_ortho(z: &SceneTensor) -> Result<Image> {
    let n = cubic_side(z)?;
    if z.shape()[0] != SCENE_CHANNELS {
        return Err(Error::InvalidShape {
            shape: z.shape().to_vec(),
            reason: format!("projection needs {SCENE_CHANNELS} channels (opacity + RGB)"),
        });
    }
    let cube = n * n * n;
    let plane = n * n;
    let data = z.data();
    let mut out = vec![0.0f32; 3 * plane];
    for p in 0..plane {
        let mut transmittance = 1.0f64;
        let mut acc = [0.0f64; 3];
        for d in 0..n {
            let i = d * plane + p;
            let a = f64::from(data[i]);
            if a != 0.0 {
                for (k, v) in acc.iter_mut().enumerate() {
                    *v += f64::from(data[(k + 1) * cube + i]) * a * transmittance;
                }
                transmittance *= 1.0 - a;
            }
        }
        for k in 0..3 {
            out[k * plane + p] = acc[k].clamp(0.0, 1.0) as f32;
        }
    }
    Image::from_vec(vec![3, n, n], out)
}

/// Nearest-neighbour upsampling of every channel by an integer factor.
pub fn upsample_nearest<T: Copy>(img: &Tensor<T>, factor: usize) -> Result<Tensor<T>> {
    let (c, h, w) = match img.shape() {
        [c, h, w] => (*c, *h, *w),
        s => return Err(Error::InvalidShape { shape: s.to_vec(), reason: "expected C×H×W".into() }),
    };
    if factor == 0 {
        return Err(Error::Invalid("upsampling factor must be positive".into()));
    }
    let (oh, ow) = (h * factor, w * factor);
    let mut out = Vec::with_capacity(c * oh * ow);
    for ch in img.data().chunks_exact(h * w) {
        for i in 0..oh {
            for j in 0..ow {
                out.push(ch[(i / factor) * w + j / factor]);
            }
        }
    }
    Tensor::from_vec(vec![c, oh, ow], out)
}

/// Projects a scene and upsamples the view to `image_size × image_size`.
pub fn render_view(z: &SceneTensor, image_size: usize) -> Result<Image> {
    let n = cubic_side(z)?;
    if !image_size.is_multiple_of(n) {
        return Err(Error::Invalid(format!("image size {image_size} is not a multiple of scene size {n}")));
    }
    upsample_nearest(&project_ortho(z)?, image_size / n)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainSample {
    pub x1: Image,
    pub x2: Image,
    pub pose: RelativePose,
}

/// A training pair together with the rotated scene `z1` that produced `x1`.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratedPair {
    pub z1: SceneTensor,
    pub sample: TrainSample,
}

/// Draws a base orientation and a relative pose, and renders both views.
pub fn make_pair(scene: &SceneTensor, rng: &mut SplitMix64, image_size: usize) -> Result<GeneratedPair> {
    let elev0 = rng.uniform(-60.0, 60.0);
    let azim0 = rng.uniform(0.0, 360.0);
    let d_elev = rng.uniform(-60.0, 60.0);
    let d_azim = rng.uniform(-180.0, 180.0);
    let pose = RelativePose::new(d_azim, d_elev);
    let z1 = rotate_scene(scene, RelativePose::new(azim0, elev0), RotationMethod::Shear)?;
    let z2 = rotate_scene(&z1, pose, RotationMethod::Shear)?;
    let x1 = render_view(&z1, image_size)?;
    let x2 = render_view(&z2, image_size)?;
    Ok(GeneratedPair { z1, sample: TrainSample { x1, x2, pose } })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DatasetConfig {
    pub num_scenes: usize,
    pub pairs_per_scene: usize,
    /// Scene grid size `n`.
    pub scene_size: usize,
    pub image_size: usize,
    pub num_blobs: usize,
    pub seed: u64,
    /// Also write `x1.ppm` / `x2.ppm` next to the tensors.
    pub export_ppm: bool,
}

impl Default for DatasetConfig {
    /// The reference dataset: 64 scenes × 8 pairs, 8³ scenes, 16×16 views.
    fn default() -> Self {
        DatasetConfig {
            num_scenes: 64,
            pairs_per_scene: 8,
            scene_size: 8,
            image_size: 16,
            num_blobs: 3,
            seed: 0,
            export_ppm: false,
        }
    }
}

impl DatasetConfig {
    pub fn scene_spec(&self, scene: usize) -> SceneSpec {
        SceneSpec { n: self.scene_size, num_blobs: self.num_blobs, seed: self.seed ^ scene as u64 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetEntry {
    pub scene: usize,
    pub pair: usize,
    pub z1: SceneTensor,
    pub sample: TrainSample,
}

/// Generates all pairs of one scene, in draw order.
pub fn scene_pairs(config: &DatasetConfig, scene: usize) -> Result<Vec<DatasetEntry>> {
    let spec = config.scene_spec(scene);
    let z = gen_scene(&spec)?;
    let mut rng = SplitMix64::new(derive_seed(spec.seed, PAIR_STREAM));
    (0..config.pairs_per_scene)
        .map(|pair| {
            let g = make_pair(&z, &mut rng, config.image_size)?;
            Ok(DatasetEntry { scene, pair, z1: g.z1, sample: g.sample })
        })
        .collect()
}

/// Generates the whole dataset in memory, ordered by scene then pair.
pub fn generate_dataset(config: &DatasetConfig) -> Result<Vec<DatasetEntry>> {
    let mut all = Vec::with_capacity(config.num_scenes * config.pairs_per_scene);
    for scene in 0..config.num_scenes {
        all.extend(scene_pairs(config, scene)?);
    }
    Ok(all)
}

pub fn pair_dir(root: &Path, scene: usize, pair: usize) -> PathBuf {
    root.join(format!("scene_{scene}")).join(format!("pair_{pair}"))
}

pub const MANIFEST_FILE: &str = "manifest.csv";
pub const POSE_FILE: &str = "pose.csv";

/// Writes the dataset tree and returns the manifest rows (relative pair directories).
///
/// ```text
/// out/manifest.csv                 scene,pair,dir,d_azim_deg,d_elev_deg
/// out/scene_{i}/pair_{j}/x1.tsr
/// out/scene_{i}/pair_{j}/x2.tsr
/// out/scene_{i}/pair_{j}/z1.tsr    scene behind x1
/// out/scene_{i}/pair_{j}/pose.csv  d_azim_deg,d_elev_deg
/// ```
pub fn write_dataset(out_dir: impl AsRef<Path>, config: &DatasetConfig) -> Result<Vec<String>> {
    let root = out_dir.as_ref();
    fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    let mut manifest = csv::Writer::from_path(root.join(MANIFEST_FILE))?;
    manifest.write_record(["scene", "pair", "dir", "d_azim_deg", "d_elev_deg"])?;
    let mut rows = Vec::new();
    for scene in 0..config.num_scenes {
        for entry in scene_pairs(config, scene)? {
            let dir = pair_dir(root, entry.scene, entry.pair);
            fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            tsr::write(&entry.sample.x1, dir.join("x1.tsr"))?;
            tsr::write(&entry.sample.x2, dir.join("x2.tsr"))?;
            tsr::write(&entry.z1, dir.join("z1.tsr"))?;
            write_pose(&dir.join(POSE_FILE), entry.sample.pose)?;
            if config.export_ppm {
                pnm::write(&entry.sample.x1, dir.join("x1.ppm"))?;
                pnm::write(&entry.sample.x2, dir.join("x2.ppm"))?;
            }
            let rel = format!("scene_{}/pair_{}", entry.scene, entry.pair);
            let pose = entry.sample.pose;
            manifest.write_record([
                entry.scene.to_string(),
                entry.pair.to_string(),
                rel.clone(),
                pose.d_azim.to_string(),
                pose.d_elev.to_string(),
            ])?;
            rows.push(rel);
        }
    }
    manifest.flush().map_err(|e| Error::io(root.join(MANIFEST_FILE), e))?;
    Ok(rows)
}

pub fn write_pose(path: &Path, pose: RelativePose) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["d_azim_deg", "d_elev_deg"])?;
    w.write_record([pose.d_azim.to_string(), pose.d_elev.to_string()])?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_pose(path: &Path) -> Result<RelativePose> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["d_azim_deg", "d_elev_deg"] {
        return Err(Error::Invalid(format!("{}: unexpected pose header {headers:?}", path.display())));
    }
    let row = r
        .records()
        .next()
        .ok_or_else(|| Error::Invalid(format!("{}: missing pose row", path.display())))??;
    Ok(RelativePose::new(parse_f64(&row[0], path)?, parse_f64(&row[1], path)?))
}

fn parse_f64(s: &str, path: &Path) -> Result<f64> {
    s.trim().parse().map_err(|_| Error::Invalid(format!("{}: bad number {s:?}", path.display())))
}

/// Loads every pair listed in `manifest.csv`, in manifest order.
pub fn read_dataset(dir: impl AsRef<Path>) -> Result<Vec<DatasetEntry>> {
    let root = dir.as_ref();
    let mut r = csv::Reader::from_path(root.join(MANIFEST_FILE))?;
    let mut out = Vec::new();
    for row in r.records() {
        let row = row?;
        let bad = || Error::Invalid(format!("bad manifest row {row:?}"));
        let scene = row.get(0).and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        let pair = row.get(1).and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        let pdir = root.join(row.get(2).ok_or_else(bad)?);
        let sample = TrainSample {
            x1: tsr::read(pdir.join("x1.tsr"))?,
            x2: tsr::read(pdir.join("x2.tsr"))?,
            pose: read_pose(&pdir.join(POSE_FILE))?,
        };
        out.push(DatasetEntry { scene, pair, z1: tsr::read(pdir.join("z1.tsr"))?, sample });
    }
    if out.is_empty() {
        return Err(Error::Invalid(format!("{}: dataset is empty", root.display())));
    }
    Ok(out)
}
