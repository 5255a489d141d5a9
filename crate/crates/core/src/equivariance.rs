//! Scene rotation, spherical masking and the two-term equivariance loss.
//!
//! For a pair of views `x1`, `x2` related by a relative camera pose, with an
//! inverse renderer `f` and a forward renderer `g`:
//!
//! * render loss: `‖x2 − g(R f(x1))‖₁ + ‖x1 − g(R⁻¹ f(x2))‖₁` (mean-ℓ1)
//! * scene loss:  `‖f(x2) − R f(x1)‖₂ + ‖f(x1) − R⁻¹ f(x2)‖₂` (root mean square)
//! * total:       `render + scene_weight · scene`

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::metrics::{l1_mean, rms, rms_diff};
use crate::resample::{resample_rotate3d, rotmat3_from_elev_azim};
use crate::shear::{shear_rotate3d, shear_unrotate3d};
use crate::tensor::{cubic_side, Element, Tensor};

pub const DEFAULT_SCENE_WEIGHT: f64 = 1e-4;

/// Fraction of the inscribed radius that stays inside the grid under every
/// shear rotation. The largest stretch of any partial shear product over
/// `[-45°, 45°]` is about 1.2284, and `1 / 1.2284 ≈ 0.814`.
pub const SAFE_MASK_RADIUS: f64 = 0.8;

/// Relative camera pose in degrees, applied to the scene as elevation first,
/// then azimuth.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RelativePose {
    pub d_azim: f64,
    pub d_elev: f64,
}

impl RelativePose {
    pub fn new(d_azim: f64, d_elev: f64) -> Self {
        RelativePose { d_azim, d_elev }
    }

    pub fn is_finite(&self) -> bool {
        self.d_azim.is_finite() && self.d_elev.is_finite()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RotationMethod {
    /// Exact permutation via three-shear rotations.
    Shear,
    /// Inverse warping with trilinear interpolation.
    Trilinear,
}

impl fmt::Display for RotationMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RotationMethod::Shear => "shear",
            RotationMethod::Trilinear => "trilinear",
        })
    }
}

impl FromStr for RotationMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shear" => Ok(RotationMethod::Shear),
            "trilinear" => Ok(RotationMethod::Trilinear),
            other => Err(Error::Invalid(format!("unknown rotation method {other:?}"))),
        }
    }
}

/// Keep-mask for an `n³` grid: `true` where the centred radius is at most
/// `radius_frac · (n − 1) / 2`.
pub fn sphere_mask(n: usize, radius_frac: f64) -> Result<Vec<bool>> {
    if !(radius_frac > 0.0 && radius_frac <= 1.0) {
        return Err(Error::Invalid(format!("mask radius fraction must be in (0, 1], got {radius_frac}")));
    }
    let c = (n as f64 - 1.0) / 2.0;
    let limit = radius_frac * c;
    let mut keep = Vec::with_capacity(n * n * n);
    for d in 0..n {
        for h in 0..n {
            for w in 0..n {
                let (x, y, z) = (d as f64 - c, h as f64 - c, w as f64 - c);
                keep.push((x * x + y * y + z * z).sqrt() <= limit);
            }
        }
    }
    Ok(keep)
}

/// Zeroes every voxel outside the centred ball of radius
/// `radius_frac · (n − 1) / 2`, in every channel.
pub fn spherical_mask<T: Element>(z: &Tensor<T>, radius_frac: f64) -> Result<Tensor<T>> {
    let n = cubic_side(z)?;
    let keep = sphere_mask(n, radius_frac)?;
    let mut out = z.clone();
    apply_keep_mask(out.data_mut(), &keep);
    Ok(out)
}

pub(crate) fn apply_keep_mask<T: Element>(data: &mut [T], keep: &[bool]) {
    for vol in data.chunks_exact_mut(keep.len()) {
        for (v, &k) in vol.iter_mut().zip(keep) {
            if !k {
                *v = T::zero();
            }
        }
    }
}

/// Rotates a scene by a relative pose (elevation, then azimuth).
pub fn rotate_scene<T: Element>(z: &Tensor<T>, pose: RelativePose, method: RotationMethod) -> Result<Tensor<T>> {
    check_pose(pose)?;
    match method {
        RotationMethod::Shear => shear_rotate3d(z, pose.d_elev, pose.d_azim),
        RotationMethod::Trilinear => resample_rotate3d(z, &rotmat3_from_elev_azim(pose.d_elev, pose.d_azim)),
    }
}

/// Inverse of [`rotate_scene`]: azimuth by `-d_azim`, then elevation by
/// `-d_elev`. Exact for the shear method.
pub fn unrotate_scene<T: Element>(z: &Tensor<T>, pose: RelativePose, method: RotationMethod) -> Result<Tensor<T>> {
    check_pose(pose)?;
    match method {
        RotationMethod::Shear => shear_unrotate3d(z, pose.d_elev, pose.d_azim),
        RotationMethod::Trilinear => {
            resample_rotate3d(z, &rotmat3_from_elev_azim(pose.d_elev, pose.d_azim).transpose())
        }
    }
}

fn check_pose(pose: RelativePose) -> Result<()> {
    if !pose.is_finite() {
        let bad = if pose.d_azim.is_finite() { pose.d_elev } else { pose.d_azim };
        return Err(Error::NonFiniteAngle(bad));
    }
    Ok(())
}

/// `l1(x2, g(z̃1)) + l1(x1, g(z̃2))`.
pub fn render_loss<T: Element>(x1: &Tensor<T>, x2: &Tensor<T>, g_of_z1r: &Tensor<T>, g_of_z2r: &Tensor<T>) -> Result<f64> {
    Ok(l1_mean(x2, g_of_z1r)? + l1_mean(x1, g_of_z2r)?)
}

/// `rms(f(x2) − z̃1) + rms(f(x1) − z̃2)`.
pub fn scene_loss<T: Element>(f_x2: &Tensor<T>, z1r: &Tensor<T>, f_x1: &Tensor<T>, z2r: &Tensor<T>) -> Result<f64> {
    Ok(rms_diff(f_x2, z1r)? + rms_diff(f_x1, z2r)?)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossBreakdown {
    pub l_render: f64,
    pub l_scene: f64,
    pub total: f64,
    pub scene_weight: f64,
}

/// Weighted sum of the render and scene terms.
pub fn total_loss(l_render: f64, l_scene: f64, scene_weight: f64) -> Result<LossBreakdown> {
    if !(scene_weight >= 0.0 && scene_weight.is_finite()) {
        return Err(Error::Invalid(format!("scene weight must be finite and >= 0, got {scene_weight}")));
    }
    Ok(LossBreakdown { l_render, l_scene, total: l_render + scene_weight * l_scene, scene_weight })
}

/// All six tensors of one pair evaluation, combined into a [`LossBreakdown`].
#[allow(clippy::too_many_arguments)]
pub fn pair_loss<T: Element>(
    x1: &Tensor<T>,
    x2: &Tensor<T>,
    g_of_z1r: &Tensor<T>,
    g_of_z2r: &Tensor<T>,
    f_x1: &Tensor<T>,
    f_x2: &Tensor<T>,
    z1r: &Tensor<T>,
    z2r: &Tensor<T>,
    scene_weight: f64,
) -> Result<LossBreakdown> {
    let l_render = render_loss(x1, x2, g_of_z1r, g_of_z2r)?;
    let l_scene = scene_loss(f_x2, z1r, f_x1, z2r)?;
    total_loss(l_render, l_scene, scene_weight)
}

/// `rms(R f(x) − f(R x)) / (rms(f(x)) + 1e-12)`.
///
/// `rotate_input` is the ground-truth view change, e.g. re-rendering a
/// synthetic scene from the rotated pose. Scene rotation uses the shear method.
pub fn equivariance_gap<X, F, G>(f: F, x: &X, pose: RelativePose, rotate_input: G) -> Result<f64>
where
    F: Fn(&X) -> Result<Tensor<f64>>,
    G: Fn(&X, RelativePose) -> Result<X>,
{
    let fx = f(x)?;
    let rotated_code = rotate_scene(&fx, pose, RotationMethod::Shear)?;
    let code_of_rotated = f(&rotate_input(x, pose)?)?;
    Ok(rms_diff(&rotated_code, &code_of_rotated)? / (rms(&fx) + 1e-12))
}
