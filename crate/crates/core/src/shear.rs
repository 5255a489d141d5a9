//! Exactly invertible grid rotations built from three nearest-neighbour shears.
//!
//! A rotation by `θ` is split into a multiple of 90° (done by transposes and
//! flips) and a small angle in `[-45°, 45°]`. The small angle is realized as
//! column shear, row shear, column shear, each a per-line cyclic shift by a
//! rounded integer amount. Every stage is a permutation of cells, so the whole
//! rotation is a permutation and `rotate(-θ)` undoes `rotate(θ)` bit for bit.
//!
//! Coordinates: `x` is the centred row index (growing downwards) and `y` the
//! centred column index (growing rightwards), both in pixel units with pixel
//! centres on integers offset by `(n - 1) / 2`. Positive angles turn content
//! counter-clockwise as displayed, matching [`rot90_2d`] with `k = 1`.

use crate::angle::{cos_deg, sin_deg};
use crate::error::{Error, Result};
use crate::tensor::{cubic_side, square_side, Tensor};

/// Fractional parts this close to one half are treated as exact ties.
///
/// `sin(30°)` evaluates to `0.49999999999999994`; without this the plan for
/// 30° on a 3×3 grid would silently lose its ±1 row shifts.
const TIE_EPS: f64 = 1e-9;

/// Rounds to the nearest integer with ties away from zero. Odd: `f(-x) = -f(x)`.
pub fn round_half_away(x: f64) -> i64 {
    let ax = x.abs();
    let floor = ax.floor();
    let mag = if ax - floor >= 0.5 - TIE_EPS { floor + 1.0 } else { floor };
    let mag = mag as i64;
    if x < 0.0 {
        -mag
    } else {
        mag
    }
}

/// `θ ≡ coarse + small (mod 360)` with `coarse ∈ {0, 90, 180, 270}` and
/// `small ∈ [-45, 45]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AngleDecomposition {
    pub coarse: u32,
    pub small: f64,
}

impl AngleDecomposition {
    /// Number of counter-clockwise quarter turns.
    pub fn quarter_turns(&self) -> u32 {
        self.coarse / 90
    }
}

/// Splits an angle into quarter turns plus a small remainder.
///
/// The split is odd in `θ`: `decompose(-θ)` has the negated small angle and
/// the opposite quarter turns. Ties at `±45° (mod 90°)` therefore resolve
/// towards the sign of the reduced angle: 45° and 135° give a small angle of
/// −45°, while −45° and −135° give +45°.
pub fn decompose_angle(theta: f64) -> Result<AngleDecomposition> {
    if !theta.is_finite() {
        return Err(Error::NonFiniteAngle(theta));
    }
    // reduce |θ| to (-180, 180], then restore the sign
    let mut m = theta.abs() % 360.0;
    if m > 180.0 {
        m -= 360.0;
    }
    let q = (m / 90.0).round();
    let mut small = m - 90.0 * q;
    let mut q = q as i64;
    if theta < 0.0 {
        small = -small;
        q = -q;
    }
    if small == 0.0 {
        small = 0.0; // no negative zero
    }
    Ok(AngleDecomposition { coarse: (90 * q.rem_euclid(4)) as u32, small })
}

/// A rotation of an `n×n` plane stored as a gather map: `out[i] = in[src[i]]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlanePermutation {
    n: usize,
    src: Vec<u32>,
}

impl PlanePermutation {
    pub fn identity(n: usize) -> Self {
        PlanePermutation { n, src: (0..(n * n) as u32).collect() }
    }

    /// Gather map of [`shear_rotate2d`] on an `n×n` plane.
    pub fn shear_rotation(n: usize, theta: f64) -> Result<Self> {
        let idx: Vec<u32> = (0..(n * n) as u32).collect();
        Ok(PlanePermutation { n, src: shear_rotate_plane(&idx, n, theta)? })
    }

    pub fn rot90(n: usize, k: i64) -> Self {
        let idx: Vec<u32> = (0..(n * n) as u32).collect();
        PlanePermutation { n, src: rot90_plane(&idx, n, k) }
    }

    pub fn side(&self) -> usize {
        self.n
    }

    pub fn sources(&self) -> &[u32] {
        &self.src
    }

    pub fn is_identity(&self) -> bool {
        self.src.iter().enumerate().all(|(i, &s)| i as u32 == s)
    }

    pub fn inverse(&self) -> Self {
        let mut src = vec![0u32; self.src.len()];
        for (i, &s) in self.src.iter().enumerate() {
            src[s as usize] = i as u32;
        }
        PlanePermutation { n: self.n, src }
    }

    /// Applies the map to every plane of a `C×n×n` buffer.
    pub fn apply<T: Copy>(&self, data: &[T]) -> Vec<T> {
        let plane = self.n * self.n;
        debug_assert_eq!(data.len() % plane, 0);
        let mut out = Vec::with_capacity(data.len());
        for chunk in data.chunks_exact(plane) {
            out.extend(self.src.iter().map(|&s| chunk[s as usize]));
        }
        out
    }
}

/// Integer shifts realizing one small-angle shear rotation.
///
/// `shift_a[c]` moves column `c` vertically (stages 1 and 3), `shift_b[r]`
/// moves row `r` horizontally (stage 2). A cell at row `r` lands in row
/// `(r + shift) mod n`.
#[derive(Clone, Debug, PartialEq)]
pub struct ShearPlan {
    pub theta_small: f64,
    pub n: usize,
    pub shift_a: Vec<i64>,
    pub shift_b: Vec<i64>,
}

pub fn make_shear_plan(theta_small: f64, n: usize) -> Result<ShearPlan> {
    if !theta_small.is_finite() {
        return Err(Error::NonFiniteAngle(theta_small));
    }
    if theta_small.abs() > 45.0 {
        return Err(Error::AngleOutOfRange(theta_small));
    }
    if n == 0 {
        return Err(Error::Invalid("grid size must be at least 1".into()));
    }
    let half_tan = (theta_small.to_radians() / 2.0).tan();
    let sin = sin_deg(theta_small);
    let centre = (n as f64 - 1.0) / 2.0;
    let shift_a = (0..n).map(|c| round_half_away(-half_tan * (c as f64 - centre))).collect();
    let shift_b = (0..n).map(|r| round_half_away(sin * (r as f64 - centre))).collect();
    Ok(ShearPlan { theta_small, n, shift_a, shift_b })
}

impl ShearPlan {
    pub fn is_identity(&self) -> bool {
        self.shift_a.iter().chain(&self.shift_b).all(|&s| s == 0)
    }

    /// Column shear: cell `(r, c)` moves to `((r + shift_a[c]) mod n, c)`.
    fn shear_columns<T: Copy>(&self, g: &[T]) -> Vec<T> {
        let n = self.n;
        let mut out = g.to_vec();
        for (c, &s) in self.shift_a.iter().enumerate() {
            if s == 0 {
                continue;
            }
            for r in 0..n {
                let dst = wrap(r as i64 + s, n);
                out[dst * n + c] = g[r * n + c];
            }
        }
        out
    }

    /// Row shear: cell `(r, c)` moves to `(r, (c + shift_b[r]) mod n)`.
    fn shear_rows<T: Copy>(&self, g: &[T]) -> Vec<T> {
        let n = self.n;
        let mut out = g.to_vec();
        for (r, &s) in self.shift_b.iter().enumerate() {
            if s == 0 {
                continue;
            }
            for c in 0..n {
                let dst = wrap(c as i64 + s, n);
                out[r * n + dst] = g[r * n + c];
            }
        }
        out
    }

    /// Runs the three shear stages on one `n×n` plane.
    pub fn apply_plane<T: Copy>(&self, plane: &[T]) -> Vec<T> {
        let g = self.shear_columns(plane);
        let g = self.shear_rows(&g);
        self.shear_columns(&g)
    }
}

fn wrap(i: i64, n: usize) -> usize {
    i.rem_euclid(n as i64) as usize
}

/// Counter-clockwise quarter turn(s) of one plane: for `k = 1`,
/// `out[i][j] = in[j][n - 1 - i]`.
fn rot90_plane<T: Copy>(plane: &[T], n: usize, k: i64) -> Vec<T> {
    let mut cur = plane.to_vec();
    for _ in 0..k.rem_euclid(4) {
        let mut next = Vec::with_capacity(cur.len());
        for i in 0..n {
            for j in 0..n {
                next.push(cur[j * n + (n - 1 - i)]);
            }
        }
        cur = next;
    }
    cur
}

fn shear_rotate_plane<T: Copy>(plane: &[T], n: usize, theta: f64) -> Result<Vec<T>> {
    let dec = decompose_angle(theta)?;
    let plan = make_shear_plan(dec.small, n)?;
    // Quarter turns of 90° and 270° do not commute with the shear, so they go
    // on opposite sides: rotate(-θ) then mirrors rotate(θ) and undoes it
    // exactly. Half turns commute with the (odd-symmetric) shear.
    let k = dec.quarter_turns() as i64;
    Ok(match k {
        0 => plan.apply_plane(plane),
        1 | 2 => plan.apply_plane(&rot90_plane(plane, n, k)),
        _ => rot90_plane(&plan.apply_plane(plane), n, k),
    })
}

/// Rotates each channel of a `C×n×n` tensor by `k` counter-clockwise quarter turns.
pub fn rot90_2d<T: Copy>(t: &Tensor<T>, k: i64) -> Result<Tensor<T>> {
    let n = square_side(t)?;
    let perm = PlanePermutation::rot90(n, k);
    Tensor::from_vec(t.shape().to_vec(), perm.apply(t.data()))
}

/// Invertible rotation of every channel of a `C×n×n` tensor by `theta` degrees.
///
/// The output is a permutation of the input, and
/// `shear_rotate2d(shear_rotate2d(t, θ), -θ) == t` exactly.
pub fn shear_rotate2d<T: Copy>(t: &Tensor<T>, theta: f64) -> Result<Tensor<T>> {
    let n = square_side(t)?;
    let perm = PlanePermutation::shear_rotation(n, theta)?;
    Tensor::from_vec(t.shape().to_vec(), perm.apply(t.data()))
}

/// Which pair of axes of a `C×D×H×W` grid a plane rotation acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlabAxes {
    /// Rotates `(D, H)` planes at every width index (elevation).
    DepthHeight,
    /// Rotates `(D, W)` planes at every height index (azimuth).
    DepthWidth,
}

/// Applies a plane permutation to every slab of a cubic `C×n×n×n` buffer.
pub fn permute_slabs<T: Copy>(data: &[T], perm: &PlanePermutation, axes: SlabAxes) -> Vec<T> {
    let n = perm.side();
    let cube = n * n * n;
    debug_assert_eq!(data.len() % cube, 0);
    let mut out = Vec::with_capacity(data.len());
    for vol in data.chunks_exact(cube) {
        for d in 0..n {
            for h in 0..n {
                for w in 0..n {
                    let idx = match axes {
                        SlabAxes::DepthHeight => {
                            let s = perm.src[d * n + h] as usize;
                            (s / n) * n * n + (s % n) * n + w
                        }
                        SlabAxes::DepthWidth => {
                            let s = perm.src[d * n + w] as usize;
                            (s / n) * n * n + h * n + (s % n)
                        }
                    };
                    out.push(vol[idx]);
                }
            }
        }
    }
    out
}

/// Invertible 3D rotation: elevation about the width axis, then azimuth about
/// the height axis.
pub fn shear_rotate3d<T: Copy>(z: &Tensor<T>, elev: f64, azim: f64) -> Result<Tensor<T>> {
    let n = cubic_side(z)?;
    let e = PlanePermutation::shear_rotation(n, elev)?;
    let a = PlanePermutation::shear_rotation(n, azim)?;
    let out = permute_slabs(z.data(), &e, SlabAxes::DepthHeight);
    let out = permute_slabs(&out, &a, SlabAxes::DepthWidth);
    Tensor::from_vec(z.shape().to_vec(), out)
}

/// Exact inverse of [`shear_rotate3d`]: azimuth by `-azim`, then elevation by `-elev`.
pub fn shear_unrotate3d<T: Copy>(z: &Tensor<T>, elev: f64, azim: f64) -> Result<Tensor<T>> {
    let n = cubic_side(z)?;
    let a = PlanePermutation::shear_rotation(n, -azim)?;
    let e = PlanePermutation::shear_rotation(n, -elev)?;
    let out = permute_slabs(z.data(), &a, SlabAxes::DepthWidth);
    let out = permute_slabs(&out, &e, SlabAxes::DepthHeight);
    Tensor::from_vec(z.shape().to_vec(), out)
}

/// Smallest angle (degrees) that changes an `n×n` grid: `asin(1 / (n - 1))`.
pub fn angle_resolution(n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::Invalid(format!("angle resolution needs n >= 2, got {n}")));
    }
    Ok((1.0 / (n as f64 - 1.0)).asin().to_degrees())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SweepOutcome {
    /// First swept angle whose rotation moved the probe.
    Changed(f64),
    /// Nothing changed for any angle below 45°.
    NoChange,
}

/// Sweeps `step, 2·step, …` below 45° and reports the first angle at which
/// [`shear_rotate2d`] moves a single-pixel probe in the top-right corner.
pub fn smallest_effective_angle_bruteforce(n: usize, step: f64) -> Result<SweepOutcome> {
    if n < 2 {
        return Err(Error::Invalid(format!("sweep needs n >= 2, got {n}")));
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::Invalid(format!("sweep step must be positive, got {step}")));
    }
    let mut probe = vec![0.0f32; n * n];
    probe[n - 1] = 1.0;
    let probe = Tensor::from_vec(vec![1, n, n], probe)?;
    let mut i = 1u64;
    loop {
        let theta = i as f64 * step;
        if theta >= 45.0 - 1e-9 {
            return Ok(SweepOutcome::NoChange);
        }
        if shear_rotate2d(&probe, theta)? != probe {
            return Ok(SweepOutcome::Changed(theta));
        }
        i += 1;
    }
}

/// Forward point map of a counter-clockwise rotation in `(row, col)`
/// coordinates: `[[cos, -sin], [sin, cos]]`.
pub fn forward_matrix(theta: f64) -> [[f64; 2]; 2] {
    let (s, c) = (sin_deg(theta), cos_deg(theta));
    [[c, -s], [s, c]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;
    use proptest::prelude::*;

    fn grid(n: usize, channels: usize, seed: u64) -> Tensor<f32> {
        let mut rng = SplitMix64::new(seed);
        let data = (0..channels * n * n).map(|_| rng.next_f64() as f32).collect();
        Tensor::from_vec(vec![channels, n, n], data).unwrap()
    }

    fn cube(n: usize, channels: usize, seed: u64) -> Tensor<f32> {
        let mut rng = SplitMix64::new(seed);
        let data = (0..channels * n * n * n).map(|_| rng.next_f64() as f32).collect();
        Tensor::from_vec(vec![channels, n, n, n], data).unwrap()
    }

    fn sorted(t: &Tensor<f32>) -> Vec<u32> {
        let mut v: Vec<u32> = t.data().iter().map(|x| x.to_bits()).collect();
        v.sort_unstable();
        v
    }

    fn t2(rows: &[&[f32]]) -> Tensor<f32> {
        let n = rows.len();
        let data = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Tensor::from_vec(vec![1, n, n], data).unwrap()
    }

    #[test]
    fn rounding_is_odd() {
        assert_eq!(round_half_away(0.5), 1);
        assert_eq!(round_half_away(-0.5), -1);
        assert_eq!(round_half_away(0.49999999999999994), 1);
        assert_eq!(round_half_away(0.4999), 0);
        assert_eq!(round_half_away(-2.5), -3);
        assert_eq!(round_half_away(1.2), 1);
        assert_eq!(round_half_away(0.0), 0);
    }

    #[test]
    fn decomposition_examples() {
        let d = |t| decompose_angle(t).unwrap();
        assert_eq!(d(0.0), AngleDecomposition { coarse: 0, small: 0.0 });
        assert_eq!(d(100.0), AngleDecomposition { coarse: 90, small: 10.0 });
        assert_eq!(d(135.0), AngleDecomposition { coarse: 180, small: -45.0 });
        assert_eq!(d(45.0), AngleDecomposition { coarse: 90, small: -45.0 });
        assert_eq!(d(-45.0), AngleDecomposition { coarse: 270, small: 45.0 });
        assert_eq!(d(-100.0), AngleDecomposition { coarse: 270, small: -10.0 });
        assert_eq!(d(350.0), AngleDecomposition { coarse: 0, small: -10.0 });
        assert_eq!(d(720.0 + 91.0), AngleDecomposition { coarse: 90, small: 1.0 });
        assert!(matches!(decompose_angle(f64::NAN), Err(Error::NonFiniteAngle(_))));
        assert!(decompose_angle(f64::INFINITY).is_err());
    }

    proptest! {
        #[test]
        fn decomposition_sums_back(theta in -1000.0f64..1000.0) {
            let d = decompose_angle(theta).unwrap();
            prop_assert!((-45.0..=45.0).contains(&d.small));
            let diff = (d.coarse as f64 + d.small - theta).rem_euclid(360.0);
            prop_assert!(diff < 1e-9 || 360.0 - diff < 1e-9);
            let neg = decompose_angle(-theta).unwrap();
            prop_assert_eq!(neg.small, -d.small);
            prop_assert_eq!((neg.coarse + d.coarse) % 360, 0);
        }
    }

    #[test]
    fn rot90_examples() {
        let t = t2(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(rot90_2d(&t, 1).unwrap(), t2(&[&[2.0, 4.0], &[1.0, 3.0]]));
        assert_eq!(rot90_2d(&t, 4).unwrap(), t);
        let g = grid(5, 2, 1);
        let twice = rot90_2d(&rot90_2d(&g, 1).unwrap(), 1).unwrap();
        assert_eq!(rot90_2d(&g, 2).unwrap(), twice);
        assert_eq!(rot90_2d(&g, -1).unwrap(), rot90_2d(&g, 3).unwrap());
        let rect = Tensor::<f32>::zeros(vec![1, 2, 3]).unwrap();
        assert!(matches!(rot90_2d(&rect, 1), Err(Error::NotSquare(_))));
    }

    #[test]
    fn plan_examples() {
        let p = make_shear_plan(0.0, 7).unwrap();
        assert!(p.is_identity());
        // tan 15° = 0.26795 → |shift_a| < 0.5; sin 30° = 0.5 → ties go outward
        let p = make_shear_plan(30.0, 3).unwrap();
        assert_eq!(p.shift_a, vec![0, 0, 0]);
        assert_eq!(p.shift_b, vec![-1, 0, 1]);
        let q = make_shear_plan(-30.0, 3).unwrap();
        assert_eq!(q.shift_b, vec![1, 0, -1]);
        assert!(matches!(make_shear_plan(45.5, 8), Err(Error::AngleOutOfRange(_))));
        assert!(make_shear_plan(45.0, 8).is_ok());
    }

    proptest! {
        #[test]
        fn plan_is_odd(theta in -45.0f64..=45.0, n in 1usize..40) {
            let p = make_shear_plan(theta, n).unwrap();
            let q = make_shear_plan(-theta, n).unwrap();
            let neg = |v: &[i64]| v.iter().map(|s| -s).collect::<Vec<_>>();
            prop_assert_eq!(q.shift_a, neg(&p.shift_a));
            prop_assert_eq!(q.shift_b, neg(&p.shift_b));
        }
    }

    #[test]
    fn shear_examples() {
        let g = grid(6, 3, 2);
        assert_eq!(shear_rotate2d(&g, 0.0).unwrap(), g);

        let t = t2(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(shear_rotate2d(&t, 90.0).unwrap(), t2(&[&[2.0, 4.0], &[1.0, 3.0]]));

        let t = t2(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0], &[7.0, 8.0, 9.0]]);
        let want = t2(&[&[2.0, 3.0, 1.0], &[4.0, 5.0, 6.0], &[9.0, 7.0, 8.0]]);
        assert_eq!(shear_rotate2d(&t, 30.0).unwrap(), want);

        // 5° is below the 8×8 resolution of 8.21°
        let g = grid(8, 1, 3);
        assert_eq!(shear_rotate2d(&g, 5.0).unwrap(), g);
    }

    #[test]
    fn quarter_turns_match_rot90() {
        let g = grid(7, 2, 4);
        for k in -4i64..8 {
            assert_eq!(shear_rotate2d(&g, 90.0 * k as f64).unwrap(), rot90_2d(&g, k).unwrap(), "k={k}");
        }
    }

    #[test]
    fn round_trip_on_every_half_degree() {
        for n in [2usize, 3, 5, 8, 13] {
            let g = grid(n, 2, n as u64);
            for i in -720i32..=720 {
                let theta = i as f64 * 0.5;
                let back = shear_rotate2d(&shear_rotate2d(&g, theta).unwrap(), -theta).unwrap();
                assert_eq!(back, g, "n={n} theta={theta}");
            }
        }
    }

    #[test]
    fn rotation_is_not_additive() {
        // documented: composing two rotations is not the rotation by the sum
        let g = grid(16, 1, 5);
        let mut found = false;
        for a in 1..40 {
            let (a, b) = (a as f64, 17.0);
            let two = shear_rotate2d(&shear_rotate2d(&g, a).unwrap(), b).unwrap();
            if two != shear_rotate2d(&g, a + b).unwrap() {
                found = true;
                break;
            }
        }
        assert!(found);
    }

    #[test]
    fn sub_resolution_is_identity() {
        for n in 2..=40usize {
            let g = grid(n, 1, 11);
            let res = angle_resolution(n).unwrap().min(45.0);
            for frac in [0.1, 0.5, 0.9, 0.999] {
                let theta = res * frac;
                assert_eq!(shear_rotate2d(&g, theta).unwrap(), g, "n={n} theta={theta}");
                assert_eq!(shear_rotate2d(&g, -theta).unwrap(), g);
            }
        }
    }

    #[test]
    fn resolution_table() {
        let r = |n| angle_resolution(n).unwrap();
        assert!((r(8) - 8.21).abs() < 0.01);
        assert!((r(16) - 3.82).abs() < 0.01);
        assert!((r(32) - 1.85).abs() < 0.01);
        assert!((r(64) - 0.91).abs() < 0.01);
        assert_eq!(r(2), 90.0);
        assert!(angle_resolution(1).is_err());
    }

    #[test]
    fn bruteforce_matches_formula() {
        // min(asin x, 2 atan x) with x = 1/(n-1); the asin branch always wins
        for n in 2..=64usize {
            let x = 1.0 / (n as f64 - 1.0);
            let asin = x.asin().to_degrees();
            let two_atan = 2.0 * x.atan().to_degrees();
            let expected = asin.min(two_atan);
            assert_eq!(expected, asin);
            match smallest_effective_angle_bruteforce(n, 0.005).unwrap() {
                SweepOutcome::Changed(found) => {
                    assert!((found - expected).abs() <= 0.005 + 1e-9, "n={n}: {found} vs {expected}");
                    assert!((found - angle_resolution(n).unwrap()).abs() <= 0.005 + 1e-9);
                }
                SweepOutcome::NoChange => assert!(expected > 45.0, "n={n}"),
            }
        }
    }

    #[test]
    fn bruteforce_examples() {
        let at = |n| match smallest_effective_angle_bruteforce(n, 0.01).unwrap() {
            SweepOutcome::Changed(t) => t,
            SweepOutcome::NoChange => panic!("no change for n={n}"),
        };
        assert!((at(8) - 8.21).abs() <= 0.01 + 1e-9);
        assert!((at(16) - 3.82).abs() <= 0.01 + 1e-9);
        assert!((at(3) - 30.0).abs() <= 0.01 + 1e-9);
        assert_eq!(smallest_effective_angle_bruteforce(2, 0.01).unwrap(), SweepOutcome::NoChange);
        assert!(smallest_effective_angle_bruteforce(8, 0.0).is_err());
        assert!(smallest_effective_angle_bruteforce(1, 0.1).is_err());
    }

    #[test]
    fn three_d_identity_and_inverse() {
        let z = cube(8, 2, 21);
        assert_eq!(shear_rotate3d(&z, 0.0, 0.0).unwrap(), z);
        let r = shear_rotate3d(&z, 30.0, 45.0).unwrap();
        assert_ne!(r, z);
        assert_eq!(sorted(&r), sorted(&z));
        assert_eq!(shear_unrotate3d(&r, 30.0, 45.0).unwrap(), z);
        let bad = Tensor::<f32>::zeros(vec![1, 8, 8, 7]).unwrap();
        assert!(matches!(shear_rotate3d(&bad, 1.0, 1.0), Err(Error::NotCubic(_))));
    }

    #[test]
    fn elevation_fixes_width_index() {
        // content that varies only along W is untouched by elevation
        let n = 6;
        let mut data = vec![0.0f32; n * n * n];
        for (i, v) in data.iter_mut().enumerate() {
            *v = (i % n) as f32;
        }
        let z = Tensor::from_vec(vec![1, n, n, n], data).unwrap();
        for elev in [10.0, 33.0, 90.0, -170.0] {
            assert_eq!(shear_rotate3d(&z, elev, 0.0).unwrap(), z);
        }
        // and azimuth leaves content varying only along H alone
        let mut data = vec![0.0f32; n * n * n];
        for (i, v) in data.iter_mut().enumerate() {
            *v = ((i / n) % n) as f32;
        }
        let z = Tensor::from_vec(vec![1, n, n, n], data).unwrap();
        assert_eq!(shear_rotate3d(&z, 0.0, 61.0).unwrap(), z);
    }

    #[test]
    fn slab_rotation_matches_2d_rotation() {
        let n = 5;
        let z = cube(n, 1, 8);
        let r = shear_rotate3d(&z, 37.0, 0.0).unwrap();
        // extract the (D, H) slab at w = 2 and compare against shear_rotate2d
        let slab = |t: &Tensor<f32>| {
            let d: Vec<f32> = (0..n * n).map(|i| t.data()[(i / n) * n * n + (i % n) * n + 2]).collect();
            Tensor::from_vec(vec![1, n, n], d).unwrap()
        };
        assert_eq!(slab(&r), shear_rotate2d(&slab(&z), 37.0).unwrap());
    }

    #[test]
    fn permutation_helpers() {
        let p = PlanePermutation::shear_rotation(9, 23.0).unwrap();
        let inv = p.inverse();
        let q = PlanePermutation::shear_rotation(9, -23.0).unwrap();
        assert_eq!(inv, q);
        assert!(PlanePermutation::identity(4).is_identity());
        assert!(!p.is_identity());
    }

    #[test]
    fn forward_matrix_turns_top_to_left() {
        let m = forward_matrix(90.0);
        // top-centre (x=-1, y=0) goes to left-centre (x=0, y=-1)
        let p = [-1.0, 0.0];
        let q = [m[0][0] * p[0] + m[0][1] * p[1], m[1][0] * p[0] + m[1][1] * p[1]];
        assert_eq!(q, [0.0, -1.0]);
    }
}
