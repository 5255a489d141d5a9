//! Interpolated (non-invertible) rotations by inverse warping.
//!
//! Every output cell centre is mapped back into the input with the inverse
//! rotation and sampled bilinearly (2D) or trilinearly (3D). Samples outside
//! the grid read as zero. Arithmetic is done in `f64`.

use std::ops::Mul;

use crate::angle::{cos_deg, sin_deg};
use crate::error::{Error, Result};
use crate::tensor::{cubic_side, square_side, Element, Tensor};

/// Tolerance for accepting a matrix as a rotation.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

/// `[[cos θ, sin θ], [-sin θ, cos θ]]`.
///
/// In `(row, col)` coordinates this is the pull-back of a counter-clockwise
/// turn: it maps an output position to the input position it reads from.
/// The forward point map is its transpose.
pub fn rotmat2(theta: f64) -> [[f64; 2]; 2] {
    let (s, c) = (sin_deg(theta), cos_deg(theta));
    [[c, s], [-s, c]]
}

/// A 3×3 rotation acting on `(depth, height, width)` coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RotationMatrix3(pub [[f64; 3]; 3]);

impl RotationMatrix3 {
    pub const IDENTITY: RotationMatrix3 = RotationMatrix3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    /// Checks orthogonality and unit determinant within [`ROTATION_TOLERANCE`].
    pub fn new(m: [[f64; 3]; 3]) -> Result<Self> {
        let r = RotationMatrix3(m);
        let err = r.orthogonality_error();
        if err.is_nan() || err > ROTATION_TOLERANCE {
            return Err(Error::NotARotation(err));
        }
        Ok(r)
    }

    /// Elevation: counter-clockwise turn of the `(D, H)` plane, width fixed.
    pub fn elevation(theta: f64) -> Self {
        let (s, c) = (sin_deg(theta), cos_deg(theta));
        RotationMatrix3([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    }

    /// Azimuth: counter-clockwise turn of the `(D, W)` plane, height fixed.
    pub fn azimuth(phi: f64) -> Self {
        let (s, c) = (sin_deg(phi), cos_deg(phi));
        RotationMatrix3([[c, 0.0, -s], [0.0, 1.0, 0.0], [s, 0.0, c]])
    }

    pub fn transpose(&self) -> Self {
        let m = &self.0;
        let mut t = [[0.0; 3]; 3];
        for (i, row) in t.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = m[j][i];
            }
        }
        RotationMatrix3(t)
    }

    pub fn apply(&self, p: [f64; 3]) -> [f64; 3] {
        let m = &self.0;
        [
            m[0][0] * p[0] + m[0][1] * p[1] + m[0][2] * p[2],
            m[1][0] * p[0] + m[1][1] * p[1] + m[1][2] * p[2],
            m[2][0] * p[0] + m[2][1] * p[1] + m[2][2] * p[2],
        ]
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// `max(|RᵀR − I|_max, |det R − 1|)`.
    pub fn orthogonality_error(&self) -> f64 {
        let p = self.transpose() * *self;
        let mut err = (self.determinant() - 1.0).abs();
        for i in 0..3 {
            for j in 0..3 {
                let id = if i == j { 1.0 } else { 0.0 };
                err = err.max((p.0[i][j] - id).abs());
            }
        }
        err
    }
}

impl Mul for RotationMatrix3 {
    type Output = RotationMatrix3;

    fn mul(self, rhs: RotationMatrix3) -> RotationMatrix3 {
        let (a, b) = (&self.0, &rhs.0);
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..3).map(|k| a[i][k] * b[k][j]).sum();
            }
        }
        RotationMatrix3(out)
    }
}

/// Forward map of elevation followed by azimuth: `A(azim) · E(elev)`.
pub fn rotmat3_from_elev_azim(elev: f64, azim: f64) -> RotationMatrix3 {
    RotationMatrix3::azimuth(azim) * RotationMatrix3::elevation(elev)
}

/// Linear interpolation taps along one axis: up to two `(index, weight)` pairs
/// with in-range indices.
fn taps(coord: f64, n: usize) -> [(usize, f64); 2] {
    let base = coord.floor();
    let frac = coord - base;
    let i0 = base as i64;
    let tap = |i: i64, w: f64| if i >= 0 && (i as usize) < n { (i as usize, w) } else { (0, 0.0) };
    [tap(i0, 1.0 - frac), tap(i0 + 1, frac)]
}

/// Bilinear inverse-warp rotation of every channel of a `C×n×n` tensor.
pub fn resample_rotate2d<T: Element>(t: &Tensor<T>, theta: f64) -> Result<Tensor<T>> {
    if !theta.is_finite() {
        return Err(Error::NonFiniteAngle(theta));
    }
    let n = square_side(t)?;
    let m = rotmat2(theta);
    let centre = (n as f64 - 1.0) / 2.0;
    let plane = n * n;
    // taps for each output site, shared by all channels
    let mut sites = Vec::with_capacity(plane);
    for i in 0..n {
        for j in 0..n {
            let (x, y) = (i as f64 - centre, j as f64 - centre);
            let sx = m[0][0] * x + m[0][1] * y + centre;
            let sy = m[1][0] * x + m[1][1] * y + centre;
            sites.push((taps(sx, n), taps(sy, n)));
        }
    }
    let mut out = Vec::with_capacity(t.len());
    for chan in t.data().chunks_exact(plane) {
        for (tx, ty) in &sites {
            let mut acc = 0.0f64;
            for &(r, wr) in tx {
                for &(c, wc) in ty {
                    let w = wr * wc;
                    if w != 0.0 {
                        acc += w * chan[r * n + c].to_f64().unwrap_or(f64::NAN);
                    }
                }
            }
            out.push(T::from(acc).expect("float cast"));
        }
    }
    Tensor::from_vec(t.shape().to_vec(), out)
}

/// Trilinear inverse-warp rotation of a cubic `C×n×n×n` tensor.
///
/// `r` is the forward point map; each output site reads from `rᵀ · p`.
pub fn resample_rotate3d<T: Element>(z: &Tensor<T>, r: &RotationMatrix3) -> Result<Tensor<T>> {
    let n = cubic_side(z)?;
    let err = r.orthogonality_error();
    if err.is_nan() || err > ROTATION_TOLERANCE {
        return Err(Error::NotARotation(err));
    }
    let back = r.transpose();
    let centre = (n as f64 - 1.0) / 2.0;
    let cube = n * n * n;
    let mut sites = Vec::with_capacity(cube);
    for d in 0..n {
        for h in 0..n {
            for w in 0..n {
                let p = [d as f64 - centre, h as f64 - centre, w as f64 - centre];
                let s = back.apply(p);
                sites.push([taps(s[0] + centre, n), taps(s[1] + centre, n), taps(s[2] + centre, n)]);
            }
        }
    }
    let mut out = Vec::with_capacity(z.len());
    for vol in z.data().chunks_exact(cube) {
        for [td, th, tw] in &sites {
            let mut acc = 0.0f64;
            for &(d, wd) in td {
                for &(h, wh) in th {
                    for &(w, ww) in tw {
                        let wt = wd * wh * ww;
                        if wt != 0.0 {
                            acc += wt * vol[(d * n + h) * n + w].to_f64().unwrap_or(f64::NAN);
                        }
                    }
                }
            }
            out.push(T::from(acc).expect("float cast"));
        }
    }
    Tensor::from_vec(z.shape().to_vec(), out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::l1_mean;
    use crate::rng::SplitMix64;
    use crate::shear::{forward_matrix, rot90_2d, shear_rotate2d, shear_rotate3d};

    fn grid(n: usize, channels: usize, seed: u64) -> Tensor<f32> {
        let mut rng = SplitMix64::new(seed);
        let data = (0..channels * n * n).map(|_| rng.next_f64() as f32).collect();
        Tensor::from_vec(vec![channels, n, n], data).unwrap()
    }

    fn cube(n: usize, seed: u64) -> Tensor<f64> {
        let mut rng = SplitMix64::new(seed);
        let data = (0..n * n * n).map(|_| rng.next_f64()).collect();
        Tensor::from_vec(vec![1, n, n, n], data).unwrap()
    }

    /// Smooth test pattern: a sum of low-frequency cosines.
    fn smooth(n: usize) -> Tensor<f32> {
        let c = (n as f64 - 1.0) / 2.0;
        let mut data = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let (x, y) = ((i as f64 - c) / n as f64, (j as f64 - c) / n as f64);
                data.push((0.5 + 0.25 * (5.0 * x + 1.0).cos() * (3.0 * y).sin() + 0.2 * x) as f32);
            }
        }
        Tensor::from_vec(vec![1, n, n], data).unwrap()
    }

    #[test]
    fn rotmat2_examples() {
        assert_eq!(rotmat2(0.0), [[1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(rotmat2(90.0), [[0.0, 1.0], [-1.0, 0.0]]);
        // the pull-back is the transpose of the forward map
        let (p, f) = (rotmat2(33.0), forward_matrix(33.0));
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(p[i][j], f[j][i]);
            }
        }
    }

    #[test]
    fn rotmat3_properties() {
        let e = rotmat3_from_elev_azim(30.0, 0.0);
        assert_eq!(e, RotationMatrix3::elevation(30.0));
        assert_eq!(e.0[2], [0.0, 0.0, 1.0]);
        let a = rotmat3_from_elev_azim(0.0, 45.0);
        assert_eq!(a.0[1], [0.0, 1.0, 0.0]);
        let r = rotmat3_from_elev_azim(30.0, 45.0);
        let p = r * r.transpose();
        for i in 0..3 {
            for j in 0..3 {
                let id = if i == j { 1.0 } else { 0.0 };
                assert!((p.0[i][j] - id).abs() < 1e-12);
            }
        }
        assert!((r.determinant() - 1.0).abs() < 1e-12);
        assert!(RotationMatrix3::new([[1.0, 0.1, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]).is_err());
        assert!(RotationMatrix3::new([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, -1.0]]).is_err());
    }

    #[test]
    fn identity_and_quarter_turns_are_exact() {
        let g = grid(9, 2, 1);
        assert_eq!(resample_rotate2d(&g, 0.0).unwrap(), g);
        for k in 0..4 {
            let theta = 90.0 * k as f64;
            assert_eq!(resample_rotate2d(&g, theta).unwrap(), rot90_2d(&g, k).unwrap(), "k={k}");
        }
        let g = grid(8, 1, 2);
        assert_eq!(resample_rotate2d(&g, 90.0).unwrap(), rot90_2d(&g, 1).unwrap());
        assert!(resample_rotate2d(&Tensor::<f32>::zeros(vec![1, 3, 4]).unwrap(), 10.0).is_err());
    }

    #[test]
    fn turns_the_same_way_as_the_shear() {
        let img = smooth(33);
        let shear = shear_rotate2d(&img, 20.0).unwrap();
        let same = l1_mean(&shear, &resample_rotate2d(&img, 20.0).unwrap()).unwrap();
        let opposite = l1_mean(&shear, &resample_rotate2d(&img, -20.0).unwrap()).unwrap();
        assert!(same < 0.5 * opposite, "{same} vs {opposite}");
    }

    #[test]
    fn round_trip_loses_information() {
        let g = grid(32, 1, 4);
        let back = resample_rotate2d(&resample_rotate2d(&g, 20.0).unwrap(), -20.0).unwrap();
        assert!(l1_mean(&back, &g).unwrap() > 1e-3);
    }

    #[test]
    fn linear_in_the_input() {
        let u = grid(12, 2, 5).cast::<f64>();
        let v = grid(12, 2, 6).cast::<f64>();
        let (a, b) = (0.7, -1.3);
        let mix = u.zip_map(&v, |x, y| a * x + b * y).unwrap();
        let lhs = resample_rotate2d(&mix, 27.0).unwrap();
        let ru = resample_rotate2d(&u, 27.0).unwrap();
        let rv = resample_rotate2d(&v, 27.0).unwrap();
        let rhs = ru.zip_map(&rv, |x, y| a * x + b * y).unwrap();
        for (l, r) in lhs.data().iter().zip(rhs.data()) {
            assert!((l - r).abs() <= 1e-6 * (1.0 + r.abs()));
        }

        let (u3, v3) = (cube(7, 7), cube(7, 8));
        let r = rotmat3_from_elev_azim(17.0, -40.0);
        let mix = u3.zip_map(&v3, |x, y| a * x + b * y).unwrap();
        let lhs = resample_rotate3d(&mix, &r).unwrap();
        let rhs = resample_rotate3d(&u3, &r)
            .unwrap()
            .zip_map(&resample_rotate3d(&v3, &r).unwrap(), |x, y| a * x + b * y)
            .unwrap();
        for (l, r) in lhs.data().iter().zip(rhs.data()) {
            assert!((l - r).abs() <= 1e-6 * (1.0 + r.abs()));
        }
    }

    #[test]
    fn three_d_identity_and_lattice_turn() {
        let z = cube(6, 9);
        assert_eq!(resample_rotate3d(&z, &RotationMatrix3::IDENTITY).unwrap(), z);

        let n = 5;
        let mut one_hot = Tensor::<f64>::zeros(vec![1, n, n, n]).unwrap();
        let at = |d: usize, h: usize, w: usize| (d * n + h) * n + w;
        one_hot.data_mut()[at(0, 1, 3)] = 1.0;
        let rotated = resample_rotate3d(&one_hot, &RotationMatrix3::azimuth(90.0)).unwrap();
        // forward azimuth 90°: (d, w) centred -> (-w, d)
        let c = 2i64;
        let (d, w) = (0i64 - c, 3i64 - c);
        let (d2, w2) = ((-w + c) as usize, (d + c) as usize);
        let mut expected = Tensor::<f64>::zeros(vec![1, n, n, n]).unwrap();
        expected.data_mut()[at(d2, 1, w2)] = 1.0;
        assert_eq!(rotated, expected);
        // and agrees with the shear path
        assert_eq!(shear_rotate3d(&one_hot, 0.0, 90.0).unwrap(), expected);
    }

    #[test]
    fn quarter_turn_poses_agree_with_shear() {
        let z = cube(6, 10);
        for (e, a) in [(90.0, 0.0), (0.0, 90.0), (90.0, 180.0), (-90.0, 270.0), (180.0, -90.0)] {
            let r = rotmat3_from_elev_azim(e, a);
            assert_eq!(resample_rotate3d(&z, &r).unwrap(), shear_rotate3d(&z, e, a).unwrap(), "({e}, {a})");
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let z = cube(4, 1);
        let skew = RotationMatrix3([[1.0, 0.2, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        assert!(matches!(resample_rotate3d(&z, &skew), Err(Error::NotARotation(_))));
        let slab = Tensor::<f64>::zeros(vec![1, 4, 4, 3]).unwrap();
        assert!(matches!(resample_rotate3d(&slab, &RotationMatrix3::IDENTITY), Err(Error::NotCubic(_))));
    }

    #[test]
    fn weights_sum_to_at_most_one() {
        let n = 10;
        let ones = Tensor::<f64>::full(vec![1, n, n, n], 1.0).unwrap();
        let out = resample_rotate3d(&ones, &rotmat3_from_elev_azim(23.0, 71.0)).unwrap();
        let c = (n as f64 - 1.0) / 2.0;
        for d in 0..n {
            for h in 0..n {
                for w in 0..n {
                    let v = out.data()[(d * n + h) * n + w];
                    assert!((-1e-12..=1.0 + 1e-12).contains(&v));
                    let r = ((d as f64 - c).powi(2) + (h as f64 - c).powi(2) + (w as f64 - c).powi(2)).sqrt();
                    if r < c - 1.0 {
                        assert!((v - 1.0).abs() < 1e-12);
                    }
                }
            }
        }
    }
}
