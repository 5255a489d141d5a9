//! Scalar comparison metrics. All reductions are means, accumulated in `f64`
//! in index order.

use crate::error::Result;
use crate::tensor::{Element, Tensor};

/// PSNR reported for identical inputs.
pub const PSNR_CAP_DB: f64 = 99.0;

pub fn mse<T: Element>(a: &Tensor<T>, b: &Tensor<T>) -> Result<f64> {
    a.ensure_same_shape(b)?;
    Ok(mean_of(a, b, |d| d * d))
}

pub fn l1_mean<T: Element>(a: &Tensor<T>, b: &Tensor<T>) -> Result<f64> {
    a.ensure_same_shape(b)?;
    Ok(mean_of(a, b, f64::abs))
}

/// `max |a - b|`.
pub fn max_abs<T: Element>(a: &Tensor<T>, b: &Tensor<T>) -> Result<f64> {
    a.ensure_same_shape(b)?;
    Ok(a.data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| (to64(x) - to64(y)).abs())
        .fold(0.0, f64::max))
}

/// Root mean square difference, `sqrt(mse)`.
pub fn rms_diff<T: Element>(a: &Tensor<T>, b: &Tensor<T>) -> Result<f64> {
    mse(a, b).map(f64::sqrt)
}

pub fn rms<T: Element>(a: &Tensor<T>) -> f64 {
    let sum: f64 = a.data().iter().map(|&v| to64(v) * to64(v)).sum();
    (sum / a.len() as f64).sqrt()
}

/// PSNR in dB with peak value 1, capped at [`PSNR_CAP_DB`].
pub fn psnr<T: Element>(a: &Tensor<T>, b: &Tensor<T>) -> Result<f64> {
    Ok(psnr_from_mse(mse(a, b)?))
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse <= 0.0 {
        return PSNR_CAP_DB;
    }
    (10.0 * (1.0 / mse).log10()).min(PSNR_CAP_DB)
}

fn mean_of<T: Element>(a: &Tensor<T>, b: &Tensor<T>, f: impl Fn(f64) -> f64) -> f64 {
    let sum: f64 = a.data().iter().zip(b.data()).map(|(&x, &y)| f(to64(x) - to64(y))).sum();
    sum / a.len() as f64
}

fn to64<T: Element>(v: T) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;
    use proptest::prelude::*;

    fn t(data: Vec<f64>) -> Tensor<f64> {
        let n = data.len();
        Tensor::from_vec(vec![n], data).unwrap()
    }

    #[test]
    fn identical_is_capped() {
        let a = t(vec![0.1, 0.2, 0.3]);
        assert_eq!(mse(&a, &a).unwrap(), 0.0);
        assert_eq!(psnr(&a, &a).unwrap(), 99.0);
    }

    #[test]
    fn constant_offset() {
        let a = Tensor::<f64>::full(vec![4, 4], 0.3).unwrap();
        let b = Tensor::<f64>::full(vec![4, 4], 0.4).unwrap();
        assert!((mse(&a, &b).unwrap() - 0.01).abs() < 1e-15);
        assert!((psnr(&a, &b).unwrap() - 20.0).abs() < 1e-9);
    }

    #[test]
    fn swapped_pair() {
        let a = t(vec![0.0, 1.0]);
        let b = t(vec![1.0, 0.0]);
        assert_eq!(l1_mean(&a, &b).unwrap(), 1.0);
        assert_eq!(mse(&a, &b).unwrap(), 1.0);
        assert_eq!(max_abs(&a, &b).unwrap(), 1.0);
    }

    #[test]
    fn shape_mismatch() {
        let a = t(vec![0.0, 1.0]);
        let b = t(vec![0.0, 1.0, 2.0]);
        assert!(mse(&a, &b).is_err());
        assert!(l1_mean(&a, &b).is_err());
        assert!(psnr(&a, &b).is_err());
    }

    proptest! {
        #[test]
        fn symmetric_and_non_negative(seed in any::<u64>(), len in 1usize..64) {
            let mut rng = SplitMix64::new(seed);
            let a = t((0..len).map(|_| rng.next_f64()).collect());
            let b = t((0..len).map(|_| rng.next_f64()).collect());
            prop_assert_eq!(mse(&a, &b).unwrap(), mse(&b, &a).unwrap());
            prop_assert_eq!(l1_mean(&a, &b).unwrap(), l1_mean(&b, &a).unwrap());
            prop_assert_eq!(psnr(&a, &b).unwrap(), psnr(&b, &a).unwrap());
            prop_assert!(mse(&a, &b).unwrap() >= 0.0);
            prop_assert!(l1_mean(&a, &b).unwrap() >= 0.0);
            prop_assert_eq!(mse(&a, &a).unwrap(), 0.0);
        }
    }
}
