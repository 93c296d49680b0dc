//! Piecewise-linear interpolation and seeded Gaussian perturbation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Piecewise-linear interpolation over strictly increasing knots.
/// Queries outside the knot range clamp to the nearest endpoint value.
pub fn interp1(xs: &[f64], ys: &[f64], xq: &[f64]) -> Result<Vec<f64>> {
    if xs.is_empty() {
        return Err(Error::Interp("no knots".into()));
    }
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            expected: xs.len(),
            got: ys.len(),
        });
    }
    if !xs.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::Interp("knot positions not strictly increasing".into()));
    }
    let yq = xq
        .iter()
        .map(|&x| {
            if x <= xs[0] {
                ys[0]
            } else if x >= xs[xs.len() - 1] {
                ys[ys.len() - 1]
            } else {
                let i = xs.partition_point(|&k| k <= x) - 1;
                let (x0, x1) = (xs[i], xs[i + 1]);
                let (y0, y1) = (ys[i], ys[i + 1]);
                y0 + (x - x0) / (x1 - x0) * (y1 - y0)
            }
        })
        .collect();
    Ok(yq)
}

/// Add i.i.d. Normal(0, sigma^2) noise from a seeded stream.
/// `sigma == 0` returns the input unchanged.
pub fn add_gaussian_noise(values: &[f64], sigma: f64, seed: u64) -> Result<Vec<f64>> {
    if !(sigma >= 0.0) {
        return Err(Error::InvalidParam(format!("noise sigma must be >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(values.to_vec());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).expect("sigma checked above");
    Ok(values.iter().map(|v| v + normal.sample(&mut rng)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midpoint_of_segment() {
        let y = interp1(&[0.0, 10.0], &[1.0, 3.0], &[5.0]).unwrap();
        assert_eq!(y, vec![2.0]);
    }

    #[test]
    fn knot_hit_is_exact() {
        let y = interp1(&[0.0, 10.0], &[1.0, 3.0], &[0.0, 10.0]).unwrap();
        assert_eq!(y, vec![1.0, 3.0]);
    }

    #[test]
    fn out_of_range_clamps() {
        let y = interp1(&[0.0, 10.0], &[1.0, 3.0], &[-5.0, 25.0]).unwrap();
        assert_eq!(y, vec![1.0, 3.0]);
    }

    #[test]
    fn rejects_bad_knots() {
        assert!(interp1(&[], &[], &[0.0]).is_err());
        assert!(interp1(&[1.0, 1.0], &[0.0, 0.0], &[0.0]).is_err());
        assert!(interp1(&[2.0, 1.0], &[0.0, 0.0], &[0.0]).is_err());
    }

    #[test]
    fn noise_sigma_zero_is_identity() {
        let v = vec![1.0, 2.0, 3.0];
        assert_eq!(add_gaussian_noise(&v, 0.0, 42).unwrap(), v);
    }

    #[test]
    fn noise_is_deterministic_per_seed() {
        let v = vec![0.0; 32];
        let a = add_gaussian_noise(&v, 1.0, 7).unwrap();
        let b = add_gaussian_noise(&v, 1.0, 7).unwrap();
        let c = add_gaussian_noise(&v, 1.0, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn noise_moments() {
        let v = vec![0.0; 100_000];
        let out = add_gaussian_noise(&v, 1.0, 1234).unwrap();
        let mean = out.iter().sum::<f64>() / out.len() as f64;
        let var = out.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / out.len() as f64;
        assert!(mean.abs() < 0.02, "mean {mean}");
        let std = var.sqrt();
        assert!((0.98..1.02).contains(&std), "std {std}");
    }

    #[test]
    fn negative_sigma_rejected() {
        assert!(add_gaussian_noise(&[0.0], -1.0, 0).is_err());
    }
}
