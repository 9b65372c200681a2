//! Error measures between a reference volume and a restoration.
//!
//! PSNR uses peak value 1. SSIM is the single-scale 2D index with an 11×11
//! Gaussian window (σ = 1.5), `C₁ = 0.01²`, `C₂ = 0.03²`, evaluated at every
//! window position fully inside an `x`-`y` slice and averaged over positions
//! and then over slices. Slices narrower than 11 voxels use the largest odd
//! window that fits.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Result;
use crate::par;
use crate::volume::Volume;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Decibels; `+∞` (serialized as `"inf"`) for identical inputs.
    #[serde(serialize_with = "ser_db", deserialize_with = "de_db")]
    pub psnr: f64,
    pub mse: f64,
    pub ssim: f64,
}

fn ser_db<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_infinite() && *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*v)
    }
}

fn de_db<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Db {
        Num(f64),
        Text(String),
    }
    match Db::deserialize(d)? {
        Db::Num(v) => Ok(v),
        Db::Text(t) if t == "inf" => Ok(f64::INFINITY),
        Db::Text(t) => Err(serde::de::Error::custom(format!("invalid PSNR value {t:?}"))),
    }
}

impl MetricsReport {
    pub fn compute(reference: &Volume, x: &Volume) -> Result<Self> {
        let mse = mse(reference, x)?;
        Ok(MetricsReport {
            psnr: psnr_from_mse(mse),
            mse,
            ssim: ssim(reference, x)?,
        })
    }
}

/// Mean squared difference over all voxels.
pub fn mse(reference: &Volume, x: &Volume) -> Result<f64> {
    reference.dims().check_same(&x.dims())?;
    let (a, b) = (reference.as_slice(), x.as_slice());
    let sum = crate::solver::squared_distance(a, b);
    Ok(sum / a.len() as f64)
}

/// `10 log₁₀(1 / mse)`.
pub fn psnr(reference: &Volume, x: &Volume) -> Result<f64> {
    Ok(psnr_from_mse(mse(reference, x)?))
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * mse.log10()
    }
}

/// Normalized 1D Gaussian taps of odd length `len`.
pub fn gaussian_taps(len: usize, sigma: f64) -> Vec<f64> {
    let c = (len / 2) as f64;
    let raw: Vec<f64> = (0..len)
        .map(|i| (-((i as f64 - c).powi(2)) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// Window length used for a `nx × ny` slice.
pub fn ssim_window_len(nx: usize, ny: usize) -> usize {
    let w = SSIM_WINDOW.min(nx).min(ny);
    if w % 2 == 0 {
        w - 1
    } else {
        w
    }
}

/// Mean SSIM over `x`-`y` slices.
pub fn ssim(reference: &Volume, x: &Volume) -> Result<f64> {
    reference.dims().check_same(&x.dims())?;
    let dims = reference.dims();
    let per_slice = par::map_indices(dims.nz, |k| {
        ssim_slice(reference.slice_z(k), x.slice_z(k), dims.nx, dims.ny)
    });
    Ok(per_slice.iter().sum::<f64>() / dims.nz as f64)
}

/// SSIM of one row-major `ny × nx` slice pair.
pub fn ssim_slice(a: &[f64], b: &[f64], nx: usize, ny: usize) -> f64 {
    let w = ssim_window_len(nx, ny);
    let taps = gaussian_taps(w, SSIM_SIGMA);
    let (ox, oy) = (nx - w + 1, ny - w + 1);

    let filter = |src: &dyn Fn(usize) -> f64| -> Vec<f64> {
        // rows first, then columns; both "valid"
        let mut rows = vec![0.0; ny * ox];
        for j in 0..ny {
            for i in 0..ox {
                let mut acc = 0.0;
                for (t, g) in taps.iter().enumerate() {
                    acc += g * src(j * nx + i + t);
                }
                rows[j * ox + i] = acc;
            }
        }
        let mut out = vec![0.0; oy * ox];
        for j in 0..oy {
            for i in 0..ox {
                let mut acc = 0.0;
                for (t, g) in taps.iter().enumerate() {
                    acc += g * rows[(j + t) * ox + i];
                }
                out[j * ox + i] = acc;
            }
        }
        out
    };

    let mu_a = filter(&|n| a[n]);
    let mu_b = filter(&|n| b[n]);
    let e_aa = filter(&|n| a[n] * a[n]);
    let e_bb = filter(&|n| b[n] * b[n]);
    let e_ab = filter(&|n| a[n] * b[n]);

    let mut total = 0.0;
    for p in 0..mu_a.len() {
        let (ma, mb) = (mu_a[p], mu_b[p]);
        let va = e_aa[p] - ma * ma;
        let vb = e_bb[p] - mb * mb;
        let cov = e_ab[p] - ma * mb;
        let num = (2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2);
        let den = (ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2);
        total += num / den;
    }
    total / mu_a.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Dims;
    use rand::{Rng, SeedableRng};

    fn rand_vol(dims: Dims, seed: u64) -> Volume {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Volume::from_fn(dims, |_, _, _| rng.gen_range(0.0..1.0))
    }

    #[test]
    fn mse_and_psnr_values() {
        let dims = Dims::new(3, 3, 2).unwrap();
        let zero = Volume::zeros(dims);
        let tenth = Volume::filled(dims, 0.1);
        assert_eq!(mse(&zero, &zero).unwrap(), 0.0);
        assert!((mse(&zero, &tenth).unwrap() - 0.01).abs() < 1e-17);
        assert!((psnr_from_mse(0.01) - 20.0).abs() < 1e-12);
        assert!((psnr_from_mse(1e-4) - 40.0).abs() < 1e-12);
        assert_eq!(psnr(&tenth, &tenth).unwrap(), f64::INFINITY);
        assert!(mse(&zero, &Volume::zeros(Dims::cube(2).unwrap())).is_err());
    }

    #[test]
    fn mse_matches_scalar_loop() {
        let dims = Dims::new(7, 5, 3).unwrap();
        let (a, b) = (rand_vol(dims, 1), rand_vol(dims, 2));
        let mut acc = 0.0;
        for n in 0..dims.len() {
            acc += (a.as_slice()[n] - b.as_slice()[n]).powi(2);
        }
        let want = acc / dims.len() as f64;
        assert!((mse(&a, &b).unwrap() - want).abs() <= 1e-14 * want);
    }

    #[test]
    fn ssim_identity_and_symmetry() {
        let dims = Dims::new(16, 13, 3).unwrap();
        let (a, b) = (rand_vol(dims, 3), rand_vol(dims, 4));
        assert_eq!(ssim(&a, &a).unwrap(), 1.0);
        assert!((ssim(&a, &b).unwrap() - ssim(&b, &a).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn luminance_shift_is_penalized() {
        let dims = Dims::new(12, 12, 1).unwrap();
        let gray = Volume::from_fn(dims, |i, j, _| 0.25 + 0.01 * ((i + j) % 3) as f64);
        let bright = gray.map(|v| v + 0.5);
        assert!(ssim(&gray, &bright).unwrap() < 1.0);
    }

    #[test]
    fn small_slices_shrink_window() {
        assert_eq!(ssim_window_len(64, 64), 11);
        assert_eq!(ssim_window_len(4, 20), 3);
        assert_eq!(ssim_window_len(1, 5), 1);
    }

    #[test]
    fn report_serializes_infinite_psnr() {
        let r = MetricsReport { psnr: f64::INFINITY, mse: 0.0, ssim: 1.0 };
        let s = serde_json::to_string(&r).unwrap();
        assert!(s.contains("\"inf\""));
        let back: MetricsReport = serde_json::from_str(&s).unwrap();
        assert_eq!(back, r);
    }
}
