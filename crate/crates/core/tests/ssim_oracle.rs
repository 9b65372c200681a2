mod common;

use common::*;
use decurtain_core::metrics::{ssim, SSIM_C1, SSIM_C2};
use decurtain_core::{Dims, Volume};

/// Direct evaluation with the 2D Gaussian window at each valid position.
fn ssim_direct(a: &Volume, b: &Volume) -> f64 {
    let d = a.dims();
    let w = 11.min(d.nx).min(d.ny);
    let w = if w % 2 == 0 { w - 1 } else { w };
    let c = (w / 2) as f64;
    let mut win = vec![0.0; w * w];
    for y in 0..w {
        for x in 0..w {
            let r2 = (x as f64 - c).powi(2) + (y as f64 - c).powi(2);
            win[y * w + x] = (-r2 / (2.0 * 1.5 * 1.5)).exp();
        }
    }
    let total: f64 = win.iter().sum();
    win.iter_mut().for_each(|g| *g /= total);

    let mut per_slice = 0.0;
    for k in 0..d.nz {
        let mut acc = 0.0;
        let mut count = 0;
        for y0 in 0..=d.ny - w {
            for x0 in 0..=d.nx - w {
                let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for y in 0..w {
                    for x in 0..w {
                        let g = win[y * w + x];
                        let (p, q) = (a.get(x0 + x, y0 + y, k), b.get(x0 + x, y0 + y, k));
                        ma += g * p;
                        mb += g * q;
                        saa += g * p * p;
                        sbb += g * q * q;
                        sab += g * p * q;
                    }
                }
                let (va, vb, cov) = (saa - ma * ma, sbb - mb * mb, sab - ma * mb);
                acc += (2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2)
                    / ((ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2));
                count += 1;
            }
        }
        per_slice += acc / count as f64;
    }
    per_slice / d.nz as f64
}

#[test]
fn separable_ssim_matches_direct_window() {
    let mut r = rng(41);
    for d in [Dims::new(20, 17, 3).unwrap(), Dims::new(11, 11, 1).unwrap(), Dims::new(6, 9, 2).unwrap()] {
        let a = random_volume(d, &mut r, 0.0, 1.0);
        let b = Volume::from_vec(
            d,
            a.as_slice()
                .iter()
                .zip(random_volume(d, &mut r, -0.2, 0.2).as_slice())
                .map(|(x, n)| x + n)
                .collect(),
        )
        .unwrap();
        let got = ssim(&a, &b).unwrap();
        let want = ssim_direct(&a, &b);
        assert!((got - want).abs() <= 1e-10, "{d}: {got} vs {want}");
    }
}
