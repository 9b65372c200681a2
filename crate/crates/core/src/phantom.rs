//! Seeded synthetic volumes with stripe and laminar corruption.
//!
//! The clean image is piecewise constant (balls and boxes on a background).
//! Stripes are constant along `y` and a few voxels wide in `x` and `z`.
//! Laminar regions are bright ellipses in the `x`-`y` plane, one or two slices
//! thick, placed on randomly chosen slices with at least one empty slice in
//! between. The corrupted volume is `clamp(clean + stripes + laminar, 0, 1)`.
//!
//! Random draws come from ChaCha8 (`rand_chacha`) seeded with
//! `seed_from_u64(seed)`; geometry, stripes and laminar parts use streams
//! 0, 1 and 2 of that generator so each part is reproducible on its own.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{Dims, Volume};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub dims: Dims,
    pub seed: u64,
    #[serde(default)]
    pub geometry: GeometrySpec,
    #[serde(default)]
    pub stripes: StripeSpec,
    #[serde(default)]
    pub laminar: LaminarSpec,
}

/// Piecewise-constant clean image.
///
/// The volume starts at `background`, is cut into bands along `y` at
/// `layers` random heights (each band below the first gets a level from
/// `levels`), and then balls and boxes are painted on top.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeometrySpec {
    pub background: f64,
    pub layers: usize,
    pub balls: usize,
    pub boxes: usize,
    /// Radius (balls) or half-size (boxes) range in voxels.
    pub radius: [f64; 2],
    /// Stretch factor of shapes along `z` (balls become ellipsoids).
    pub elongation: f64,
    /// Intensity range of layers and shapes.
    pub levels: [f64; 2],
}

impl Default for GeometrySpec {
    fn default() -> Self {
        GeometrySpec {
            background: 0.5,
            layers: 0,
            balls: 0,
            boxes: 0,
            radius: [2.0, 4.0],
            elongation: 1.0,
            levels: [0.2, 0.8],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StripeSign {
    Positive,
    Negative,
    Mixed,
}

/// One stripe: `amplitude` added on `[x0, x0 + wx) × all y × [z0, z0 + wz)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stripe {
    pub x0: usize,
    pub z0: usize,
    pub wx: usize,
    pub wz: usize,
    pub amplitude: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StripeSpec {
    /// Number of randomly placed stripes.
    pub count: usize,
    pub width_x: [usize; 2],
    pub width_z: [usize; 2],
    /// Magnitude range.
    pub amplitude: [f64; 2],
    pub sign: StripeSign,
    /// Stripes placed exactly, in addition to the random ones.
    pub explicit: Vec<Stripe>,
}

impl Default for StripeSpec {
    fn default() -> Self {
        StripeSpec {
            count: 0,
            width_x: [1, 3],
            width_z: [1, 2],
            amplitude: [0.1, 0.3],
            sign: StripeSign::Mixed,
            explicit: Vec::new(),
        }
    }
}

/// One laminar region: ellipse in `x`-`y`, slices `[z0, z0 + thickness)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaminarRegion {
    pub cx: f64,
    pub cy: f64,
    pub rx: f64,
    pub ry: f64,
    pub z0: usize,
    pub thickness: usize,
    pub brightness: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LaminarSpec {
    /// Chance that a slice starts a laminar layer.
    pub probability: f64,
    pub regions_per_slice: usize,
    /// Semi-axis range as a fraction of `nx` (resp. `ny`).
    pub extent: [f64; 2],
    /// Layer thickness range in slices, within `[1, 2]`.
    pub thickness: [usize; 2],
    pub brightness: [f64; 2],
    /// Standard deviation (voxels) of the Gaussian blur applied to each
    /// region's mask in the `x`-`y` plane; 0 keeps hard edges.
    pub smoothing: f64,
    pub explicit: Vec<LaminarRegion>,
}

impl Default for LaminarSpec {
    fn default() -> Self {
        LaminarSpec {
            probability: 0.0,
            regions_per_slice: 1,
            extent: [0.2, 0.4],
            thickness: [1, 2],
            brightness: [0.2, 0.4],
            smoothing: 0.0,
            explicit: Vec::new(),
        }
    }
}

/// Generated volumes.
#[derive(Clone, Debug, PartialEq)]
pub struct Phantom {
    pub clean: Volume,
    pub stripes: Volume,
    pub laminar: Volume,
    pub corrupted: Volume,
}

/// Names accepted by [`PhantomSpec::preset`].
pub const PRESETS: [&str; 2] = ["hard-edge", "smooth-laminar"];

impl PhantomSpec {
    /// Clean geometry only, no corruption.
    pub fn clean_only(dims: Dims, seed: u64) -> Self {
        PhantomSpec {
            dims,
            seed,
            geometry: GeometrySpec {
                background: 0.35,
                layers: 0,
                balls: 10,
                boxes: 6,
                radius: [4.0, 10.0],
                elongation: 1.0,
                levels: [0.55, 0.85],
            },
            stripes: StripeSpec::default(),
            laminar: LaminarSpec::default(),
        }
    }

    /// 64³ volume of `y`-layered material with `z`-elongated inclusions,
    /// stripes and sharp-edged two-slice laminar layers.
    pub fn hard_edge() -> Self {
        let dims = Dims::cube(64).expect("nonzero");
        PhantomSpec {
            stripes: StripeSpec {
                count: 40,
                width_x: [1, 3],
                width_z: [1, 3],
                amplitude: [0.08, 0.25],
                sign: StripeSign::Mixed,
                explicit: Vec::new(),
            },
            geometry: GeometrySpec {
                layers: 6,
                balls: 6,
                boxes: 6,
                elongation: 4.0,
                ..Self::clean_only(dims, 0).geometry
            },
            laminar: LaminarSpec {
                probability: 0.15,
                regions_per_slice: 1,
                extent: [0.15, 0.35],
                thickness: [2, 2],
                brightness: [0.4, 0.7],
                smoothing: 0.0,
                explicit: Vec::new(),
            },
            ..Self::clean_only(dims, 20_160_901)
        }
    }

    /// As [`hard_edge`](Self::hard_edge) but with blurred laminar edges.
    pub fn smooth_laminar() -> Self {
        let mut spec = Self::hard_edge();
        spec.seed = 20_160_902;
        spec.laminar.smoothing = 2.0;
        spec
    }

    /// Stripes only, no laminar part.
    pub fn pure_stripe(dims: Dims, seed: u64) -> Self {
        let mut spec = Self::clean_only(dims, seed);
        spec.stripes = Self::hard_edge().stripes;
        spec.stripes.count = (dims.nx * dims.nz / 100).max(dims.nx / 8).max(1);
        let w = &mut spec.stripes;
        w.width_x = [1, w.width_x[1].min(dims.nx)];
        w.width_z = [1, w.width_z[1].min(dims.nz)];
        spec
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "hard-edge" => Some(Self::hard_edge()),
            "smooth-laminar" => Some(Self::smooth_laminar()),
            _ => None,
        }
    }

    pub fn with_dims(mut self, dims: Dims) -> Self {
        self.dims = dims;
        self
    }

    pub fn without_corruption(mut self) -> Self {
        self.stripes = StripeSpec::default();
        self.laminar = LaminarSpec::default();
        self
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dims;
        Dims::new(d.nx, d.ny, d.nz)?;
        let g = &self.geometry;
        unit("geometry.background", g.background)?;
        ordered("geometry.radius", g.radius)?;
        if !(g.elongation > 0.0 && g.elongation.is_finite()) {
            return Err(Error::param("geometry.elongation", "must be finite and > 0"));
        }
        ordered("geometry.levels", g.levels)?;
        unit("geometry.levels", g.levels[0])?;
        unit("geometry.levels", g.levels[1])?;
        if g.radius[0] < 0.0 {
            return Err(Error::param("geometry.radius", "must be >= 0"));
        }

        let s = &self.stripes;
        ordered("stripes.amplitude", s.amplitude)?;
        if s.count > 0 {
            if s.width_x[0] == 0 || s.width_z[0] == 0 || s.width_x[0] > s.width_x[1] || s.width_z[0] > s.width_z[1] {
                return Err(Error::param("stripes.width", "need 1 <= min <= max"));
            }
            if s.width_x[1] > d.nx || s.width_z[1] > d.nz {
                return Err(Error::param(
                    "stripes.width",
                    format!("stripe up to {}x{} does not fit into {d}", s.width_x[1], s.width_z[1]),
                ));
            }
        }
        for st in &s.explicit {
            if st.wx == 0 || st.wz == 0 || st.x0 + st.wx > d.nx || st.z0 + st.wz > d.nz {
                return Err(Error::param("stripes.explicit", format!("{st:?} does not fit into {d}")));
            }
        }

        let l = &self.laminar;
        if !(0.0..=1.0).contains(&l.probability) {
            return Err(Error::param("laminar.probability", "must lie in [0, 1]"));
        }
        if !(1 <= l.thickness[0] && l.thickness[0] <= l.thickness[1] && l.thickness[1] <= 2) {
            return Err(Error::param("laminar.thickness", "need 1 <= min <= max <= 2"));
        }
        ordered("laminar.extent", l.extent)?;
        ordered("laminar.brightness", l.brightness)?;
        if l.smoothing < 0.0 {
            return Err(Error::param("laminar.smoothing", "must be >= 0"));
        }
        if l.probability > 0.0 && l.regions_per_slice > 0 && d.nz < 3 {
            return Err(Error::param("laminar", format!("layers need nz >= 3, got {d}")));
        }
        for r in &l.explicit {
            if r.thickness == 0 || r.z0 + r.thickness > d.nz {
                return Err(Error::param("laminar.explicit", format!("{r:?} does not fit into {d}")));
            }
        }
        Ok(())
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }

    /// Stripe list: random ones first, then the explicit ones.
    pub fn stripe_list(&self) -> Vec<Stripe> {
        let s = &self.stripes;
        let d = self.dims;
        let mut rng = self.rng(1);
        let mut out = Vec::with_capacity(s.count + s.explicit.len());
        for _ in 0..s.count {
            let wx = rng.gen_range(s.width_x[0]..=s.width_x[1]);
            let wz = rng.gen_range(s.width_z[0]..=s.width_z[1]);
            let x0 = rng.gen_range(0..=d.nx - wx);
            let z0 = rng.gen_range(0..=d.nz - wz);
            let mag = uniform(&mut rng, s.amplitude);
            let sign = match s.sign {
                StripeSign::Positive => 1.0,
                StripeSign::Negative => -1.0,
                StripeSign::Mixed => {
                    if rng.gen_bool(0.5) {
                        1.0
                    } else {
                        -1.0
                    }
                }
            };
            out.push(Stripe { x0, z0, wx, wz, amplitude: sign * mag });
        }
        out.extend_from_slice(&s.explicit);
        out
    }

    /// Laminar region list: random layers first, then the explicit ones.
    pub fn laminar_list(&self) -> Vec<LaminarRegion> {
        let l = &self.laminar;
        let d = self.dims;
        let mut rng = self.rng(2);
        let mut out = Vec::new();
        if l.probability > 0.0 && l.regions_per_slice > 0 {
            // Layers stay off the first and last slice and never touch.
            let mut k = 1;
            while k + 2 <= d.nz {
                if rng.gen::<f64>() < l.probability {
                    let room = d.nz - 1 - k;
                    let thickness = rng.gen_range(l.thickness[0]..=l.thickness[1]).min(room);
                    for _ in 0..l.regions_per_slice {
                        out.push(LaminarRegion {
                            cx: rng.gen_range(0.0..d.nx as f64),
                            cy: rng.gen_range(0.0..d.ny as f64),
                            rx: uniform(&mut rng, l.extent) * d.nx as f64,
                            ry: uniform(&mut rng, l.extent) * d.ny as f64,
                            z0: k,
                            thickness,
                            brightness: uniform(&mut rng, l.brightness),
                        });
                    }
                    k += thickness + 1;
                } else {
                    k += 1;
                }
            }
        }
        out.extend_from_slice(&l.explicit);
        out
    }

    fn clean(&self) -> Volume {
        let g = &self.geometry;
        let d = self.dims;
        let mut rng = self.rng(0);
        let mut v = Volume::filled(d, g.background);
        if g.layers > 0 && d.ny > 1 {
            let mut cuts: Vec<usize> = (0..g.layers).map(|_| rng.gen_range(1..d.ny)).collect();
            cuts.sort_unstable();
            for &cut in &cuts {
                let level = uniform(&mut rng, g.levels);
                paint(&mut v, |_, y, _| y >= cut as f64, level);
            }
        }
        let center = |rng: &mut ChaCha8Rng| {
            (
                rng.gen_range(0.0..d.nx as f64),
                rng.gen_range(0.0..d.ny as f64),
                rng.gen_range(0.0..d.nz as f64),
            )
        };
        for _ in 0..g.balls {
            let (cx, cy, cz) = center(&mut rng);
            let r = uniform(&mut rng, g.radius);
            let level = uniform(&mut rng, g.levels);
            paint(&mut v, |x, y, z| {
                (x - cx).powi(2) + (y - cy).powi(2) + ((z - cz) / g.elongation).powi(2) <= r * r
            }, level);
        }
        for _ in 0..g.boxes {
            let (cx, cy, cz) = center(&mut rng);
            let (hx, hy, hz) = (uniform(&mut rng, g.radius), uniform(&mut rng, g.radius), uniform(&mut rng, g.radius));
            let level = uniform(&mut rng, g.levels);
            paint(&mut v, |x, y, z| {
                (x - cx).abs() <= hx && (y - cy).abs() <= hy && (z - cz).abs() <= hz * g.elongation
            }, level);
        }
        v
    }

    /// Stripe and laminar fields (before clamping).
    pub fn corruption_fields(&self) -> Result<(Volume, Volume)> {
        self.validate()?;
        let d = self.dims;
        let mut stripes = Volume::zeros(d);
        for st in self.stripe_list() {
            for k in st.z0..st.z0 + st.wz {
                for j in 0..d.ny {
                    for i in st.x0..st.x0 + st.wx {
                        let idx = d.index(i, j, k);
                        stripes.as_mut_slice()[idx] += st.amplitude;
                    }
                }
            }
        }
        let mut laminar = Volume::zeros(d);
        for r in self.laminar_list() {
            let mask = region_mask(d, &r, self.laminar.smoothing);
            for k in r.z0..r.z0 + r.thickness {
                let sl = d.slice_len();
                let slice = &mut laminar.as_mut_slice()[k * sl..(k + 1) * sl];
                for (o, m) in slice.iter_mut().zip(&mask) {
                    *o += r.brightness * m;
                }
            }
        }
        Ok((stripes, laminar))
    }
}

fn unit(name: &'static str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::param(name, format!("{v} is outside [0, 1]")));
    }
    Ok(())
}

fn ordered(name: &'static str, r: [f64; 2]) -> Result<()> {
    if !(r[0] <= r[1]) || !r[0].is_finite() || !r[1].is_finite() {
        return Err(Error::param(name, format!("need finite min <= max, got {r:?}")));
    }
    Ok(())
}

fn uniform(rng: &mut ChaCha8Rng, r: [f64; 2]) -> f64 {
    if r[0] == r[1] {
        r[0]
    } else {
        rng.gen_range(r[0]..r[1])
    }
}

fn paint(v: &mut Volume, inside: impl Fn(f64, f64, f64) -> bool, level: f64) {
    let d = v.dims();
    for k in 0..d.nz {
        for j in 0..d.ny {
            for i in 0..d.nx {
                // voxel centers
                if inside(i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5) {
                    v.set(i, j, k, level);
                }
            }
        }
    }
}

/// Ellipse indicator on one `x`-`y` slice, optionally Gaussian-blurred.
fn region_mask(d: Dims, r: &LaminarRegion, smoothing: f64) -> Vec<f64> {
    let mut mask = vec![0.0; d.slice_len()];
    for j in 0..d.ny {
        for i in 0..d.nx {
            let dx = (i as f64 + 0.5 - r.cx) / r.rx.max(1e-9);
            let dy = (j as f64 + 0.5 - r.cy) / r.ry.max(1e-9);
            if dx * dx + dy * dy <= 1.0 {
                mask[j * d.nx + i] = 1.0;
            }
        }
    }
    if smoothing > 0.0 {
        let half = (3.0 * smoothing).ceil() as usize;
        let taps = crate::metrics::gaussian_taps(2 * half + 1, smoothing);
        mask = blur_axis(&mask, d.nx, d.ny, &taps, true);
        mask = blur_axis(&mask, d.nx, d.ny, &taps, false);
    }
    mask
}

/// Separable blur with zero extension, so the blurred mask vanishes far
/// away from the region.
fn blur_axis(src: &[f64], nx: usize, ny: usize, taps: &[f64], along_x: bool) -> Vec<f64> {
    let half = (taps.len() / 2) as isize;
    let mut out = vec![0.0; src.len()];
    for j in 0..ny {
        for i in 0..nx {
            let mut acc = 0.0;
            for (t, g) in taps.iter().enumerate() {
                let off = t as isize - half;
                let (ii, jj) = if along_x {
                    (i as isize + off, j as isize)
                } else {
                    (i as isize, j as isize + off)
                };
                if ii >= 0 && jj >= 0 && (ii as usize) < nx && (jj as usize) < ny {
                    acc += g * src[jj as usize * nx + ii as usize];
                }
            }
            out[j * nx + i] = acc;
        }
    }
    out
}

/// Builds the clean volume and both corruption parts from `spec`.
pub fn generate_phantom(spec: &PhantomSpec) -> Result<Phantom> {
    spec.validate()?;
    let clean = spec.clean();
    let (stripes, laminar) = spec.corruption_fields()?;
    let corrupted = combine(&clean, &stripes, &laminar);
    Ok(Phantom {
        clean,
        stripes,
        laminar,
        corrupted,
    })
}

/// Applies the corruption described by `spec` to a user-supplied clean volume.
pub fn corrupt(clean: &Volume, spec: &PhantomSpec) -> Result<Volume> {
    spec.dims.check_same(&clean.dims())?;
    let (stripes, laminar) = spec.corruption_fields()?;
    Ok(combine(clean, &stripes, &laminar))
}

fn combine(clean: &Volume, stripes: &Volume, laminar: &Volume) -> Volume {
    let data = clean
        .as_slice()
        .iter()
        .zip(stripes.as_slice())
        .zip(laminar.as_slice())
        .map(|((c, s), l)| (c + s + l).clamp(0.0, 1.0))
        .collect();
    Volume::from_raw(clean.dims(), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffops::{apply_d1, apply_d2z};
    use crate::volume::Axis;

    fn small(seed: u64) -> PhantomSpec {
        PhantomSpec::hard_edge().with_dims(Dims::new(24, 20, 16).unwrap()).reseed(seed)
    }

    impl PhantomSpec {
        fn reseed(mut self, seed: u64) -> Self {
            self.seed = seed;
            self
        }
    }

    #[test]
    fn no_corruption_means_identity() {
        let spec = small(1).without_corruption();
        let p = generate_phantom(&spec).unwrap();
        assert_eq!(p.corrupted, p.clean);
        assert_eq!(corrupt(&p.clean, &spec).unwrap(), p.clean);
    }

    #[test]
    fn single_explicit_stripe() {
        let mut spec = small(2).without_corruption();
        spec.stripes.explicit.push(Stripe { x0: 5, z0: 7, wx: 1, wz: 1, amplitude: 0.3 });
        let p = generate_phantom(&spec).unwrap();
        let d = spec.dims;
        for k in 0..d.nz {
            for j in 0..d.ny {
                for i in 0..d.nx {
                    let diff = p.corrupted.get(i, j, k) - p.clean.get(i, j, k);
                    if (i, k) == (5, 7) {
                        if p.clean.get(i, j, k) + 0.3 <= 1.0 {
                            assert!((diff - 0.3).abs() < 1e-15);
                        }
                    } else {
                        assert_eq!(diff, 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_phantom(&small(3)).unwrap();
        let b = generate_phantom(&small(3)).unwrap();
        assert_eq!(a, b);
        let c = generate_phantom(&small(4)).unwrap();
        assert_ne!(a.corrupted, c.corrupted);
    }

    #[test]
    fn stripes_constant_along_y_and_layers_thin() {
        for seed in 0..5 {
            let mut spec = small(seed);
            spec.laminar.thickness = [1, 1];
            let p = generate_phantom(&spec).unwrap();
            assert!(apply_d1(&p.stripes, Axis::Y).as_slice().iter().all(|&v| v == 0.0));
            let lap = apply_d2z(&p.laminar);
            for r in spec.laminar_list() {
                let (i, j) = (r.cx as usize, r.cy as usize);
                let idx = spec.dims.index(i, j, r.z0);
                assert!(lap.as_slice()[idx].abs() >= r.brightness);
            }
            let (lo, hi) = p.corrupted.min_max();
            assert!(lo >= 0.0 && hi <= 1.0);
        }
    }

    #[test]
    fn corrupting_zero_volume_gives_fields() {
        let mut spec = small(6);
        spec.stripes.sign = StripeSign::Positive;
        let zero = Volume::zeros(spec.dims);
        let out = corrupt(&zero, &spec).unwrap();
        let (s, l) = spec.corruption_fields().unwrap();
        for n in 0..out.as_slice().len() {
            let want = (s.as_slice()[n] + l.as_slice()[n]).min(1.0);
            assert_eq!(out.as_slice()[n], want);
        }
    }

    #[test]
    fn oversized_requests_fail() {
        let mut spec = small(1);
        spec.stripes.width_x = [1, 100];
        assert!(generate_phantom(&spec).is_err());
        let spec = small(1).with_dims(Dims::new(24, 20, 2).unwrap());
        assert!(generate_phantom(&spec).is_err());
        let spec = small(1);
        assert!(corrupt(&Volume::zeros(Dims::cube(3).unwrap()), &spec).is_err());
    }

    #[test]
    fn spec_json_round_trip() {
        let spec = PhantomSpec::smooth_laminar();
        let text = serde_json::to_string_pretty(&spec).unwrap();
        let back: PhantomSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, spec);
        let minimal: PhantomSpec =
            serde_json::from_str(r#"{"dims": {"nx": 4, "ny": 4, "nz": 4}, "seed": 1}"#).unwrap();
        assert_eq!(minimal.stripes.count, 0);
    }
}
