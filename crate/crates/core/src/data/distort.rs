//! Rotated and RTS distortion generators with counter-based seeding: image
//! `i` draws its parameters from an RNG stream keyed by `(seed, i)`, so
//! subsets are stable under limit changes and warps parallelize freely.

use super::{LabeledDataset, Provenance};
use crate::tensor::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistortMode {
    Rotated,
    Rts,
}

/// Parameter ranges sampled per image, half-open `[lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistortionSpec {
    pub mode: DistortMode,
    pub angle_deg: (f64, f64),
    pub scale: (f64, f64),
    pub translate_px: (f64, f64),
    pub seed: u64,
}

impl DistortionSpec {
    /// Rotation only, angles in (-90, 90) degrees.
    pub fn rotated(seed: u64) -> DistortionSpec {
        DistortionSpec {
            mode: DistortMode::Rotated,
            angle_deg: (-90.0, 90.0),
            scale: (1.0, 1.0),
            translate_px: (0.0, 0.0),
            seed,
        }
    }

    /// Rotation, translation and scale composed: scale in (0.7, 1),
    /// translation in (-5, 5) pixels both axes, angles in (-45, 45).
    pub fn rts(seed: u64) -> DistortionSpec {
        DistortionSpec {
            mode: DistortMode::Rts,
            angle_deg: (-45.0, 45.0),
            scale: (0.7, 1.0),
            translate_px: (-5.0, 5.0),
            seed,
        }
    }

    /// Ranges collapsed to the identity transform.
    pub fn identity(seed: u64) -> DistortionSpec {
        DistortionSpec {
            mode: DistortMode::Rts,
            angle_deg: (0.0, 0.0),
            scale: (1.0, 1.0),
            translate_px: (0.0, 0.0),
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WarpParams {
    pub angle_deg: f64,
    pub scale: f64,
    pub tx: f64,
    pub ty: f64,
}

fn draw(rng: &mut ChaCha8Rng, range: (f64, f64)) -> f64 {
    if range.0 == range.1 {
        range.0
    } else {
        rng.gen_range(range.0..range.1)
    }
}

/// Parameters for image `index`: drawn in the order scale, tx, ty, angle from
/// the per-image stream.
pub fn sample_params(spec: &DistortionSpec, index: usize) -> WarpParams {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index as u64);
    match spec.mode {
        DistortMode::Rotated => WarpParams {
            angle_deg: draw(&mut rng, spec.angle_deg),
            scale: 1.0,
            tx: 0.0,
            ty: 0.0,
        },
        DistortMode::Rts => {
            let scale = draw(&mut rng, spec.scale);
            let tx = draw(&mut rng, spec.translate_px);
            let ty = draw(&mut rng, spec.translate_px);
            let angle_deg = draw(&mut rng, spec.angle_deg);
            WarpParams {
                angle_deg,
                scale,
                tx,
                ty,
            }
        }
    }
}

/// Warps one channel plane by the affine map scale -> rotate -> translate
/// about the image center, resampling by inverse mapping with bilinear
/// interpolation and zero fill outside the frame (anything pushed out is
/// cropped).
///
/// `tx` translates along columns, `ty` along rows; a positive angle rotates
/// row-ward (clockwise on screen with rows growing downward).
pub fn warp(img: &[f64], h: usize, w: usize, angle_deg: f64, scale: f64, tx: f64, ty: f64) -> Vec<f64> {
    assert_eq!(img.len(), h * w);
    let cy = (h as f64 - 1.0) / 2.0;
    let cx = (w as f64 - 1.0) / 2.0;
    let theta = angle_deg.to_radians();
    let (sin, cos) = theta.sin_cos();
    let inv_scale = 1.0 / scale;

    let fetch = |y: i64, x: i64| -> f64 {
        if y >= 0 && x >= 0 && (y as usize) < h && (x as usize) < w {
            img[y as usize * w + x as usize]
        } else {
            0.0
        }
    };

    let mut out = vec![0.0; h * w];
    for y in 0..h {
        let dy = y as f64 - cy - ty;
        for x in 0..w {
            let dx = x as f64 - cx - tx;
            // inverse rotation then inverse scale
            let rx = (cos * dx + sin * dy) * inv_scale;
            let ry = (-sin * dx + cos * dy) * inv_scale;
            let sx = rx + cx;
            let sy = ry + cy;
            let x0 = sx.floor();
            let y0 = sy.floor();
            let fx = sx - x0;
            let fy = sy - y0;
            let (x0, y0) = (x0 as i64, y0 as i64);
            let top = (1.0 - fx) * fetch(y0, x0) + fx * fetch(y0, x0 + 1);
            let bot = (1.0 - fx) * fetch(y0 + 1, x0) + fx * fetch(y0 + 1, x0 + 1);
            out[y * w + x] = (1.0 - fy) * top + fy * bot;
        }
    }
    out
}

/// Applies per-image warps with parameters drawn per image index; labels pass
/// through.
pub fn distort_dataset(ds: &LabeledDataset, spec: &DistortionSpec) -> LabeledDataset {
    let [n, _, h, w] = ds.images.shape();
    let mut images = Tensor::zeros(ds.images.shape());
    for i in 0..n {
        let p = sample_params(spec, i);
        let warped = warp(ds.images.plane_slice(i, 0), h, w, p.angle_deg, p.scale, p.tx, p.ty);
        images.plane_slice_mut(i, 0).copy_from_slice(&warped);
    }
    LabeledDataset {
        images,
        labels: ds.labels.clone(),
        provenance: match spec.mode {
            DistortMode::Rotated => Provenance::Rotated,
            DistortMode::Rts => Provenance::Rts,
        },
        seed: spec.seed,
    }
}
