//! Synthetic digit renderer: seven-segment style glyphs drawn as antialiased
//! strokes on a 28x28 canvas with per-sample pose jitter. Gives the training
//! CLI and the test suite a deterministic, self-contained 10-class dataset in
//! the same container format as the classic digit sets.

use crate::{Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::io::Write;
use std::path::Path;

use super::idx::{IMAGES_MAGIC, LABELS_MAGIC};

const SIDE: usize = 28;

type Seg = ((f64, f64), (f64, f64));

// segment endpoints in unit coordinates (x right, y down)
const A: Seg = ((0.22, 0.14), (0.78, 0.14));
const B: Seg = ((0.78, 0.14), (0.78, 0.50));
const C: Seg = ((0.78, 0.50), (0.78, 0.86));
const D: Seg = ((0.22, 0.86), (0.78, 0.86));
const E: Seg = ((0.22, 0.50), (0.22, 0.86));
const F: Seg = ((0.22, 0.14), (0.22, 0.50));
const G: Seg = ((0.22, 0.50), (0.78, 0.50));

fn glyph(digit: usize) -> &'static [Seg] {
    match digit {
        0 => &[A, B, C, D, E, F],
        1 => &[B, C],
        2 => &[A, B, G, E, D],
        3 => &[A, B, G, C, D],
        4 => &[F, G, B, C],
        5 => &[A, F, G, C, D],
        6 => &[A, F, G, E, C, D],
        7 => &[A, B, C],
        8 => &[A, B, C, D, E, F, G],
        9 => &[A, B, C, D, F, G],
        _ => unreachable!("digit classes are 0..10"),
    }
}

fn dist_to_segment(px: f64, py: f64, seg: &Seg) -> f64 {
    let ((x0, y0), (x1, y1)) = *seg;
    let (vx, vy) = (x1 - x0, y1 - y0);
    let (wx, wy) = (px - x0, py - y0);
    let len2 = vx * vx + vy * vy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        ((wx * vx + wy * vy) / len2).clamp(0.0, 1.0)
    };
    let (dx, dy) = (wx - t * vx, wy - t * vy);
    (dx * dx + dy * dy).sqrt()
}

struct Pose {
    angle_deg: f64,
    scale: f64,
    /// italic-style horizontal shear proportional to height
    shear: f64,
    tx: f64,
    ty: f64,
    thickness: f64,
    gain: f64,
    /// per-endpoint position wobble, 4 coords per segment
    wobble: Vec<f64>,
}

/// Renders one digit with the given pose jitter; returns SIDE*SIDE bytes.
fn render(digit: usize, pose: &Pose) -> Vec<u8> {
    let theta = pose.angle_deg.to_radians();
    let (sin, cos) = theta.sin_cos();
    let segs: Vec<Seg> = glyph(digit)
        .iter()
        .enumerate()
        .map(|(si, &((x0, y0), (x1, y1)))| {
            let w = &pose.wobble[si * 4..si * 4 + 4];
            let tf = |x: f64, y: f64| {
                let (mut dx, dy) = ((x - 0.5) * pose.scale, (y - 0.5) * pose.scale);
                dx += pose.shear * dy;
                (
                    0.5 + cos * dx - sin * dy + pose.tx,
                    0.5 + sin * dx + cos * dy + pose.ty,
                )
            };
            (tf(x0 + w[0], y0 + w[1]), tf(x1 + w[2], y1 + w[3]))
        })
        .collect();

    let feather = 0.035;
    let mut out = vec![0u8; SIDE * SIDE];
    for y in 0..SIDE {
        let py = (y as f64 + 0.5) / SIDE as f64;
        for x in 0..SIDE {
            let px = (x as f64 + 0.5) / SIDE as f64;
            let mut best = f64::INFINITY;
            for s in &segs {
                best = best.min(dist_to_segment(px, py, s));
            }
            let v = pose.gain * (1.0 - (best - pose.thickness) / feather).clamp(0.0, 1.0);
            out[y * SIDE + x] = (v * 255.0 + 0.5).floor() as u8;
        }
    }
    out
}

/// Generates `count` digit images (label = index mod 10) as raw 28x28 bytes.
pub fn generate_digits(count: usize, seed: u64) -> (Vec<u8>, Vec<u8>) {
    let mut pixels = Vec::with_capacity(count * SIDE * SIDE);
    let mut labels = Vec::with_capacity(count);
    for i in 0..count {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let digit = i % 10;
        let pose = Pose {
            angle_deg: rng.gen_range(-12.0..12.0),
            scale: rng.gen_range(0.55..1.0),
            shear: rng.gen_range(-0.25..0.25),
            tx: rng.gen_range(-0.10..0.10),
            ty: rng.gen_range(-0.10..0.10),
            thickness: rng.gen_range(0.016..0.032),
            gain: rng.gen_range(0.55..1.0),
            wobble: (0..glyph(digit).len() * 4)
                .map(|_| rng.gen_range(-0.05..0.05))
                .collect(),
        };
        pixels.extend(render(digit, &pose));
        labels.push(digit as u8);
    }
    (pixels, labels)
}

/// Writes a generated digit set as an IDX images/labels pair.
pub fn write_digit_idx<P: AsRef<Path>, Q: AsRef<Path>>(
    images_path: P,
    labels_path: Q,
    count: usize,
    seed: u64,
) -> Result<()> {
    let (pixels, labels) = generate_digits(count, seed);
    let mut img = Vec::with_capacity(16 + pixels.len());
    img.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
    img.extend_from_slice(&(count as u32).to_be_bytes());
    img.extend_from_slice(&(SIDE as u32).to_be_bytes());
    img.extend_from_slice(&(SIDE as u32).to_be_bytes());
    img.extend_from_slice(&pixels);
    let mut lbl = Vec::with_capacity(8 + labels.len());
    lbl.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    lbl.extend_from_slice(&(count as u32).to_be_bytes());
    lbl.extend_from_slice(&labels);
    std::fs::File::create(images_path)?.write_all(&img)?;
    std::fs::File::create(labels_path)?.write_all(&lbl)?;
    Ok(())
}
