//! IDX container parsing and writing (big-endian, MNIST magic numbers).

use super::{LabeledDataset, Provenance};
use crate::tensor::Tensor;
use crate::{Error, Result};
use std::io::Write;
use std::path::Path;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

/// Network input side length; smaller sources are upsampled.
pub const TARGET_SIDE: usize = 32;

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: String,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Truncated {
                path: self.path.clone(),
                needed: self.pos + n,
                had: self.bytes.len(),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32_be(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }
}

/// Loads an images/labels pair, scales pixels to `[0, 1]`, and upsamples
/// anything that is not already 32x32 with bilinear resampling. `limit` takes
/// the first records in file order.
pub fn load_idx<P: AsRef<Path>, Q: AsRef<Path>>(
    images_path: P,
    labels_path: Q,
    limit: Option<usize>,
) -> Result<LabeledDataset> {
    let img_bytes = std::fs::read(&images_path)?;
    let lbl_bytes = std::fs::read(&labels_path)?;
    let img_path = images_path.as_ref().display().to_string();
    let lbl_path = labels_path.as_ref().display().to_string();

    let mut ir = Reader {
        bytes: &img_bytes,
        pos: 0,
        path: img_path.clone(),
    };
    let magic = ir.u32_be()?;
    if magic != IMAGES_MAGIC {
        return Err(Error::BadMagic {
            path: img_path,
            expected: IMAGES_MAGIC,
            got: magic,
        });
    }
    let img_count = ir.u32_be()? as usize;
    let rows = ir.u32_be()? as usize;
    let cols = ir.u32_be()? as usize;

    let mut lr = Reader {
        bytes: &lbl_bytes,
        pos: 0,
        path: lbl_path.clone(),
    };
    let magic = lr.u32_be()?;
    if magic != LABELS_MAGIC {
        return Err(Error::BadMagic {
            path: lbl_path,
            expected: LABELS_MAGIC,
            got: magic,
        });
    }
    let lbl_count = lr.u32_be()? as usize;
    if img_count != lbl_count {
        return Err(Error::CountMismatch {
            images: img_count,
            labels: lbl_count,
        });
    }

    let n = limit.map_or(img_count, |l| l.min(img_count));
    let pixels = ir.take(n * rows * cols)?;
    let labels_raw = lr.take(n)?;

    let mut images = Tensor::zeros([n, 1, TARGET_SIDE, TARGET_SIDE]);
    let mut raw = vec![0.0f64; rows * cols];
    for i in 0..n {
        for (dst, &b) in raw
            .iter_mut()
            .zip(&pixels[i * rows * cols..(i + 1) * rows * cols])
        {
            *dst = b as f64 / 255.0;
        }
        let plane = images.plane_slice_mut(i, 0);
        if rows == TARGET_SIDE && cols == TARGET_SIDE {
            plane.copy_from_slice(&raw);
        } else {
            let resized = bilinear_resize(&raw, rows, cols, TARGET_SIDE, TARGET_SIDE);
            plane.copy_from_slice(&resized);
        }
    }

    Ok(LabeledDataset {
        images,
        labels: labels_raw.iter().map(|&b| b as usize).collect(),
        provenance: Provenance::Origin,
        seed: 0,
    })
}

/// Writes the 32x32 dataset back as an IDX pair, re-quantizing pixels to
/// bytes by round-half-up.
pub fn save_idx<P: AsRef<Path>, Q: AsRef<Path>>(
    ds: &LabeledDataset,
    images_path: P,
    labels_path: Q,
) -> Result<()> {
    let [n, _, h, w] = ds.images.shape();
    let mut img = Vec::with_capacity(16 + n * h * w);
    img.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
    img.extend_from_slice(&(n as u32).to_be_bytes());
    img.extend_from_slice(&(h as u32).to_be_bytes());
    img.extend_from_slice(&(w as u32).to_be_bytes());
    for &v in ds.images.data() {
        let q = (v * 255.0 + 0.5).floor().clamp(0.0, 255.0);
        img.push(q as u8);
    }
    let mut lbl = Vec::with_capacity(8 + n);
    lbl.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    lbl.extend_from_slice(&(n as u32).to_be_bytes());
    for &l in &ds.labels {
        lbl.push(l as u8);
    }
    std::fs::File::create(images_path)?.write_all(&img)?;
    std::fs::File::create(labels_path)?.write_all(&lbl)?;
    Ok(())
}

/// Bilinear resize with half-pixel centers and edge clamping; convex
/// combinations keep values inside the source range.
pub fn bilinear_resize(
    src: &[f64],
    src_h: usize,
    src_w: usize,
    dst_h: usize,
    dst_w: usize,
) -> Vec<f64> {
    assert_eq!(src.len(), src_h * src_w);
    let mut out = vec![0.0; dst_h * dst_w];
    let sy = src_h as f64 / dst_h as f64;
    let sx = src_w as f64 / dst_w as f64;
    for y in 0..dst_h {
        let fy = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, (src_h - 1) as f64);
        let y0 = fy.floor() as usize;
        let y1 = (y0 + 1).min(src_h - 1);
        let wy = fy - y0 as f64;
        for x in 0..dst_w {
            let fx = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, (src_w - 1) as f64);
            let x0 = fx.floor() as usize;
            let x1 = (x0 + 1).min(src_w - 1);
            let wx = fx - x0 as f64;
            let top = (1.0 - wx) * src[y0 * src_w + x0] + wx * src[y0 * src_w + x1];
            let bot = (1.0 - wx) * src[y1 * src_w + x0] + wx * src[y1 * src_w + x1];
            out[y * dst_w + x] = (1.0 - wy) * top + wy * bot;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_pair(dir: &std::path::Path, rows: u32, cols: u32, pixels: &[u8], labels: &[u8]) -> (std::path::PathBuf, std::path::PathBuf) {
        let ip = dir.join("imgs");
        let lp = dir.join("lbls");
        let mut img = Vec::new();
        img.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
        img.extend_from_slice(&(labels.len() as u32).to_be_bytes());
        img.extend_from_slice(&rows.to_be_bytes());
        img.extend_from_slice(&cols.to_be_bytes());
        img.extend_from_slice(pixels);
        std::fs::write(&ip, img).unwrap();
        let mut lbl = Vec::new();
        lbl.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
        lbl.extend_from_slice(&(labels.len() as u32).to_be_bytes());
        lbl.extend_from_slice(labels);
        std::fs::write(&lp, lbl).unwrap();
        (ip, lp)
    }

    #[test]
    fn two_record_hand_built_file() {
        let dir = tempfile::tempdir().unwrap();
        // 2 records of 2x2 pixels with known bytes
        let pixels = [0u8, 51, 102, 255, 10, 20, 30, 40];
        let (ip, lp) = write_pair(dir.path(), 2, 2, &pixels, &[3, 7]);
        let ds = load_idx(&ip, &lp, None).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.labels, vec![3, 7]);
        // 2x2 upsampled to 32x32: corners of the resized image equal the
        // clamped corner pixels exactly
        assert_eq!(ds.images.at(0, 0, 0, 0), 0.0);
        assert_eq!(ds.images.at(0, 0, 0, 31), 51.0 / 255.0);
        assert_eq!(ds.images.at(0, 0, 31, 0), 102.0 / 255.0);
        assert_eq!(ds.images.at(0, 0, 31, 31), 1.0);
    }

    #[test]
    fn limit_takes_first_records() {
        let dir = tempfile::tempdir().unwrap();
        let pixels: Vec<u8> = (0..12 * 4).map(|i| i as u8).collect();
        let labels: Vec<u8> = (0..12).map(|i| (i % 10) as u8).collect();
        let (ip, lp) = write_pair(dir.path(), 2, 2, &pixels, &labels);
        let ds = load_idx(&ip, &lp, Some(10)).unwrap();
        assert_eq!(ds.images.shape(), [10, 1, 32, 32]);
        assert_eq!(ds.labels.len(), 10);
    }

    #[test]
    fn wrong_magic_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let ip = dir.path().join("bad");
        let mut img = Vec::new();
        img.extend_from_slice(&LABELS_MAGIC.to_be_bytes()); // labels magic in images file
        img.extend_from_slice(&1u32.to_be_bytes());
        img.extend_from_slice(&2u32.to_be_bytes());
        img.extend_from_slice(&2u32.to_be_bytes());
        img.extend_from_slice(&[0; 4]);
        std::fs::write(&ip, img).unwrap();
        let lp = dir.path().join("lbl");
        let mut lbl = Vec::new();
        lbl.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
        lbl.extend_from_slice(&1u32.to_be_bytes());
        lbl.push(0);
        std::fs::write(&lp, lbl).unwrap();
        assert!(matches!(
            load_idx(&ip, &lp, None),
            Err(Error::BadMagic { .. })
        ));
    }

    #[test]
    fn truncated_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let pixels = [0u8; 3]; // needs 4
        let (ip, lp) = write_pair(dir.path(), 2, 2, &pixels, &[1]);
        assert!(matches!(
            load_idx(&ip, &lp, None),
            Err(Error::Truncated { .. })
        ));
    }

    #[test]
    fn count_mismatch_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let ip = dir.path().join("imgs");
        let mut img = Vec::new();
        img.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
        img.extend_from_slice(&2u32.to_be_bytes());
        img.extend_from_slice(&1u32.to_be_bytes());
        img.extend_from_slice(&1u32.to_be_bytes());
        img.extend_from_slice(&[5, 6]);
        std::fs::write(&ip, img).unwrap();
        let lp = dir.path().join("lbls");
        let mut lbl = Vec::new();
        lbl.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
        lbl.extend_from_slice(&3u32.to_be_bytes());
        lbl.extend_from_slice(&[0, 1, 2]);
        std::fs::write(&lp, lbl).unwrap();
        assert!(matches!(
            load_idx(&ip, &lp, None),
            Err(Error::CountMismatch { images: 2, labels: 3 })
        ));
    }

    #[test]
    fn save_load_round_trip_32x32() {
        let dir = tempfile::tempdir().unwrap();
        let n = 3;
        let mut images = Tensor::zeros([n, 1, 32, 32]);
        for (i, v) in images.data_mut().iter_mut().enumerate() {
            *v = ((i * 37) % 256) as f64 / 255.0;
        }
        let ds = LabeledDataset {
            images,
            labels: vec![1, 2, 3],
            provenance: Provenance::Origin,
            seed: 0,
        };
        let ip = dir.path().join("i");
        let lp = dir.path().join("l");
        save_idx(&ds, &ip, &lp).unwrap();
        let back = load_idx(&ip, &lp, None).unwrap();
        assert_eq!(back.labels, ds.labels);
        assert_eq!(back.images.data(), ds.images.data());
    }
}
