//! Binary PGM export of frame magnitudes.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{CMat, ComplexTensor3};

/// Magnitude range that was mapped onto `[0, 255]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PgmRange {
    pub min: f64,
    pub max: f64,
}

/// Encodes `|frame|` as a `P5` image with `n1` rows and `n2` columns.
///
/// Magnitudes are scaled linearly from `[min, max]` to `[0, 255]`; a
/// constant (or non-finite) range maps every pixel to 128.
pub fn pgm_bytes(frame: &CMat) -> (Vec<u8>, PgmRange) {
    let (rows, cols) = frame.shape();
    let mags: Vec<f64> = frame.iter().map(|z| z.norm()).collect();
    let min = mags.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = mags.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = max - min;
    let degenerate = !(span > 0.0) || !span.is_finite();

    let mut out = format!("P5\n{cols} {rows}\n255\n").into_bytes();
    out.reserve(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            let v = frame[(i, j)].norm();
            out.push(if degenerate {
                128
            } else {
                (255.0 * (v - min) / span).round().clamp(0.0, 255.0) as u8
            });
        }
    }
    (out, PgmRange { min, max })
}

pub fn export_pgm(frame: &CMat, path: impl AsRef<Path>) -> Result<PgmRange> {
    let path = path.as_ref();
    let (bytes, range) = pgm_bytes(frame);
    fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    Ok(range)
}

/// Writes `frame_0000.pgm, ...` into `dir` plus a `range.csv` sidecar with
/// the per-frame magnitude range.
pub fn export_frames(stack: &ComplexTensor3, dir: impl AsRef<Path>) -> Result<Vec<PgmRange>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut sidecar = String::from("frame,min,max\n");
    let mut ranges = Vec::new();
    for k in 0..stack.dims().2 {
        let range = export_pgm(&stack.frame(k), dir.join(format!("frame_{k:04}.pgm")))?;
        writeln!(sidecar, "{k},{},{}", range.min, range.max).unwrap();
        ranges.push(range);
    }
    let path = dir.join("range.csv");
    fs::write(&path, sidecar).map_err(|e| Error::io(&path, e))?;
    Ok(ranges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::C64;

    /// Minimal `P5` reader: (width, height, maxval, pixels).
    fn parse(bytes: &[u8]) -> (usize, usize, usize, Vec<u8>) {
        let mut fields = Vec::new();
        let mut pos = 0;
        while fields.len() < 4 {
            while bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            let start = pos;
            while !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            fields.push(std::str::from_utf8(&bytes[start..pos]).unwrap().to_string());
        }
        assert_eq!(fields[0], "P5");
        let n = |i: usize| fields[i].parse::<usize>().unwrap();
        (n(1), n(2), n(3), bytes[pos + 1..].to_vec())
    }

    #[test]
    fn constant_frame_is_mid_gray() {
        let f = CMat::from_element(3, 2, C64::new(0.0, 2.0));
        let (bytes, range) = pgm_bytes(&f);
        let (w, h, maxval, px) = parse(&bytes);
        assert_eq!((w, h, maxval), (2, 3, 255));
        assert_eq!(px, vec![128; 6]);
        assert_eq!(range, PgmRange { min: 2.0, max: 2.0 });
    }

    #[test]
    fn extremes_map_to_full_range() {
        let f = CMat::from_row_slice(2, 2, &[C64::new(0.0, 0.0), C64::new(3.0, 4.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        let (bytes, range) = pgm_bytes(&f);
        let (w, h, _, px) = parse(&bytes);
        assert_eq!((w, h), (2, 2));
        assert_eq!(px, vec![0, 255, 51, 0]);
        assert_eq!(range, PgmRange { min: 0.0, max: 5.0 });
    }

    #[test]
    fn rows_follow_the_first_frame_dimension() {
        let f = CMat::from_fn(2, 5, |i, j| C64::from((i * 5 + j) as f64));
        let (bytes, _) = pgm_bytes(&f);
        let (w, h, _, px) = parse(&bytes);
        assert_eq!((w, h), (5, 2));
        assert!(px.windows(2).all(|p| p[0] < p[1]));
    }
}
