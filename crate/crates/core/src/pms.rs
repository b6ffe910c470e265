//! Program memory spectra: a memory trace turned into a square RGB image.
//!
//! Names and values are encoded with a position-weighted byte sum, the three
//! flat lists are laid out column by column in a `ceil(sqrt(m))` square, and
//! each channel is min-max scaled to 0..=255 on its own.

use crate::memcollect::MemoryTrace;
use serde::{Deserialize, Serialize};
use std::io::Cursor;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PmsError {
    #[error("memory trace has no entries; cannot build an image")]
    Degenerate,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed PNG: {0}")]
    Malformed(String),
}

/// Position-weighted byte sum: `sum (i + 1) * byte[i]`.
pub fn str_to_int(s: &str) -> u64 {
    s.bytes()
        .enumerate()
        .map(|(i, b)| (i as u64 + 1) * b as u64)
        .sum()
}

/// The three channel lists, each of length `m`, in snapshot then entry order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Flat {
    pub names: Vec<u64>,
    pub values: Vec<u64>,
    pub depths: Vec<u64>,
}

pub fn flatten(mt: &MemoryTrace) -> Flat {
    let mut f = Flat::default();
    for e in mt.snapshots.iter().flat_map(|s| &s.entries) {
        f.names.push(str_to_int(&e.name));
        f.values.push(str_to_int(&e.value));
        f.depths.push(e.depth as u64);
    }
    f
}

pub fn side_for(m: usize) -> usize {
    let mut s = (m as f64).sqrt() as usize;
    while s * s < m {
        s += 1;
    }
    while s > 0 && (s - 1) * (s - 1) >= m {
        s -= 1;
    }
    s
}

/// Fills a square plane column by column, padding with zeros. The result is
/// row-major: cell `(row, col)` sits at `row * side + col`.
pub fn reshape_square(list: &[u64]) -> Result<(usize, Vec<u64>), PmsError> {
    if list.is_empty() {
        return Err(PmsError::Degenerate);
    }
    let side = side_for(list.len());
    let mut plane = vec![0u64; side * side];
    for (k, &v) in list.iter().enumerate() {
        plane[(k % side) * side + k / side] = v;
    }
    Ok((side, plane))
}

/// Min-max scales one plane to 0..=255, rounding to nearest. A constant
/// plane maps to zeros.
pub fn normalize_plane(plane: &[u64]) -> Vec<u8> {
    let (Some(&lo), Some(&hi)) = (plane.iter().min(), plane.iter().max()) else {
        return Vec::new();
    };
    if lo == hi {
        return vec![0; plane.len()];
    }
    let range = (hi - lo) as f64;
    plane
        .iter()
        .map(|&v| ((v - lo) as f64 * 255.0 / range).round() as u8)
        .collect()
}

/// A normalized spectrum. Pixel `(row, col)` is `pixels[row * side + col]`
/// with channels (names, values, depths) as (R, G, B).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PmsImage {
    pub side: usize,
    pub pixels: Vec<[u8; 3]>,
}

/// Metadata written next to each PNG.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sidecar {
    pub original_side: usize,
    pub m: usize,
}

impl PmsImage {
    /// 1x1 black image.
    pub fn blank() -> Self {
        PmsImage {
            side: 1,
            pixels: vec![[0; 3]],
        }
    }

    pub fn from_trace(mt: &MemoryTrace) -> Result<Self, PmsError> {
        let f = flatten(mt);
        let (side, names) = reshape_square(&f.names)?;
        let (_, values) = reshape_square(&f.values)?;
        let (_, depths) = reshape_square(&f.depths)?;
        let (r, g, b) = (
            normalize_plane(&names),
            normalize_plane(&values),
            normalize_plane(&depths),
        );
        let pixels = (0..side * side).map(|i| [r[i], g[i], b[i]]).collect();
        Ok(PmsImage { side, pixels })
    }

    pub fn to_png_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, self.side as u32, self.side as u32);
            enc.set_color(png::ColorType::Rgb);
            enc.set_depth(png::BitDepth::Eight);
            let mut w = enc.write_header().expect("writing to a Vec cannot fail");
            let data: Vec<u8> = self.pixels.iter().flatten().copied().collect();
            w.write_image_data(&data).expect("buffer matches header");
        }
        out
    }

    pub fn from_png_bytes(bytes: &[u8]) -> Result<Self, PmsError> {
        let bad = |e: png::DecodingError| PmsError::Malformed(e.to_string());
        let mut reader = png::Decoder::new(Cursor::new(bytes))
            .read_info()
            .map_err(bad)?;
        let size = reader
            .output_buffer_size()
            .ok_or_else(|| PmsError::Malformed("image too large".into()))?;
        let mut buf = vec![0u8; size];
        let info = reader.next_frame(&mut buf).map_err(bad)?;
        if info.color_type != png::ColorType::Rgb || info.bit_depth != png::BitDepth::Eight {
            return Err(PmsError::Malformed(format!(
                "expected 8-bit RGB, got {:?} {:?}",
                info.color_type, info.bit_depth
            )));
        }
        if info.width != info.height || info.width == 0 {
            return Err(PmsError::Malformed(format!(
                "expected a square image, got {}x{}",
                info.width, info.height
            )));
        }
        let side = info.width as usize;
        let pixels = buf[..side * side * 3]
            .chunks_exact(3)
            .map(|c| [c[0], c[1], c[2]])
            .collect();
        Ok(PmsImage { side, pixels })
    }

    pub fn write_png(&self, path: &Path) -> Result<(), PmsError> {
        std::fs::write(path, self.to_png_bytes())?;
        Ok(())
    }

    pub fn read_png(path: &Path) -> Result<Self, PmsError> {
        Self::from_png_bytes(&std::fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::memcollect::{MemoryEntry, MemorySnapshot};
    use proptest::prelude::*;

    fn entry(name: &str, value: &str, depth: u32) -> MemoryEntry {
        MemoryEntry {
            name: name.into(),
            value: value.into(),
            depth,
        }
    }

    fn trace(sizes: &[usize]) -> MemoryTrace {
        let snapshots = sizes
            .iter()
            .enumerate()
            .map(|(j, &n)| MemorySnapshot {
                breakpoint: j as u32 + 1,
                seq: j as u32 + 1,
                entries: (0..n)
                    .map(|i| entry(&format!("v{j}_{i}"), &i.to_string(), 1 + (i % 2) as u32))
                    .collect(),
            })
            .collect();
        MemoryTrace::new("t", snapshots)
    }

    #[test]
    fn encoding_examples() {
        assert_eq!(str_to_int("Ee01"), 611);
        assert_eq!(str_to_int(""), 0);
        assert_eq!(str_to_int("ab"), 293);
        assert_eq!(str_to_int("ba"), 292);
    }

    // With equally spaced bytes two rotations of the same string reach the
    // same sum. Only swapping two characters is guaranteed to change it.
    #[test]
    fn cyclic_permutations_can_collide() {
        assert_eq!(str_to_int("#$\""), str_to_int("$\"#"));
        assert_ne!(str_to_int("#$\""), str_to_int("\"#$"));
    }

    #[test]
    fn flatten_follows_snapshot_order() {
        let f = flatten(&trace(&[2, 3]));
        assert_eq!(f.names.len(), 5);
        assert_eq!(f.names[0], str_to_int("v0_0"));
        assert_eq!(f.names[2], str_to_int("v1_0"));
        let one = MemoryTrace::new(
            "t",
            vec![MemorySnapshot {
                breakpoint: 1,
                seq: 1,
                entries: vec![entry("x", "7", 1)],
            }],
        );
        let f = flatten(&one);
        assert_eq!(
            (f.names, f.values, f.depths),
            (vec![120], vec![55], vec![1])
        );
        assert!(flatten(&trace(&[])).names.is_empty());
    }

    #[test]
    fn reshape_is_column_major() {
        let (side, p) = reshape_square(&[1, 2, 3, 4, 5]).unwrap();
        assert_eq!(side, 3);
        // rows: (a d 0), (b e 0), (c 0 0)
        assert_eq!(p, vec![1, 4, 0, 2, 5, 0, 3, 0, 0]);
        assert_eq!(
            reshape_square(&[1, 2, 3, 4]).unwrap(),
            (2, vec![1, 3, 2, 4])
        );
        assert_eq!(reshape_square(&[9]).unwrap(), (1, vec![9]));
        assert!(matches!(reshape_square(&[]), Err(PmsError::Degenerate)));
    }

    #[test]
    fn normalization_examples() {
        assert_eq!(normalize_plane(&[0, 50, 100]), vec![0, 128, 255]);
        assert_eq!(normalize_plane(&[7, 7, 7]), vec![0, 0, 0]);
        let id: Vec<u64> = vec![0, 17, 255, 3];
        assert_eq!(normalize_plane(&id), vec![0, 17, 255, 3]);
    }

    #[test]
    fn empty_trace_is_degenerate() {
        assert!(matches!(
            PmsImage::from_trace(&trace(&[])),
            Err(PmsError::Degenerate)
        ));
    }

    #[test]
    fn png_round_trips() {
        for sizes in [&[5usize, 4][..], &[1][..]] {
            let img = PmsImage::from_trace(&trace(sizes)).unwrap();
            let back = PmsImage::from_png_bytes(&img.to_png_bytes()).unwrap();
            assert_eq!(back, img);
        }
        assert_eq!(PmsImage::from_trace(&trace(&[5, 4])).unwrap().side, 3);
    }

    #[test]
    fn png_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.png");
        let img = PmsImage::from_trace(&trace(&[3, 3, 3])).unwrap();
        img.write_png(&path).unwrap();
        assert_eq!(PmsImage::read_png(&path).unwrap(), img);
    }

    #[test]
    fn truncated_png_is_malformed() {
        let bytes = PmsImage::from_trace(&trace(&[4])).unwrap().to_png_bytes();
        for cut in [0, 8, 20, bytes.len() - 5] {
            assert!(matches!(
                PmsImage::from_png_bytes(&bytes[..cut]),
                Err(PmsError::Malformed(_))
            ));
        }
    }

    proptest! {
        #[test]
        fn side_is_ceil_sqrt(m in 1usize..5000) {
            let s = side_for(m);
            prop_assert!(s * s >= m && (s - 1) * (s - 1) < m);
            let list: Vec<u64> = (1..=m as u64).collect();
            let (side, plane) = reshape_square(&list).unwrap();
            prop_assert_eq!(side, s);
            prop_assert_eq!(plane.iter().filter(|&&v| v != 0).count(), m);
        }

        #[test]
        fn swapping_distinct_characters_changes_the_encoding(
            chars in proptest::sample::subsequence((b'!'..=b'~').collect::<Vec<u8>>(), 2..12),
            i in any::<proptest::sample::Index>(),
            j in any::<proptest::sample::Index>(),
        ) {
            let (i, j) = (i.index(chars.len()), j.index(chars.len()));
            prop_assume!(i != j);
            let mut p = chars.clone();
            p.swap(i, j);
            let a = String::from_utf8(chars).unwrap();
            let b = String::from_utf8(p).unwrap();
            prop_assert_ne!(str_to_int(&a), str_to_int(&b));
        }

        #[test]
        fn normalized_planes_span_the_range(v in proptest::collection::vec(0u64..10_000, 1..50)) {
            let n = normalize_plane(&v);
            let lo = *v.iter().min().unwrap();
            let hi = *v.iter().max().unwrap();
            if lo == hi {
                prop_assert!(n.iter().all(|&x| x == 0));
            } else {
                prop_assert_eq!(*n.iter().min().unwrap(), 0);
                prop_assert_eq!(*n.iter().max().unwrap(), 255);
            }
        }
    }
}
