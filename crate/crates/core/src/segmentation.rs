//! Per-frame object label maps: ingestion of external PGM masks and the
//! built-in whole-frame / grid fallbacks.
//!
//! Label `0` marks unsegmented pixels; objects are numbered `1..=M`.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::frame_io::{Plane, VideoMeta};

#[derive(Debug, Error)]
pub enum SegmentationError {
    #[error("missing label map for frame {0}")]
    MissingLabelMap(usize),
    #[error("label map {path} is {got_w}x{got_h}, video is {want_w}x{want_h}")]
    DimensionMismatch {
        path: PathBuf,
        got_w: usize,
        got_h: usize,
        want_w: usize,
        want_h: usize,
    },
    #[error("grid {rows}x{cols} is invalid (need 1 <= rows*cols <= 255)")]
    InvalidGrid { rows: usize, cols: usize },
    #[error("{path}: not a binary 8-bit PGM: {reason}")]
    BadPgm { path: PathBuf, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    pub index: usize,
    pub labels: Plane,
}

/// Label maps for a whole sequence together with the object count `M`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segmentation {
    pub maps: Vec<LabelMap>,
    pub object_count: usize,
}

impl Segmentation {
    /// Renumbers arbitrary ids to `1..=M` and records `M`.
    pub fn from_maps(maps: Vec<LabelMap>) -> Self {
        renumber(maps)
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    /// 1-based access.
    pub fn map(&self, t: usize) -> &LabelMap {
        &self.maps[t - 1]
    }
}

pub fn mask_file_name(t: usize) -> String {
    format!("frame_{t:06}.pgm")
}

/// Loads `frame_%06d.pgm` for t = 1..=T and renumbers ids to `1..=M` in
/// first-appearance order (raster order, then time).
pub fn load_label_maps(dir: impl AsRef<Path>, meta: &VideoMeta) -> Result<Segmentation, SegmentationError> {
    let dir = dir.as_ref();
    let mut maps = Vec::with_capacity(meta.frame_count);
    for t in 1..=meta.frame_count {
        let path = dir.join(mask_file_name(t));
        if !path.is_file() {
            return Err(SegmentationError::MissingLabelMap(t));
        }
        let bytes = fs::read(&path)?;
        let labels = parse_pgm(&bytes).map_err(|reason| SegmentationError::BadPgm {
            path: path.clone(),
            reason,
        })?;
        if labels.width != meta.width || labels.height != meta.height {
            return Err(SegmentationError::DimensionMismatch {
                path,
                got_w: labels.width,
                got_h: labels.height,
                want_w: meta.width,
                want_h: meta.height,
            });
        }
        maps.push(LabelMap { index: t, labels });
    }
    Ok(renumber(maps))
}

fn renumber(mut maps: Vec<LabelMap>) -> Segmentation {
    let mut remap: HashMap<u8, u8> = HashMap::new();
    let mut next = 1u16;
    for map in &maps {
        for &id in &map.labels.data {
            if id != 0 && !remap.contains_key(&id) {
                // an 8-bit mask holds at most 255 non-zero ids
                remap.insert(id, next as u8);
                next += 1;
            }
        }
    }
    for map in &mut maps {
        for id in &mut map.labels.data {
            if *id != 0 {
                *id = remap[id];
            }
        }
    }
    Segmentation {
        maps,
        object_count: remap.len(),
    }
}

/// Every pixel belongs to object 1.
pub fn whole_frame_segmentation(meta: &VideoMeta) -> Segmentation {
    let maps = (1..=meta.frame_count)
        .map(|t| LabelMap {
            index: t,
            labels: Plane::filled(meta.width, meta.height, 1),
        })
        .collect();
    Segmentation {
        maps,
        object_count: 1,
    }
}

/// Partitions each frame into `rows x cols` rectangles labelled in row-major
/// order. Block edges are at `floor(i * dim / n)`.
pub fn grid_segmentation(meta: &VideoMeta, rows: usize, cols: usize) -> Result<Segmentation, SegmentationError> {
    if rows == 0 || cols == 0 || rows * cols > 255 {
        return Err(SegmentationError::InvalidGrid { rows, cols });
    }
    let (w, h) = (meta.width, meta.height);
    let mut labels = Plane::filled(w, h, 0);
    for y in 0..h {
        let r = y * rows / h;
        for x in 0..w {
            let c = x * cols / w;
            labels.set(x, y, (r * cols + c + 1) as u8);
        }
    }
    let maps = (1..=meta.frame_count)
        .map(|t| LabelMap {
            index: t,
            labels: labels.clone(),
        })
        .collect();
    Ok(Segmentation {
        maps,
        object_count: rows * cols,
    })
}

pub fn write_label_maps(seg: &Segmentation, dir: impl AsRef<Path>) -> Result<(), SegmentationError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    for map in &seg.maps {
        fs::write(dir.join(mask_file_name(map.index)), encode_pgm(&map.labels))?;
    }
    Ok(())
}

pub fn encode_pgm(plane: &Plane) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", plane.width, plane.height).into_bytes();
    out.extend_from_slice(&plane.data);
    out
}

/// Parses a binary (P5) PGM with maxval 255. Comments (`#`) are allowed in
/// the header.
pub fn parse_pgm(bytes: &[u8]) -> Result<Plane, String> {
    let mut pos = 0usize;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err("truncated header".into());
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    if fields[0] != "P5" {
        return Err(format!("magic {:?}", fields[0]));
    }
    let parse = |s: &str| s.parse::<usize>().map_err(|_| format!("bad header field {s:?}"));
    let (w, h, maxval) = (parse(&fields[1])?, parse(&fields[2])?, parse(&fields[3])?);
    if maxval != 255 {
        return Err(format!("maxval {maxval}, expected 255"));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let need = w * h;
    if bytes.len() < pos + need {
        return Err("truncated raster".into());
    }
    Ok(Plane::new(w, h, bytes[pos..pos + need].to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame_io::Fps;

    fn meta(w: usize, h: usize, t: usize) -> VideoMeta {
        VideoMeta::new(w, h, t, Fps::new(25, 1)).unwrap()
    }

    fn write_masks(dir: &Path, planes: &[Plane]) {
        for (i, p) in planes.iter().enumerate() {
            fs::write(dir.join(mask_file_name(i + 1)), encode_pgm(p)).unwrap();
        }
    }

    #[test]
    fn constant_masks_give_single_object() {
        let dir = tempfile::tempdir().unwrap();
        write_masks(dir.path(), &vec![Plane::filled(4, 4, 1); 3]);
        let seg = load_label_maps(dir.path(), &meta(4, 4, 3)).unwrap();
        assert_eq!(seg.object_count, 1);
        assert_eq!(seg.len(), 3);
        assert!(seg.maps.iter().all(|m| m.labels.data.iter().all(|&v| v == 1)));
    }

    #[test]
    fn ids_are_renumbered_in_first_appearance_order() {
        let dir = tempfile::tempdir().unwrap();
        let a = Plane::new(2, 2, vec![0, 9, 9, 0]);
        let b = Plane::new(2, 2, vec![7, 9, 0, 0]);
        write_masks(dir.path(), &[a, b]);
        let seg = load_label_maps(dir.path(), &meta(2, 2, 2)).unwrap();
        assert_eq!(seg.object_count, 2);
        assert_eq!(seg.maps[0].labels.data, vec![0, 1, 1, 0]);
        assert_eq!(seg.maps[1].labels.data, vec![2, 1, 0, 0]);
        // stable across loads
        assert_eq!(seg, load_label_maps(dir.path(), &meta(2, 2, 2)).unwrap());
    }

    #[test]
    fn missing_frame_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        write_masks(dir.path(), &vec![Plane::filled(2, 2, 1); 5]);
        fs::remove_file(dir.path().join("frame_000003.pgm")).unwrap();
        let err = load_label_maps(dir.path(), &meta(2, 2, 5)).unwrap_err();
        assert!(matches!(err, SegmentationError::MissingLabelMap(3)));
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        write_masks(dir.path(), &[Plane::filled(4, 2, 1)]);
        let err = load_label_maps(dir.path(), &meta(2, 2, 1)).unwrap_err();
        assert!(matches!(err, SegmentationError::DimensionMismatch { got_w: 4, .. }));
    }

    #[test]
    fn pgm_header_with_comment() {
        let mut bytes = b"P5\n# made by hand\n2 1\n255\n".to_vec();
        bytes.extend_from_slice(&[3, 4]);
        let p = parse_pgm(&bytes).unwrap();
        assert_eq!((p.width, p.height, p.data.clone()), (2, 1, vec![3, 4]));
        assert!(parse_pgm(b"P2\n2 1\n255\n12").is_err());
        assert!(parse_pgm(b"P5\n2 1\n65535\n12").is_err());
    }

    #[test]
    fn whole_frame_is_all_ones() {
        let seg = whole_frame_segmentation(&meta(6, 4, 4));
        assert_eq!(seg.object_count, 1);
        assert_eq!(seg.len(), 4);
        assert!(seg.maps.iter().all(|m| m.labels.data.iter().all(|&v| v == 1)));
    }

    #[test]
    fn grid_one_by_one_equals_whole_frame() {
        let m = meta(6, 4, 3);
        assert_eq!(grid_segmentation(&m, 1, 1).unwrap(), whole_frame_segmentation(&m));
    }

    #[test]
    fn two_by_two_grid_on_four_by_four() {
        let seg = grid_segmentation(&meta(4, 4, 2), 2, 2).unwrap();
        assert_eq!(seg.object_count, 4);
        #[rustfmt::skip]
        let expected = vec![
            1, 1, 2, 2,
            1, 1, 2, 2,
            3, 3, 4, 4,
            3, 3, 4, 4,
        ];
        assert_eq!(seg.maps[0].labels.data, expected);
        assert_eq!(seg.maps[1].labels.data, expected);
    }

    #[test]
    fn grid_blocks_have_equal_counts_when_divisible() {
        let seg = grid_segmentation(&meta(12, 8, 1), 4, 3).unwrap();
        let mut counts = [0usize; 13];
        for &id in &seg.maps[0].labels.data {
            counts[id as usize] += 1;
        }
        assert_eq!(counts[0], 0);
        assert!(counts[1..].iter().all(|&c| c == 12 * 8 / 12));
    }

    #[test]
    fn oversized_grid_rejected() {
        assert!(matches!(
            grid_segmentation(&meta(4, 4, 1), 16, 16),
            Err(SegmentationError::InvalidGrid { rows: 16, cols: 16 })
        ));
        assert!(grid_segmentation(&meta(4, 4, 1), 0, 1).is_err());
    }
}
