use std::fs;
use std::path::{Path, PathBuf};

use crate::data::pgm::{decode_pgm, encode_pgm, GrayImage};
use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Ordered grayscale frames of one recording, values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameSequence {
    pub video_id: String,
    pub height: usize,
    pub width: usize,
    /// Each frame is a `[1, H, W]` tensor.
    pub frames: Vec<Tensor<f32>>,
    pub source_paths: Vec<PathBuf>,
}

impl FrameSequence {
    /// Panics if frame shapes disagree with `height`/`width`.
    pub fn new(video_id: impl Into<String>, height: usize, width: usize, frames: Vec<Tensor<f32>>) -> Self {
        assert!(
            frames.iter().all(|f| f.shape() == [1, height, width]),
            "every frame must be [1, {height}, {width}]"
        );
        FrameSequence {
            video_id: video_id.into(),
            height,
            width,
            frames,
            source_paths: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Rounds every pixel to the nearest 8-bit level, as writing and
    /// re-reading would.
    pub fn quantized(&self) -> FrameSequence {
        let mut out = self.clone();
        for f in &mut out.frames {
            for v in f.data_mut() {
                *v = quantize(*v) as f32 / 255.0;
            }
        }
        out
    }
}

pub fn frame_file_name(index: usize) -> String {
    format!("frame_{index:06}.pgm")
}

fn parse_frame_index(name: &str) -> Option<usize> {
    let digits = name.strip_prefix("frame_")?.strip_suffix(".pgm")?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

#[inline]
fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Reads every `frame_NNNNNN.pgm` in `dir`, ordered by numeric index.
/// The video id is the directory name.
pub fn load_frames(dir: impl AsRef<Path>) -> Result<FrameSequence> {
    let dir = dir.as_ref();
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name();
        if let Some(idx) = name.to_str().and_then(parse_frame_index) {
            files.push((idx, entry.path()));
        }
    }
    if files.is_empty() {
        return Err(Error::EmptyDirectory(dir.to_path_buf()));
    }
    files.sort();

    let mut frames = Vec::with_capacity(files.len());
    let mut dims = None;
    for (_, path) in &files {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let img = decode_pgm(&bytes, path)?;
        let (eh, ew) = *dims.get_or_insert((img.height, img.width));
        if (img.height, img.width) != (eh, ew) {
            return Err(Error::InconsistentFrame {
                path: path.clone(),
                expected_h: eh,
                expected_w: ew,
                found_h: img.height,
                found_w: img.width,
            });
        }
        let data = img.pixels.iter().map(|&p| p as f32 / 255.0).collect();
        frames.push(Tensor::new(vec![1, img.height, img.width], data)?);
    }
    let (height, width) = dims.expect("at least one frame");
    let video_id = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(FrameSequence {
        video_id,
        height,
        width,
        frames,
        source_paths: files.into_iter().map(|(_, p)| p).collect(),
    })
}

/// Writes frames as `frame_000001.pgm`, `frame_000002.pgm`, ... (1-based).
pub fn write_frames(seq: &FrameSequence, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::with_capacity(seq.len());
    for (i, frame) in seq.frames.iter().enumerate() {
        let img = GrayImage {
            width: seq.width,
            height: seq.height,
            pixels: frame.data().iter().map(|&v| quantize(v)).collect(),
        };
        let path = dir.join(frame_file_name(i + 1));
        fs::write(&path, encode_pgm(&img)).map_err(|e| Error::io(&path, e))?;
        paths.push(path);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_raw(dir: &Path, name: &str, w: usize, h: usize, value: u8) {
        let img = GrayImage {
            width: w,
            height: h,
            pixels: vec![value; w * h],
        };
        fs::write(dir.join(name), encode_pgm(&img)).unwrap();
    }

    #[test]
    fn scales_to_unit_range() {
        let tmp = tempfile::tempdir().unwrap();
        for i in 1..=3 {
            write_raw(tmp.path(), &frame_file_name(i), 4, 4, 255);
        }
        write_raw(tmp.path(), "notes.pgm", 4, 4, 0);
        let seq = load_frames(tmp.path()).unwrap();
        assert_eq!(seq.len(), 3);
        assert!(seq.frames.iter().all(|f| f.data().iter().all(|&v| v == 1.0)));

        let tmp = tempfile::tempdir().unwrap();
        write_raw(tmp.path(), &frame_file_name(1), 2, 2, 0);
        assert!(load_frames(tmp.path()).unwrap().frames[0]
            .data()
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn orders_by_numeric_index() {
        let tmp = tempfile::tempdir().unwrap();
        write_raw(tmp.path(), "frame_000002.pgm", 2, 2, 20);
        write_raw(tmp.path(), "frame_000001.pgm", 2, 2, 10);
        write_raw(tmp.path(), "frame_000010.pgm", 2, 2, 30);
        let seq = load_frames(tmp.path()).unwrap();
        let firsts: Vec<f32> = seq.frames.iter().map(|f| f.data()[0] * 255.0).collect();
        assert_eq!(firsts, vec![10.0, 20.0, 30.0]);
        assert!(seq.source_paths[0].ends_with("frame_000001.pgm"));
    }

    #[test]
    fn empty_and_inconsistent_directories() {
        let tmp = tempfile::tempdir().unwrap();
        assert!(matches!(load_frames(tmp.path()), Err(Error::EmptyDirectory(_))));
        write_raw(tmp.path(), &frame_file_name(1), 4, 4, 1);
        write_raw(tmp.path(), &frame_file_name(2), 4, 5, 1);
        match load_frames(tmp.path()) {
            Err(Error::InconsistentFrame { path, .. }) => assert!(path.ends_with("frame_000002.pgm")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_file_is_reported() {
        let tmp = tempfile::tempdir().unwrap();
        fs::write(tmp.path().join(frame_file_name(1)), b"P5\n4 4\n").unwrap();
        assert!(matches!(load_frames(tmp.path()), Err(Error::MalformedPgm { .. })));
    }
}
