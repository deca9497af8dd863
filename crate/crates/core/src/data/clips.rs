use crate::data::frames::FrameSequence;
use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Default clip length in frames.
pub const DEFAULT_WINDOW: usize = 10;
pub const DEFAULT_STRIDE: usize = 1;

/// `window` consecutive frames of one sequence as a `[W, 1, H, W']` tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Clip {
    pub start_frame: usize,
    pub tensor: Tensor<f32>,
}

impl Clip {
    pub fn window(&self) -> usize {
        self.tensor.shape()[0]
    }
}

/// Start indices `0, stride, 2·stride, ...` of every full window.
pub fn clip_starts(len: usize, window: usize, stride: usize) -> Result<Vec<usize>> {
    if window == 0 || stride == 0 {
        return Err(Error::InvalidArgument("window and stride must be >= 1".into()));
    }
    if len < window {
        return Err(Error::SequenceTooShort { len, required: window });
    }
    Ok((0..=(len - window) / stride).map(|k| k * stride).collect())
}

pub fn make_clip(seq: &FrameSequence, start: usize, window: usize) -> Clip {
    let mut data = Vec::with_capacity(window * seq.height * seq.width);
    for f in &seq.frames[start..start + window] {
        data.extend_from_slice(f.data());
    }
    Clip {
        start_frame: start,
        tensor: Tensor::new(vec![window, 1, seq.height, seq.width], data).expect("frames share one shape"),
    }
}

/// Sliding windows over `seq`; `floor((N − W) / stride) + 1` clips.
pub fn to_clips(seq: &FrameSequence, window: usize, stride: usize) -> Result<Vec<Clip>> {
    Ok(clip_starts(seq.len(), window, stride)?
        .into_iter()
        .map(|s| make_clip(seq, s, window))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(n: usize) -> FrameSequence {
        let frames = (0..n).map(|i| Tensor::full(&[1, 2, 2], i as f32)).collect();
        FrameSequence::new("v", 2, 2, frames)
    }

    #[test]
    fn counts() {
        assert_eq!(to_clips(&seq(300), 10, 1).unwrap().len(), 291);
        let one = to_clips(&seq(10), 10, 1).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].start_frame, 0);
        let starts: Vec<usize> = to_clips(&seq(20), 10, 2)
            .unwrap()
            .iter()
            .map(|c| c.start_frame)
            .collect();
        assert_eq!(starts, vec![0, 2, 4, 6, 8, 10]);
    }

    #[test]
    fn too_short_states_minimum() {
        let err = to_clips(&seq(9), 10, 1).unwrap_err();
        assert!(err.to_string().contains("at least 10"), "{err}");
    }

    #[test]
    fn clip_holds_consecutive_frames() {
        let clips = to_clips(&seq(12), 4, 3).unwrap();
        let c = &clips[2];
        assert_eq!(c.tensor.shape(), &[4, 1, 2, 2]);
        for t in 0..4 {
            assert_eq!(c.tensor.outer(t)[0], (6 + t) as f32);
        }
    }
}
