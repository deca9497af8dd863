use glitchguard_core::data::{to_clips, FrameSequence};
use glitchguard_core::numerics::Tensor;
use glitchguard_core::verify::check_windowing;
use proptest::prelude::*;

fn indexed(n: usize) -> FrameSequence {
    FrameSequence::new("i", 1, 1, (0..n).map(|t| Tensor::full(&[1, 1, 1], t as f32)).collect())
}

#[test]
fn random_triples() {
    assert_eq!(check_windowing(200, 99), 0);
}

#[test]
fn three_hundred_frames() {
    assert_eq!(to_clips(&indexed(300), 10, 1).unwrap().len(), 291);
}

proptest! {
    #[test]
    fn clips_are_gap_free(w in 1usize..12, extra in 0usize..40, stride in 1usize..6) {
        let n = w + extra;
        let clips = to_clips(&indexed(n), w, stride).unwrap();
        prop_assert_eq!(clips.len(), (n - w) / stride + 1);
        for (k, c) in clips.iter().enumerate() {
            prop_assert_eq!(c.start_frame, k * stride);
            let frames: Vec<f32> = c.tensor.data().to_vec();
            let expected: Vec<f32> = (c.start_frame..c.start_frame + w).map(|t| t as f32).collect();
            prop_assert_eq!(frames, expected);
        }
    }
}
