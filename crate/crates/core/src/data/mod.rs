//! Frame loading, clip windowing and corpus manifests.

mod clips;
mod frames;
mod manifest;
pub mod pgm;

pub use clips::{clip_starts, make_clip, to_clips, Clip, DEFAULT_STRIDE, DEFAULT_WINDOW};
pub use frames::{frame_file_name, load_frames, write_frames, FrameSequence};
pub use manifest::{
    format_ranges, parse_ranges, split_corpus, CorpusManifest, FrameRange, ManifestRow, Split, NORMAL_LABEL,
};
