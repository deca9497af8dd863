//! Procedural gameplay-like scenes and pixel-exact bug injectors.

mod corpus;
mod inject;
mod scene;

pub use corpus::{
    default_duration, make_labeled_corpus, plan_injection, render_corpus, render_exemplars, CorpusPlan, CorpusVideo,
    EXEMPLARS_FILE, MANIFEST_FILE, VIDEOS_DIR,
};
pub use inject::{inject_bug, BugCategory, BugInjection, Region, VOID_INTENSITY};
pub use scene::{render_normal, Background, SceneSpec, Sprite, SpriteShape, Trajectory, Wave};
