use glitchguard_core::data::{make_clip, Clip, FrameSequence};
use glitchguard_core::model::network::loss_and_grad;
use glitchguard_core::model::{
    init_params, load_checkpoint, save_checkpoint, train, AutoencoderConfig, EncoderLayer, ModelCheckpoint,
    TrainingHyper,
};
use glitchguard_core::synth::SceneSpec;
use glitchguard_core::Error;

fn tiny_config(seed: u64) -> AutoencoderConfig {
    AutoencoderConfig {
        frame_height: 16,
        frame_width: 16,
        window: 4,
        encoder: vec![EncoderLayer::new(4, 5, 2, 2), EncoderLayer::new(4, 3, 2, 1)],
        lstm_hidden: vec![8, 4, 8],
        lstm_kernel: 3,
        seed,
    }
}

/// 50 clips, each one rendered frame repeated over the window.
fn constant_scene_clips(window: usize) -> Vec<Clip> {
    (0..50u64)
        .map(|k| {
            let spec = SceneSpec::random(100 + k % 5, 16, 16);
            let frame = spec.render_frame(k as usize);
            let seq = FrameSequence::new(format!("still_{k}"), 16, 16, vec![frame; window]);
            make_clip(&seq, 0, window)
        })
        .collect()
}

fn dataset_loss(ck: &ModelCheckpoint, clips: &[Clip]) -> f64 {
    let arch = ck.config.architecture().unwrap();
    let total: f64 = clips
        .iter()
        .map(|c| loss_and_grad(&arch, &ck.params, &c.tensor).unwrap().0 as f64)
        .sum();
    total / clips.len() as f64
}

#[test]
fn tiny_model_halves_loss_on_constant_scenes() {
    let clips = constant_scene_clips(4);
    let init = init_params(&tiny_config(11)).unwrap();
    let hyper = TrainingHyper {
        max_steps: 200,
        ..TrainingHyper::default()
    };
    let (trained, history) = train(&init, &clips, &hyper).unwrap();
    assert_eq!(history.len(), 200);
    let before = dataset_loss(&init, &clips);
    let after = dataset_loss(&trained, &clips);
    assert!(after <= 0.5 * before, "loss {before} -> {after}");
    assert_eq!(trained.meta.steps, 200);
}

#[test]
fn training_is_reproducible() {
    let clips = constant_scene_clips(4);
    let init = init_params(&tiny_config(3)).unwrap();
    let hyper = TrainingHyper {
        max_steps: 15,
        batch_size: 3,
        ..TrainingHyper::default()
    };
    let (a, ha) = train(&init, &clips, &hyper).unwrap();
    let (b, hb) = train(&init, &clips, &hyper).unwrap();
    assert!(a.bit_identical(&b));
    assert_eq!(
        ha.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
        hb.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    );
}

#[test]
fn checkpoint_file_roundtrip_and_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    let clips = constant_scene_clips(4);
    let (ck, _) = train(
        &init_params(&tiny_config(5)).unwrap(),
        &clips[..4],
        &TrainingHyper {
            max_steps: 2,
            ..TrainingHyper::default()
        },
    )
    .unwrap();
    save_checkpoint(&ck, &path).unwrap();
    let loaded = load_checkpoint(&path).unwrap();
    assert!(loaded.bit_identical(&ck));
    assert_eq!(loaded.meta, ck.meta);

    let bytes = std::fs::read(&path).unwrap();
    let mut bad = bytes.clone();
    bad[0] ^= 0xff;
    std::fs::write(&path, &bad).unwrap();
    assert!(matches!(load_checkpoint(&path), Err(Error::BadMagic)));

    std::fs::write(&path, &bytes[..bytes.len() - 7]).unwrap();
    assert!(matches!(load_checkpoint(&path), Err(Error::Truncated(_))));

    let mut future = bytes.clone();
    future[4..8].copy_from_slice(&99u32.to_le_bytes());
    std::fs::write(&path, &future).unwrap();
    assert!(matches!(
        load_checkpoint(&path),
        Err(Error::VersionMismatch { found: 99, .. })
    ));

    assert!(matches!(
        load_checkpoint(dir.path().join("missing")),
        Err(Error::Io { .. })
    ));
}
