use std::path::Path;
use std::process::{Command, Output};

use glitchguard::{cmd_eval, cmd_gen, cmd_train, RunConfig};
use glitchguard_core::clustering::{ClusterReport, ReportRow};
use glitchguard_core::model::{init_params, load_checkpoint};

const TINY: &str = "\
seed = 5
frame_height = 16
frame_width = 16
corpus.normal_videos = 4
corpus.normal_frames = 12
corpus.videos_per_category = 2
corpus.buggy_frames = 12
model.window = 4
model.encoder = 4:5:2:2,4:3:2:1
model.lstm_hidden = 4,4,4
train.max_steps = 5
";

fn tiny() -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.apply_text(TINY, "tiny").unwrap();
    cfg.validate().unwrap();
    cfg
}

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_glitchguard"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn error_line(o: &Output) -> String {
    stderr(o)
        .lines()
        .find(|l| l.starts_with("ERROR "))
        .unwrap_or("")
        .to_string()
}

#[test]
fn pipeline_through_the_binary() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    std::fs::write(d.join("tiny.conf"), TINY).unwrap();
    let steps: [&[&str]; 6] = [
        &["gen", "--config", "tiny.conf", "--out", "corpus"],
        &[
            "train",
            "corpus/manifest.csv",
            "--config",
            "tiny.conf",
            "--out",
            "model.ckpt",
        ],
        &[
            "score",
            "model.ckpt",
            "corpus/manifest.csv",
            "--config",
            "tiny.conf",
            "--out",
            "curves",
        ],
        &[
            "score",
            "model.ckpt",
            "corpus/exemplars.csv",
            "--config",
            "tiny.conf",
            "--out",
            "curves",
        ],
        &[
            "cluster",
            "curves",
            "corpus/manifest.csv",
            "corpus/exemplars.csv",
            "--config",
            "tiny.conf",
            "--out",
            "report.csv",
        ],
        &[
            "plot",
            "curves/black_screen_000.csv",
            "--category",
            "black_screen",
            "--config",
            "tiny.conf",
            "--out",
            "bs.svg",
        ],
    ];
    for args in steps {
        let o = run(d, args);
        assert!(o.status.success(), "{args:?}: {}", stderr(&o));
        assert!(
            stderr(&o).contains("[config] sha256 = "),
            "{args:?} does not log the digest"
        );
    }
    let loss = std::fs::read_to_string(d.join("model.loss.csv")).unwrap();
    assert_eq!(loss.lines().count(), 6);
    assert!(d.join("curves/normal_003.csv").exists() || d.join("curves/normal_000.csv").exists());
    assert!(std::fs::read_to_string(d.join("bs.svg")).unwrap().starts_with("<?xml"));

    let o = run(
        d,
        &[
            "eval",
            "report.csv",
            "--curves",
            "curves",
            "--manifest",
            "corpus/manifest.csv",
            "--config",
            "tiny.conf",
            "--out",
            "eval.txt",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8_lossy(&o.stdout);
    let h: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("homogeneity = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((0.0..=1.0).contains(&h));
    assert!(text.contains("without black_screen"));
    assert_eq!(std::fs::read_to_string(d.join("eval.txt")).unwrap(), text);

    // Re-running a stage reproduces its output byte for byte.
    let before = std::fs::read(d.join("report.csv")).unwrap();
    let o = run(d, steps[4]);
    assert!(o.status.success());
    assert_eq!(std::fs::read(d.join("report.csv")).unwrap(), before);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();

    let o = run(d, &["train", "nowhere/manifest.csv"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(error_line(&o).starts_with("ERROR 2: "), "{}", stderr(&o));

    let o = run(d, &["gen", "--config", "missing.conf"]);
    assert_eq!(o.status.code(), Some(2));

    std::fs::write(d.join("bad.conf"), "seed = 1\nmodel.depth = 3\n").unwrap();
    let o = run(d, &["gen", "--config", "bad.conf"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(error_line(&o).contains("model.depth"), "{}", stderr(&o));

    let o = run(d, &["gen", "--set", "score.threshold=2"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(error_line(&o).contains("score.threshold"));

    let o = run(d, &["frobnicate"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(error_line(&o).starts_with("ERROR 3: "));

    // Exploding updates make the gradient non-finite.
    std::fs::write(d.join("tiny.conf"), TINY).unwrap();
    let o = run(d, &["gen", "--config", "tiny.conf", "--out", "corpus"]);
    assert!(o.status.success());
    let o = run(
        d,
        &[
            "train",
            "corpus/manifest.csv",
            "--config",
            "tiny.conf",
            "--set",
            "train.lr=1e30",
            "--set",
            "train.weight_decay=1e30",
        ],
    );
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert!(error_line(&o).starts_with("ERROR 4: "));
}

#[test]
fn config_flags_override_file() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("tiny.conf"), TINY).unwrap();
    let o = run(
        tmp.path(),
        &[
            "config",
            "--config",
            "tiny.conf",
            "--seed",
            "9",
            "--set",
            "threshold.boundary_hole=0.4",
        ],
    );
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("seed = 9\n"));
    assert!(text.contains("threshold.boundary_hole = 0.4\n"));
    assert!(text.contains("threshold.black_screen = 0.5\n"));
    assert!(text.contains("model.lstm_hidden = 4,4,4\n"));
}

#[test]
fn zero_steps_checkpoint_equals_initialization() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = tiny();
    cfg.set("train.max_steps", "0").unwrap();
    cmd_gen(&cfg, &tmp.path().join("corpus")).unwrap();
    let out = tmp.path().join("zero.ckpt");
    let (_, history) = cmd_train(&cfg, &tmp.path().join("corpus/manifest.csv"), &out).unwrap();
    assert!(history.is_empty());
    let saved = load_checkpoint(&out).unwrap();
    assert!(saved.bit_identical(&init_params(&cfg.model_config()).unwrap()));
    assert_eq!(saved.meta.steps, 0);
}

#[test]
fn perfect_clustering_scores_one() {
    let tmp = tempfile::tempdir().unwrap();
    let rows = ["a", "b", "c", "d"]
        .iter()
        .enumerate()
        .map(|(i, v)| ReportRow {
            video_id: format!("v_{v}"),
            cluster_id: i as i64,
            assigned_category: format!("cat_{v}"),
            true_label: format!("cat_{v}"),
        })
        .collect();
    let report = ClusterReport {
        rows,
        eps: 0.5,
        min_pts: 1,
        homogeneity: 1.0,
    };
    let path = tmp.path().join("report.csv");
    report.save(&path).unwrap();
    let summary = cmd_eval(&RunConfig::default(), &path, None, &tmp.path().join("eval.txt")).unwrap();
    assert_eq!(summary.homogeneity, 1.0);
    assert_eq!(summary.clusters, 4);
    assert!(summary
        .removal
        .iter()
        .all(|r| r.after_clustering == 1.0 && r.reclustered.is_none()));
    assert!(summary.detection.is_none());
}
