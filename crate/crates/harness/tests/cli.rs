use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn banddet(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_banddet"))
        .args(args)
        .current_dir(cwd)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const TINY: &str = r#"
name = "k100_b2_cnn"
architecture = "cnn"
channel = "banded-rayleigh"
k_train = 12
half_bandwidth = 2
samples = 400
validation_samples = 100
minibatch = 40
max_epochs = 2
depths = [8, 4]
seed = 9
"#;

#[test]
fn invalid_config_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), "name = \"x\"\nsnr_low_db = 14.0\nsnr_high_db = 5.0\n").unwrap();
    fs::write(dir.path().join("typo.toml"), "name = \"x\"\nlearning_rat = 0.1\n").unwrap();
    for file in ["bad.toml", "typo.toml"] {
        let out = banddet(&["train", "--config", file], dir.path());
        assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    }
}

#[test]
fn unknown_suite_lists_names() {
    let dir = tempfile::tempdir().unwrap();
    let out = banddet(&["suite", "fig99"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("fig7") && stderr(&out).contains("fig16"), "{}", stderr(&out));
}

#[test]
fn missing_checkpoint_names_the_training_command() {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir(dir.path().join("configs")).unwrap();
    fs::write(dir.path().join("configs/k100_b2_cnn.toml"), TINY).unwrap();
    let out = banddet(&["suite", "fig10", "--checkpoint", "ckpt"], dir.path());
    assert!(!out.status.success());
    let msg = stderr(&out);
    assert!(msg.contains("banddet train --config configs/k100_b2_cnn.toml --out-dir ckpt"), "{msg}");
}

#[test]
fn divergent_training_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = TINY.replace("seed = 9", "seed = 9\nlearning_rate = 1e300\nprecision = \"f64\"");
    fs::write(dir.path().join("cfg.toml"), cfg).unwrap();
    let out = banddet(&["train", "--config", "cfg.toml"], dir.path());
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
}

#[test]
fn train_eval_suite_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    fs::create_dir(root.join("configs")).unwrap();
    fs::write(root.join("configs/k100_b2_cnn.toml"), TINY).unwrap();

    let out = banddet(&["train", "--config", "configs/k100_b2_cnn.toml", "--out-dir", "ckpt"], root);
    assert!(out.status.success(), "{}", stderr(&out));
    for f in ["k100_b2_cnn.bdcd", "k100_b2_cnn_loss.csv", "k100_b2_cnn_config.toml"] {
        assert!(root.join("ckpt").join(f).is_file(), "{f}");
    }

    let eval = |out_dir: &str| {
        let args = [
            "eval",
            "--config",
            "configs/k100_b2_cnn.toml",
            "--checkpoint",
            "ckpt/k100_b2_cnn.bdcd",
            "--size",
            "30",
            "--snrs",
            "7,13",
            "--max-bits",
            "20000",
            "--out-dir",
            out_dir,
        ];
        let out = banddet(&args, root);
        assert!(out.status.success(), "{}", stderr(&out));
        fs::read(root.join(out_dir).join("ber.csv")).unwrap()
    };
    let a = eval("e1");
    assert_eq!(a, eval("e2"));
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("detector,snr_db,ber,ci_lo,ci_hi,bits\n"), "{text}");
    assert_eq!(text.lines().count(), 1 + 3 * 2);

    let out = banddet(&["suite", "fig10", "--checkpoint", "ckpt", "--out-dir", "res"], root);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = fs::read_to_string(root.join("res/fig10/ber.csv")).unwrap();
    for label in ["cnn", "lmmse", "ls"] {
        assert!(csv.lines().any(|l| l.starts_with(&format!("{label},"))), "{csv}");
    }
    let manifest = fs::read_to_string(root.join("res/fig10/manifest.toml")).unwrap();
    assert!(manifest.contains("checkpoint_sha256") && manifest.contains("seed = 1"), "{manifest}");
}
