//! End-to-end runs of the `cents` binary through its public command surface.

use std::path::{Path, PathBuf};
use std::process::Command;

fn cents() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cents"))
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join("cents_bin_tests").join(name);
    if dir.exists() {
        std::fs::remove_dir_all(&dir).unwrap();
    }
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path) -> PathBuf {
    let path = dir.join("tiny.conf");
    std::fs::write(
        &path,
        "[faux]\n\
         n_households = 16\n\
         days_per_household = 4\n\
         \n\
         [train]\n\
         model = diffusion\n\
         epochs = 2\n\
         batch_size = 32\n\
         normalizer_steps = 150\n\
         t_steps = 10\n\
         trunk_hidden = 16\n\
         encoder_hidden = 16\n\
         head_hidden = 8\n\
         noise_dim = 8\n\
         h_dim = 8\n\
         embed_dim = 8\n\
         top_k = 3\n\
         seed = 9\n",
    )
    .unwrap();
    path
}

#[test]
fn pipeline_runs_and_is_deterministic() {
    let dir = tmp("pipeline");
    let conf = write_config(&dir);
    let data = dir.join("data");
    let run = |args: &[&str]| {
        let out = cents().args(args).output().unwrap();
        assert!(
            out.status.success(),
            "command {:?} failed:\n{}",
            args,
            String::from_utf8_lossy(&out.stderr)
        );
        out
    };

    run(&[
        "synth-data",
        "--config",
        conf.to_str().unwrap(),
        "--out",
        data.to_str().unwrap(),
        "--seed",
        "1",
    ]);
    for f in ["profiles.csv", "metadata.csv", "ground_truth.csv"] {
        assert!(data.join(f).exists(), "missing {f}");
    }

    let train_args = |out: &Path| {
        vec![
            "train".to_string(),
            "--config".into(),
            conf.to_str().unwrap().into(),
            "--profiles".into(),
            data.join("profiles.csv").to_str().unwrap().into(),
            "--metadata".into(),
            data.join("metadata.csv").to_str().unwrap().into(),
            "--out".into(),
            out.to_str().unwrap().into(),
        ]
    };
    let run_a = dir.join("run_a");
    let run_b = dir.join("run_b");
    run(&train_args(&run_a).iter().map(|s| s.as_str()).collect::<Vec<_>>());
    run(&train_args(&run_b).iter().map(|s| s.as_str()).collect::<Vec<_>>());
    let ckpt_a = std::fs::read(run_a.join("checkpoint.cnts")).unwrap();
    let ckpt_b = std::fs::read(run_b.join("checkpoint.cnts")).unwrap();
    assert_eq!(ckpt_a, ckpt_b, "same seed must give identical checkpoints");
    let log = std::fs::read_to_string(run_a.join("training_log.csv")).unwrap();
    assert!(log.starts_with("epoch,loss_gen,loss_aux,loss_total"));

    let syn = dir.join("syn");
    run(&[
        "generate",
        "--checkpoint",
        run_a.join("checkpoint.cnts").to_str().unwrap(),
        "--all-train-contexts",
        "--profiles",
        data.join("profiles.csv").to_str().unwrap(),
        "--metadata",
        data.join("metadata.csv").to_str().unwrap(),
        "--out",
        syn.to_str().unwrap(),
        "--seed",
        "4",
    ]);
    let report = dir.join("report.json");
    run(&[
        "evaluate",
        "--real-profiles",
        data.join("profiles.csv").to_str().unwrap(),
        "--real-metadata",
        data.join("metadata.csv").to_str().unwrap(),
        "--syn-profiles",
        syn.join("synthetic_profiles.csv").to_str().unwrap(),
        "--syn-metadata",
        syn.join("synthetic_metadata.csv").to_str().unwrap(),
        "--sparsity",
        "--out",
        report.to_str().unwrap(),
        "--seed",
        "5",
    ]);
    let text = std::fs::read_to_string(&report).unwrap();
    assert!(text.contains("\"context_fid\""));

    let out = run(&[
        "inspect-checkpoint",
        "--checkpoint",
        run_a.join("checkpoint.cnts").to_str().unwrap(),
    ]);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("diffusion"), "{stdout}");
}

#[test]
fn failures_exit_nonzero_with_stderr() {
    let dir = tmp("failures");
    // Missing input file.
    let out = cents()
        .args([
            "train",
            "--profiles",
            dir.join("nope.csv").to_str().unwrap(),
            "--metadata",
            dir.join("nope_meta.csv").to_str().unwrap(),
            "--out",
            dir.join("out").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(!out.stderr.is_empty());

    // Unknown config key is rejected before any work.
    let bad = dir.join("bad.conf");
    std::fs::write(&bad, "[train]\nwarp_speed = 9\n").unwrap();
    let out = cents()
        .args([
            "synth-data",
            "--config",
            bad.to_str().unwrap(),
            "--out",
            dir.join("out2").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("warp_speed"), "{err}");

    // Corrupt checkpoint is reported.
    let fake = dir.join("fake.cnts");
    std::fs::write(&fake, b"not a checkpoint").unwrap();
    let out = cents()
        .args(["inspect-checkpoint", "--checkpoint", fake.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("magic"));
}

#[test]
fn config_reference_parses_back() {
    let out = cents().arg("config-reference").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("[train]") && text.contains("[faux]"));
}
