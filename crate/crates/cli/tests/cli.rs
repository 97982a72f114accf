//! Black-box checks of the command-line contract: exit codes, report
//! schema, and flag/config interaction.

use std::path::Path;
use std::process::{Command, Output};

use rvqcodec::audio::{write_wav, AudioBuffer, WavEncoding};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_rvqcodec")
}

fn invoke(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().unwrap()
}

fn tone_wav(path: &Path, freq: f64) {
    let samples: Vec<f64> = (0..8000)
        .map(|i| 0.5 * (2.0 * std::f64::consts::PI * freq * i as f64 / 16000.0).sin())
        .collect();
    let buf = AudioBuffer::new(samples, 16000).unwrap();
    write_wav(&buf, path, WavEncoding::Pcm16).unwrap();
}

fn train_small_model(dir: &Path) -> std::path::PathBuf {
    let corpus = dir.join("corpus");
    std::fs::create_dir_all(&corpus).unwrap();
    for (k, freq) in [220.0, 330.0, 440.0, 550.0].iter().enumerate() {
        tone_wav(&corpus.join(format!("t{k}.wav")), *freq);
    }
    let model = dir.join("model.bin");
    let out = invoke(&[
        "train",
        "--corpus",
        corpus.to_str().unwrap(),
        "--out",
        model.to_str().unwrap(),
        "--levels",
        "4",
        "--codebook-size",
        "32",
        "--epochs",
        "2",
        "--window",
        "512",
        "--hop",
        "128",
        "--mels",
        "40",
        "--seed",
        "7",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    model
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(invoke(&["encode"]).status.code(), Some(1));
    assert_eq!(invoke(&["no-such-command"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let out = invoke(&[
        "train",
        "--corpus",
        dir.path().to_str().unwrap(),
        "--out",
        dir.path().join("m.bin").to_str().unwrap(),
        "--levels",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!dir.path().join("m.bin").exists(), "no partial output");
}

#[test]
fn help_and_version_exit_0() {
    assert_eq!(invoke(&["--help"]).status.code(), Some(0));
    assert_eq!(invoke(&["--version"]).status.code(), Some(0));
}

#[test]
fn tampered_stream_magic_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let model = train_small_model(dir.path());
    let wav = dir.path().join("corpus/t0.wav");
    let stream = dir.path().join("t0.rvq");
    let out = invoke(&[
        "encode",
        "--model",
        model.to_str().unwrap(),
        "--in",
        wav.to_str().unwrap(),
        "--out",
        stream.to_str().unwrap(),
        "--bitrate",
        "2000",
    ]);
    assert!(out.status.success());

    let mut bytes = std::fs::read(&stream).unwrap();
    bytes[0] = b'X';
    let bad = dir.path().join("bad.rvq");
    std::fs::write(&bad, bytes).unwrap();
    let out = invoke(&[
        "decode",
        "--model",
        model.to_str().unwrap(),
        "--in",
        bad.to_str().unwrap(),
        "--out",
        dir.path().join("x.wav").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad magic"));
    assert!(!dir.path().join("x.wav").exists());
}

#[test]
fn identical_pair_hits_metric_ceilings() {
    let dir = tempfile::tempdir().unwrap();
    let wav = dir.path().join("x.wav");
    tone_wav(&wav, 220.0);
    let out = invoke(&[
        "eval",
        "--ref",
        wav.to_str().unwrap(),
        "--deg",
        wav.to_str().unwrap(),
        "--metrics",
        "mcd,stoi,si_snr",
    ]);
    assert!(out.status.success());
    let line: serde_json::Value =
        serde_json::from_slice(&out.stdout).expect("one JSON line on stdout");
    let metrics = &line["metrics"];
    assert_eq!(metrics["mcd"], 0.0);
    assert_eq!(metrics["si_snr"], 60.0);
    let stoi = metrics["stoi"].as_f64().unwrap();
    assert!((stoi - 1.0).abs() < 1e-6, "stoi = {stoi}");
    assert!(metrics.get("f0_rmse").is_none(), "unselected metric present");
}

#[test]
fn losses_l1_plus_l2_is_sum_of_parts() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.wav");
    let b = dir.path().join("b.wav");
    tone_wav(&a, 220.0);
    tone_wav(&b, 233.0);
    let run_norm = |norm: &str| -> (f64, f64) {
        let out = invoke(&[
            "losses",
            "--ref",
            a.to_str().unwrap(),
            "--deg",
            b.to_str().unwrap(),
            "--norm",
            norm,
        ]);
        assert!(out.status.success());
        let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        (
            v["time_domain"].as_f64().unwrap(),
            v["multi_scale_mel"].as_f64().unwrap(),
        )
    };
    let (t1, m1) = run_norm("l1");
    let (t2, m2) = run_norm("l2");
    let (tb, mb) = run_norm("l1_plus_l2");
    assert!((tb - (t1 + t2)).abs() < 1e-12);
    assert!((mb - (m1 + m2)).abs() < 1e-12);

    // identical inputs score zero under every norm
    let out = invoke(&[
        "losses",
        "--ref",
        a.to_str().unwrap(),
        "--deg",
        a.to_str().unwrap(),
    ]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["time_domain"], 0.0);
    assert_eq!(v["multi_scale_mel"], 0.0);
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let model = train_small_model(dir.path());
    let wav = dir.path().join("corpus/t0.wav");
    let config = dir.path().join("encode.json");
    std::fs::write(&config, r#"{"bitrate": 2000.0}"#).unwrap();

    let from_config = invoke(&[
        "encode",
        "--model",
        model.to_str().unwrap(),
        "--in",
        wav.to_str().unwrap(),
        "--out",
        dir.path().join("c.rvq").to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
    ]);
    assert!(from_config.status.success());
    let v: serde_json::Value = serde_json::from_slice(&from_config.stdout).unwrap();
    assert_eq!(v["requested_bitrate"], 2000.0);

    let overridden = invoke(&[
        "encode",
        "--model",
        model.to_str().unwrap(),
        "--in",
        wav.to_str().unwrap(),
        "--out",
        dir.path().join("o.rvq").to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
        "--bitrate",
        "1000",
    ]);
    assert!(overridden.status.success());
    let v: serde_json::Value = serde_json::from_slice(&overridden.stdout).unwrap();
    assert_eq!(v["requested_bitrate"], 1000.0);
}

#[test]
fn eval_report_order_independent_of_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let refs = dir.path().join("ref");
    let degs = dir.path().join("deg");
    std::fs::create_dir_all(&refs).unwrap();
    std::fs::create_dir_all(&degs).unwrap();
    for (k, freq) in [220.0, 330.0, 440.0, 550.0].iter().enumerate() {
        tone_wav(&refs.join(format!("s{k}.wav")), *freq);
        tone_wav(&degs.join(format!("s{k}.wav")), freq * 1.02);
    }
    let report = |jobs: &str, out_name: &str| -> Vec<u8> {
        let path = dir.path().join(out_name);
        let out = invoke(&[
            "eval",
            "--ref",
            refs.to_str().unwrap(),
            "--deg",
            degs.to_str().unwrap(),
            "--metrics",
            "mcd,si_snr",
            "--jobs",
            jobs,
            "--out",
            path.to_str().unwrap(),
        ]);
        assert!(out.status.success());
        std::fs::read(&path).unwrap()
    };
    assert_eq!(report("1", "r1.jsonl"), report("8", "r8.jsonl"));
}
