mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use common::{tone_track, write_dataset, RATE};
use wavesep::data::{read_wav, write_wav};
use wavesep::eval::EvalReport;

fn wavesep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wavesep"))
        .args(args)
        .output()
        .expect("run wavesep")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const SMALL_CONFIG: &str = "\
# tiny singing-voice model
stacks = 1
filters = 4
dilation_depth = 3
target_field = 64
num_outputs = 1
post_filters = 8, 4
batch_size = 2
steps_per_epoch = 3
max_epochs = 2
patience_epochs = 1
validation_segments = 4
p_voiced = 0.5
seed = 7
dataset = data
output = run
";

#[test]
fn inspect_reports_four_stack_model() {
    let o = wavesep(&["inspect", "--stacks", "4", "--filters", "64"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("8191 samples / 512 ms"), "{}", stdout(&o));
}

#[test]
fn inspect_table_writes_json() {
    let tmp = tempfile::tempdir().unwrap();
    let json = tmp.path().join("t.json");
    let o = wavesep(&["inspect", "--table1", "--json", p(&json)]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 6);
    let rows: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 5);
    assert_eq!(rows[0]["parameters"], 25_715_715);
}

#[test]
fn invalid_configs_exit_with_code_two() {
    assert_eq!(wavesep(&["inspect", "--stacks", "0"]).status.code(), Some(2));
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.cfg");
    fs::write(&cfg, "stakcs = 3\n").unwrap();
    let o = wavesep(&["inspect", "--config", p(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("stakcs"));
    assert_eq!(wavesep(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn help_documents_config_defaults() {
    let o = wavesep(&["train", "--help"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for (key, default, _) in wavesep::cli::KEYS {
        assert!(text.contains(key) && text.contains(default), "{key}");
    }
}

#[test]
fn missing_checkpoint_is_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    let wav = tmp.path().join("m.wav");
    write_wav(&wav, &[0.0; 100], RATE).unwrap();
    let o = wavesep(&[
        "separate",
        "--checkpoint",
        p(&tmp.path().join("nope.wssm")),
        "--input",
        p(&wav),
        "--output",
        p(tmp.path()),
    ]);
    assert_eq!(o.status.code(), Some(5));
}

#[test]
fn missing_dataset_track_is_dataset_error() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    write_dataset(&data, &[tone_track("a", 0.1, 1)], &[tone_track("b", 0.1, 2)]);
    fs::write(data.join("dataset.json"), r#"{"train": ["a"], "validation": ["zzz"]}"#).unwrap();
    let cfg = tmp.path().join("run.cfg");
    fs::write(&cfg, SMALL_CONFIG).unwrap();
    assert_eq!(wavesep(&["train", "--config", p(&cfg)]).status.code(), Some(3));
}

#[test]
fn full_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let data = root.join("data");
    write_dataset(&data, &[tone_track("a", 0.3, 1)], &[tone_track("b", 0.2, 2)]);
    let cfg = root.join("run.cfg");
    fs::write(&cfg, SMALL_CONFIG).unwrap();

    // mix
    assert!(wavesep(&["mix", "--dataset", p(&data)]).status.success());
    let (mixture, rate) = read_wav(data.join("a").join("mixture.wav")).unwrap();
    assert_eq!((mixture.len(), rate), (4800, RATE));

    // train twice with the same seed
    assert!(wavesep(&["--threads", "1", "train", "--config", p(&cfg)]).status.success());
    let history = fs::read_to_string(root.join("run/history.csv")).unwrap();
    assert!(history.starts_with("epoch,train,validation\n"));
    assert!(root.join("run/best.wssm").is_file() && root.join("run/last.wssm").is_file());
    let o = wavesep(&["train", "--config", p(&cfg), "--output", p(&root.join("run2"))]);
    assert!(o.status.success());
    assert_eq!(history, fs::read_to_string(root.join("run2/history.csv")).unwrap());

    // separate a 3 s mixture
    let long = tone_track("long", 3.0, 5);
    let input = root.join("long.wav");
    write_wav(&input, &long.mixture, RATE).unwrap();
    let ckpt = root.join("run/best.wssm");
    let out = root.join("sep");
    assert!(wavesep(&["separate", "--checkpoint", p(&ckpt), "--input", p(&input), "--output", p(&out)])
        .status
        .success());
    for s in ["vocals", "accompaniment"] {
        let (w, r) = read_wav(out.join(format!("{s}.wav"))).unwrap();
        assert_eq!((w.len(), r), (48_000, RATE), "{s}");
    }

    // separate a split, then evaluate oracle and model estimates
    let est = root.join("est");
    let o = wavesep(&[
        "separate", "--checkpoint", p(&ckpt), "--dataset", p(&data), "--split", "validation", "--output", p(&est),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(est.join("b/vocals.wav").is_file());

    let refs = root.join("refs");
    write_dataset(&refs, &[], &[tone_track("b", 0.2, 2)]);
    fs::remove_file(refs.join("dataset.json")).unwrap();
    let oracle_report = root.join("oracle_report");
    let o = wavesep(&[
        "evaluate", "--estimates", p(&refs), "--references", p(&refs), "--filter-length", "8",
        "--label", "oracle", "--output", p(&oracle_report),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let oracle = EvalReport::load(oracle_report.join("report.json")).unwrap();
    for m in oracle.medians.values() {
        assert_eq!((m.sdr, m.sir, m.sar), (100.0, 100.0, 100.0));
    }

    let model_report = root.join("model_report");
    let o = wavesep(&[
        "evaluate", "--estimates", p(&est), "--references", p(&refs), "--filter-length", "1", "--label", "tiny",
        "--output", p(&model_report),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(model_report.join("report.csv").is_file());

    let merged = root.join("cmp.csv");
    let o = wavesep(&[
        "report",
        p(&oracle_report.join("report.json")),
        p(&model_report.join("report.json")),
        "--output",
        p(&merged),
    ]);
    assert!(o.status.success());
    let csv = fs::read_to_string(&merged).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "model,vocals_SDR,vocals_SIR,vocals_SAR,accompaniment_SDR,accompaniment_SIR,accompaniment_SAR");
    assert!(lines[1].starts_with("oracle,100.00,"));
    assert!(lines[2].starts_with("tiny,"));
}
