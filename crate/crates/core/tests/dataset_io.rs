use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use proptest::prelude::*;
use wavesep::data::{
    decode_wav, encode_wav, load_stem_directory, load_track, load_tracks, synthesize_mixture, write_wav,
    DatasetManifest,
};
use wavesep::Error;

proptest! {
    #[test]
    fn wav_round_trip_within_one_lsb(samples in prop::collection::vec(-1.0f32..=1.0, 1..500), rate in 8_000u32..96_000) {
        let bytes = encode_wav(&samples, rate).unwrap();
        let (back, r) = decode_wav(&bytes).unwrap();
        prop_assert_eq!(r, rate);
        prop_assert_eq!(back.len(), samples.len());
        for (a, b) in samples.iter().zip(&back) {
            prop_assert!((a - b).abs() <= 1.0 / 32768.0);
        }
    }

    #[test]
    fn decoding_arbitrary_bytes_never_panics(bytes in prop::collection::vec(any::<u8>(), 0..200)) {
        let _ = decode_wav(&bytes);
    }
}

fn tone(len: usize, freq: f32, amp: f32) -> Vec<f32> {
    (0..len).map(|t| amp * (t as f32 * freq).sin()).collect()
}

fn write_track(dir: &Path, stems: &[&str], len: usize, rate: u32) {
    fs::create_dir_all(dir).unwrap();
    for (i, s) in stems.iter().enumerate() {
        write_wav(dir.join(format!("{s}.wav")), &tone(len, 0.01 * (i + 1) as f32, 0.2), rate).unwrap();
    }
}

#[test]
fn loads_both_layouts_and_synthesises_mixture() {
    let tmp = tempfile::tempdir().unwrap();
    write_track(&tmp.path().join("b"), &["vocals", "drums", "bass", "other"], 400, 16_000);
    write_track(&tmp.path().join("a"), &["vocals", "accompaniment"], 300, 16_000);
    let tracks = load_stem_directory(tmp.path(), 16_000).unwrap();
    assert_eq!(tracks.iter().map(|t| t.name.as_str()).collect::<Vec<_>>(), ["a", "b"]);
    assert_eq!(tracks[0].sources.len(), 2);
    assert_eq!(tracks[1].sources.len(), 4);
    let sum = synthesize_mixture("b", &tracks[1].sources).unwrap();
    assert_eq!(tracks[1].mixture, sum);
    assert_eq!(tracks[1].reference("accompaniment").unwrap().len(), 400);
}

#[test]
fn ordering_is_bytewise() {
    let tmp = tempfile::tempdir().unwrap();
    for name in ["b", "B", "a", "_x"] {
        write_track(&tmp.path().join(name), &["vocals", "accompaniment"], 10, 16_000);
    }
    let names: Vec<String> = load_stem_directory(tmp.path(), 16_000).unwrap().into_iter().map(|t| t.name).collect();
    assert_eq!(names, ["B", "_x", "a", "b"]);
}

#[test]
fn missing_stem_is_named() {
    let tmp = tempfile::tempdir().unwrap();
    write_track(&tmp.path().join("t"), &["vocals", "drums", "other"], 100, 16_000);
    match load_track(&tmp.path().join("t"), 16_000) {
        Err(Error::Dataset(msg)) => assert!(msg.contains("bass"), "{msg}"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn short_stem_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("t");
    write_track(&dir, &["vocals", "accompaniment"], 100, 16_000);
    write_wav(dir.join("vocals.wav"), &tone(60, 0.1, 0.2), 16_000).unwrap();
    let err = load_track(&dir, 16_000).unwrap_err();
    assert!(matches!(err, Error::Dataset(_)), "{err}");
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn foreign_sample_rate_asks_for_resampling() {
    let tmp = tempfile::tempdir().unwrap();
    write_track(&tmp.path().join("t"), &["vocals", "accompaniment"], 100, 44_100);
    match load_track(&tmp.path().join("t"), 16_000) {
        Err(Error::Dataset(msg)) => assert!(msg.contains("44100") && msg.contains("resample"), "{msg}"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn corrupt_wav_is_integrity_error() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("t");
    write_track(&dir, &["vocals", "accompaniment"], 100, 16_000);
    let bytes = fs::read(dir.join("vocals.wav")).unwrap();
    fs::write(dir.join("vocals.wav"), &bytes[..bytes.len() - 11]).unwrap();
    let err = load_track(&dir, 16_000).unwrap_err();
    assert_eq!(err.exit_code(), 5, "{err}");
}

#[test]
fn manifest_rules() {
    let tmp = tempfile::tempdir().unwrap();
    write_track(&tmp.path().join("x"), &["vocals", "accompaniment"], 10, 16_000);
    let path = tmp.path().join("dataset.json");
    fs::write(&path, r#"{"train": ["x"], "validation": ["x"]}"#).unwrap();
    assert!(matches!(DatasetManifest::load(&path), Err(Error::Dataset(_))));
    fs::write(&path, r#"{"train": ["x"], "validation": ["y"], "extra": 1}"#).unwrap();
    assert!(matches!(DatasetManifest::load(&path), Err(Error::Dataset(_))));
    fs::write(&path, r#"{"train": ["x"], "validation": ["y"]}"#).unwrap();
    let m = DatasetManifest::load(&path).unwrap();
    assert!(load_tracks(tmp.path(), &m.train, 16_000).is_ok());
    assert!(matches!(load_tracks(tmp.path(), &m.validation, 16_000), Err(Error::Dataset(_))));
}

#[test]
fn synthesised_mixture_conserves_stems() {
    let sources = BTreeMap::from([
        ("vocals".to_string(), vec![0.9f32, -0.5, 0.25]),
        ("accompaniment".to_string(), vec![0.3f32, -0.7, 0.5]),
    ]);
    let mix = synthesize_mixture("t", &sources).unwrap();
    for t in 0..3 {
        let sum: f32 = sources.values().map(|w| w[t]).sum();
        assert_eq!(mix[t], sum);
    }
    assert!(mix[0] > 1.0, "pre-clamp sum is kept");
}
