use std::fs;

use bayesgeo::bundle::{read_bundle, validate_bundle, write_bundle, ViolationKind};
use bayesgeo::geometry::{analyze_bundle, layer_pca, AnalysisOptions};
use bayesgeo::synthlab::{generate_fixture, FixtureConfig};

fn cfg() -> FixtureConfig {
    FixtureConfig {
        n_layers: 4,
        n_heads: 2,
        d_v: 4,
        d_k: 4,
        d_model: 16,
        n_prompts: 60,
        tokens_per_prompt: 8,
        attention_entropy_schedule: vec![2.8, 2.0, 1.2, 0.6],
        ..FixtureConfig::default()
    }
}

#[test]
fn fixture_round_trips_and_pca_is_unchanged() {
    let fx = generate_fixture(&cfg()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_bundle(&fx.bundle, dir.path()).unwrap();
    let back = read_bundle(dir.path(), true).unwrap().load().unwrap();
    assert_eq!(back, fx.bundle);
    for l in 0..4 {
        let (_, a) = layer_pca(&fx.bundle, l, true).unwrap();
        let (_, b) = layer_pca(&back, l, true).unwrap();
        for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
            assert!((x - y).abs() <= 1e-12);
        }
        for (x, y) in a.axis1.iter().zip(&b.axis1) {
            assert!((x - y).abs() <= 1e-12);
        }
    }
    assert!(validate_bundle(dir.path()).unwrap().is_empty());
}

#[test]
fn reader_fetches_only_what_is_asked() {
    let fx = generate_fixture(&cfg()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_bundle(&fx.bundle, dir.path()).unwrap();
    let r = read_bundle(dir.path(), false).unwrap();
    assert_eq!(r.io_stats().records_read, 0);
    let rows = r.layer_values(2).unwrap();
    assert_eq!(rows.len(), 60);
    let per_record = manifest
        .tensor_index
        .iter()
        .find(|e| e.layer == Some(2) && e.prompt == Some(0))
        .unwrap()
        .record_len();
    let s = r.io_stats();
    assert_eq!(s.records_read, 60);
    assert_eq!(s.bytes_read, 60 * per_record);
    let file_len = fs::metadata(dir.path().join("values.bin")).unwrap().len();
    assert!(s.bytes_read * 4 == file_len);
}

#[test]
fn corrupted_payload_is_reported() {
    let fx = generate_fixture(&cfg()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_bundle(&fx.bundle, dir.path()).unwrap();
    let p = dir.path().join("values.bin");
    let mut bytes = fs::read(&p).unwrap();
    bytes[40] ^= 0x10;
    fs::write(&p, bytes).unwrap();
    let v = validate_bundle(dir.path()).unwrap();
    assert_eq!(v.len(), 1);
    assert_eq!(v[0].violation, ViolationKind::Checksum);
    assert!(read_bundle(dir.path(), false).unwrap().load().is_err());
}

#[test]
fn fixture_targets_survive_disk() {
    let c = cfg();
    let fx = generate_fixture(&c).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_bundle(&fx.bundle, dir.path()).unwrap();
    let back = read_bundle(dir.path(), true).unwrap().load().unwrap();
    let r = analyze_bundle(&back, &AnalysisOptions { n_resamples: 200, ..Default::default() }).unwrap();
    let a = r.attention.unwrap();
    for (l, want) in c.attention_entropy_schedule.iter().enumerate() {
        assert!((a.layers[l].mean_bits - want).abs() < 0.02);
    }
    for l in r.orthogonality.unwrap().layers {
        assert!((l.mean - 0.12).abs() < 0.01, "{}", l.mean);
    }
}
