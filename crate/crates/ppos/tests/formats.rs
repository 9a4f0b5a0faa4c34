use std::path::{Path, PathBuf};

use proptest::prelude::*;

use ppos::config::{LoadedConfig, SyntheticConfig};
use ppos::io::{load_dataset, read_dataset, write_dataset};
use ppos::AppError;
use ppos_core::dataset::{Arm, Cause, Dataset, Event, SubjectRecord};
use ppos_core::synthetic::generate_synthetic;

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data")
}

fn record() -> impl Strategy<Value = (f64, u8, bool, f64, Option<f64>)> {
    (
        0.0f64..1e4,
        0u8..3,
        any::<bool>(),
        prop_oneof![Just(0.0), Just(1.0), -1e3f64..1e3],
        proptest::option::of(0.0f64..100.0),
    )
}

proptest! {
    #[test]
    fn datasets_round_trip_through_csv(rows in proptest::collection::vec(record(), 1..40), with_offsets in any::<bool>()) {
        let records: Vec<SubjectRecord> = rows
            .iter()
            .enumerate()
            .map(|(i, &(time, event, arm, z, offset))| {
                let event = Event::from_code(event as i64).unwrap();
                let arm = if arm { Arm::Treatment } else { Arm::Control };
                let r = SubjectRecord::new(&format!("id{}", i), time, event, arm, vec![z, -z]);
                match offset {
                    Some(o) if with_offsets => r.with_origin_offset(o),
                    _ => r,
                }
            })
            .collect();
        let data = Dataset::new(vec!["a".into(), "b".into()], "days", records).unwrap();
        let mut buf = Vec::new();
        write_dataset(&mut buf, &data).unwrap();
        let back = read_dataset(buf.as_slice(), None, "days").unwrap();
        prop_assert_eq!(back, data);
    }
}

#[test]
fn file_errors_name_the_row() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "subject_id,time,event,arm\na,1,1,0\nb,2,0,1\nc,3,7,1\n").unwrap();
    let err = load_dataset(&path, None, "days").unwrap_err();
    assert!(matches!(err, AppError::Parse { .. }), "{:?}", err);
    assert!(err.to_string().contains("row 3"), "{}", err);
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn bundled_ispy_like_data() {
    let d = load_dataset(&data_dir().join("ispy_like.csv"), None, "days").unwrap();
    assert_eq!(d.arm_counts(), [75, 58]);
    let counts = d.event_counts();
    assert_eq!(counts[0][0] + counts[1][0], 33);
    assert_eq!(d.covariate_names(), ["who_level".to_string()]);
    assert!(d.records().iter().all(|r| r.time <= 60.0));
}

#[test]
fn bundled_data_match_their_generators() {
    for (synth, csv, unit) in [
        ("ispy_like_synth.toml", "ispy_like.csv", "days"),
        ("sthlm3_like_synth.toml", "sthlm3_like.csv", "years"),
    ] {
        let spec = SyntheticConfig::load(&data_dir().join(synth)).unwrap().to_core().unwrap();
        let generated = generate_synthetic(&spec).unwrap();
        let bundled = load_dataset(&data_dir().join(csv), None, unit).unwrap();
        assert_eq!(generated, bundled, "{}", csv);
    }
}

#[test]
fn bundled_sthlm3_like_data() {
    let d = load_dataset(&data_dir().join("sthlm3_like.csv"), None, "years").unwrap();
    assert_eq!(d.arm_counts(), [18_000, 42_000]);
    assert!(d.has_origin_offsets());
    let primary: usize = d.event_counts().iter().map(|c| c[Cause::Primary.index() + 1]).sum();
    assert!(primary > 100);
    assert!(d.records().iter().all(|r| r.time + r.origin_offset.unwrap() <= 6.7 + 1e-9));
}

#[test]
fn bundled_configs_load_and_validate() {
    for name in ["ispy_like.toml", "sthlm3_like.toml"] {
        let loaded = LoadedConfig::load(&data_dir().join(name)).unwrap();
        let config = loaded.to_ppos_config().unwrap();
        let data = load_dataset(&loaded.dataset_path(), loaded.config.covariates.as_deref(), &loaded.config.time_unit).unwrap();
        config.validate(data.covariate_names()).unwrap();
        assert_eq!(config.k, 2500);
        assert!(loaded.config.scenarios.is_some());
    }
}
