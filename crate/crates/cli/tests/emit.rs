use dcs_cli::config::Mode;
use dcs_cli::emit::{csv_header, emit, parse_csv, write_csv, write_json, Format};
use dcs_cli::experiment::{TrialRecord, TrialStatus};

fn record(allocation: Vec<usize>, err: Option<f64>) -> TrialRecord {
    TrialRecord {
        trial: 7,
        seed: 18_446_744_073_709_551_615,
        allocation,
        mode: Mode::Unknown,
        status: TrialStatus::Unique,
        max_abs_err: err,
        candidates: 12,
        ms: 0.0,
    }
}

fn csv_string(records: &[TrialRecord], sensors: usize) -> String {
    let mut buf = Vec::new();
    write_csv(records, sensors, &mut buf).unwrap();
    String::from_utf8(buf).unwrap()
}

#[test]
fn empty_records_give_header_only() {
    assert_eq!(csv_string(&[], 3), "trial,seed,M_1,M_2,M_3,mode,status,max_abs_err,candidates,ms\n");
}

#[test]
fn two_sensor_columns() {
    assert_eq!(csv_header(2), ["trial", "seed", "M_1", "M_2", "mode", "status", "max_abs_err", "candidates", "ms"]);
}

#[test]
fn single_record_round_trips() {
    for err in [Some(1.7763568394002505e-15), Some(0.0), Some(0.1 + 0.2), None] {
        let rec = record(vec![3, 2], err);
        let text = csv_string(std::slice::from_ref(&rec), 2);
        let (sensors, parsed) = parse_csv(text.as_bytes()).unwrap();
        assert_eq!(sensors, 2);
        assert_eq!(parsed, vec![rec]);
        assert_eq!(csv_string(&parsed, 2), text);
    }
}

#[test]
fn json_mirrors_fields() {
    let rec = record(vec![1, 4], Some(2.5e-12));
    let mut buf = Vec::new();
    write_json(std::slice::from_ref(&rec), &mut buf).unwrap();
    let back: Vec<TrialRecord> = serde_json::from_slice(&buf).unwrap();
    assert_eq!(back, vec![rec]);
    let value: serde_json::Value = serde_json::from_slice(&buf).unwrap();
    let keys: Vec<&str> = value[0].as_object().unwrap().keys().map(String::as_str).collect();
    for key in ["trial", "seed", "allocation", "mode", "status", "max_abs_err", "candidates", "ms"] {
        assert!(keys.contains(&key), "{key}");
    }
}

#[test]
fn mismatched_allocation_is_rejected() {
    let mut buf = Vec::new();
    assert!(write_csv(&[record(vec![1], None)], 2, &mut buf).is_err());
}

#[test]
fn unwritable_path_reports_it() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("missing").join("out.csv");
    let err = emit(&[], 2, Format::Csv, Some(&path)).unwrap_err();
    assert!(err.to_string().contains("out.csv"), "{err}");
    assert_eq!(err.exit_code(), 1);
}
