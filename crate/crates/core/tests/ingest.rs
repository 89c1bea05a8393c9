use std::fmt::Write as _;
use std::path::Path;
use std::process::Command;

use chrono::{Duration, TimeZone, Utc};

use cointcast::*;

/// Six regions in long layout split over two semicolon files; the instant
/// 01:00 is listed twice for every region and region `r4` misses two slots.
fn write_fixture(dir: &Path) -> (std::path::PathBuf, std::path::PathBuf) {
    let start = Utc.with_ymd_and_hms(2019, 10, 27, 0, 0, 0).unwrap();
    let value = |region: usize, i: i64| 100.0 * region as f64 + i as f64;
    let mut files = [String::from("timestamp;region;value\n"), String::from("timestamp;region;value\n")];
    for region in 1..=6 {
        let body = &mut files[(region - 1) / 3];
        for i in 0..12i64 {
            let ts = (start + Duration::minutes(15 * i)).format("%d.%m.%Y %H:%M");
            let end = (start + Duration::minutes(15 * (i + 1))).format("%d.%m.%Y %H:%M");
            let v = if region == 4 && (i == 5 || i == 6) { "n/e".to_string() } else { format!("{}", value(region, i)) };
            writeln!(body, "{ts} - {end};r{region};{v}").unwrap();
            if i == 4 {
                writeln!(body, "{ts} - {end};r{region};{}", value(region, i) + 2.0).unwrap();
            }
        }
    }
    let (a, b) = (dir.join("a.csv"), dir.join("b.csv"));
    std::fs::write(&a, &files[0]).unwrap();
    std::fs::write(&b, &files[1]).unwrap();
    (a, b)
}

#[test]
fn six_region_fixture() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = write_fixture(tmp.path());
    let opts = IngestOptions { expected_regions: Some(6), ..IngestOptions::default() };
    let (panel, report) = load_panel(&[&a, &b], &opts).unwrap();
    assert_eq!(report.duplicates_resolved, 6);
    assert_eq!(report.gaps_filled, 2);
    assert_eq!(report.rows_read, 6 * 13);
    assert_eq!(report.rows_dropped, 0);
    assert_eq!(panel.labels(), &["r1", "r2", "r3", "r4", "r5", "r6"]);
    assert_eq!(panel.n_obs(), 12);
    for j in 0..6 {
        let base = 100.0 * (j + 1) as f64;
        // duplicated slot 4: (base + 4 + base + 6) / 2
        assert_eq!(panel.values()[(4, j)], base + 5.0);
        for i in [0, 7, 11] {
            assert_eq!(panel.values()[(i, j)], base + i as f64);
        }
        if j == 3 {
            // gap at slots 5, 6 bracketed by the averaged slot 4 and slot 7
            assert!((panel.values()[(5, j)] - (base + 5.0 + 2.0 / 3.0)).abs() < 1e-12);
            assert!((panel.values()[(6, j)] - (base + 5.0 + 4.0 / 3.0)).abs() < 1e-12);
        } else {
            assert_eq!(panel.values()[(5, j)], base + 5.0);
            assert_eq!(panel.values()[(6, j)], base + 6.0);
        }
    }

    // same inputs, same outputs
    let (again, report_again) = load_panel(&[&a, &b], &opts).unwrap();
    assert_eq!(again, panel);
    assert_eq!(report_again, report);
}

#[test]
fn ingest_command_output_roundtrips() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = write_fixture(tmp.path());
    let out = tmp.path().join("wide.csv");
    let o = Command::new(env!("CARGO_BIN_EXE_cointcast"))
        .arg("ingest")
        .arg("--data")
        .arg(&a)
        .arg(&b)
        .args(["--regions", "6", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("6 duplicates resolved"), "{text}");

    let (panel, _) = load_panel(&[&a, &b], &IngestOptions::default()).unwrap();
    let (wide, report) = load_panel(&[&out], &IngestOptions::default()).unwrap();
    assert_eq!(wide, panel);
    assert_eq!(report.gaps_filled + report.duplicates_resolved + report.rows_dropped, 0);
    let header = std::fs::read_to_string(&out).unwrap();
    assert!(header.starts_with("timestamp,r1,r2,r3,r4,r5,r6\n2019-10-27T00:00:00Z,"));
}

#[test]
fn wrong_region_count_is_schema_error() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, _) = write_fixture(tmp.path());
    let opts = IngestOptions { expected_regions: Some(6), ..IngestOptions::default() };
    assert!(matches!(load_panel(&[&a], &opts), Err(Error::Schema(_))));
}
