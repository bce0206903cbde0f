//! Replays the fuzz corpus and random inputs through the parser invariants
//! the fuzz targets check, so they run on every test pass.

use std::path::PathBuf;

use nanoloc::artifact::{read_summary_csv, summary_csv_string};
use nanoloc::channel::AbsorptionTable;
use nanoloc::config::SimConfig;
use proptest::prelude::*;

fn corpus(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut files: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect()
}

fn check_config(data: &[u8]) -> bool {
    let Ok(text) = std::str::from_utf8(data) else { return false };
    match SimConfig::from_json_str(text) {
        Ok(config) => {
            let again = SimConfig::from_json_str(&serde_json::to_string(&config).unwrap()).unwrap();
            assert_eq!(again, config);
            if config.grid_rows.saturating_mul(config.grid_cols) <= 10_000 {
                config.topology().unwrap();
            }
            true
        }
        Err(_) => false,
    }
}

fn check_table(data: &[u8]) -> bool {
    let Ok(text) = std::str::from_utf8(data) else { return false };
    match text.parse::<AbsorptionTable>() {
        Ok(table) => {
            let back: AbsorptionTable = table.to_string().parse().unwrap();
            assert_eq!(back, table);
            assert!([1e11, 1e12, 1.9e12].iter().all(|&f| table.coefficient(f) >= 0.0));
            true
        }
        Err(_) => false,
    }
}

fn check_csv(data: &[u8]) -> bool {
    match read_summary_csv(data) {
        Ok(rows) => {
            let back = read_summary_csv(summary_csv_string(&rows).as_bytes()).unwrap();
            assert_eq!(back.len(), rows.len());
            assert!(back.iter().zip(&rows).all(|(a, b)| a.same_as(b)));
            true
        }
        Err(_) => false,
    }
}

fn accepted(target: &str, check: fn(&[u8]) -> bool) -> Vec<String> {
    corpus(target).into_iter().filter(|(_, data)| check(data)).map(|(name, _)| name).collect()
}

#[test]
fn config_corpus() {
    let ok = accepted("config_json", check_config);
    assert_eq!(ok, ["absorption", "anchors", "bandwidth", "braces", "empty", "profile", "thresholds"]);
}

#[test]
fn table_corpus() {
    let ok = accepted("absorption_table", check_table);
    assert_eq!(ok, ["comment_only", "single", "sweep"]);
}

#[test]
fn csv_corpus() {
    let ok = accepted("summary_csv", check_csv);
    assert_eq!(ok, ["header_only", "quoted", "run", "sweep"]);
}

proptest! {
    #[test]
    fn arbitrary_bytes_never_panic(data in proptest::collection::vec(any::<u8>(), 0..256)) {
        check_config(&data);
        check_table(&data);
        check_csv(&data);
    }

    #[test]
    fn table_like_text(rows in proptest::collection::vec((1e9f64..3e12, 0.0f64..100.0), 0..12)) {
        let text: String = rows.iter().map(|(f, k)| format!("{f} {k}\n")).collect();
        let ok = check_table(text.as_bytes());
        let increasing = rows.windows(2).all(|w| w[1].0 > w[0].0);
        prop_assert_eq!(ok, increasing);
    }

    #[test]
    fn config_overrides(bw in 1e9f64..3e12, k in 0u32..6, period in -0.1f64..1.0) {
        let text = format!(r#"{{"bandwidth": {bw}, "k_pulses": {k}, "update_period": {period}}}"#);
        let ok = check_config(text.as_bytes());
        prop_assert_eq!(ok, bw < 2e12 && k >= 1 && period >= 0.0);
    }
}
