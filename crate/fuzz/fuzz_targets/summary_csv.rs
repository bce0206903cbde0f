#![no_main]
use libfuzzer_sys::fuzz_target;
use nanoloc::artifact::{read_summary_csv, summary_csv_string};

fuzz_target!(|data: &[u8]| {
    if let Ok(rows) = read_summary_csv(data) {
        let back = read_summary_csv(summary_csv_string(&rows).as_bytes()).unwrap();
        assert_eq!(back.len(), rows.len());
        assert!(back.iter().zip(&rows).all(|(a, b)| a.same_as(b)));
    }
});
