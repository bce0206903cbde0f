#![no_main]
use libfuzzer_sys::fuzz_target;
use nanoloc::channel::AbsorptionTable;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(table) = text.parse::<AbsorptionTable>() {
        let back: AbsorptionTable = table.to_string().parse().unwrap();
        assert_eq!(back, table);
        for f in [1e11, 1e12, 1.9e12] {
            assert!(table.coefficient(f) >= 0.0);
        }
    }
});
