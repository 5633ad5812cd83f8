#![no_main]

use drxlab::output::parse_csv;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(table) = parse_csv(text) {
        for r in 0..table.rows.len() {
            assert_eq!(table.rows[r].len(), table.header.len());
            for name in &table.header {
                let _ = table.real(r, name);
            }
        }
    }
});
