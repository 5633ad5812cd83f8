#![no_main]

use drxlab::lut::{parse, LookupTable};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(entries) = parse(text) else {
        return;
    };
    // Whatever parses must survive a render/parse round trip unchanged.
    let mut table = LookupTable::in_memory();
    for (k, v) in entries {
        table.put(k, v).expect("parsed keys are finite");
    }
    let rendered = table.render();
    let again = parse(&rendered).expect("rendered table parses");
    assert_eq!(again.len(), table.len());
    for (k, v) in &again {
        let orig = table.get(k).expect("key survives");
        assert_eq!(orig.best, v.best);
        assert_eq!(orig.ps.to_bits(), v.ps.to_bits());
        assert_eq!(orig.mean_delay_ms.to_bits(), v.mean_delay_ms.to_bits());
    }
});
