#![no_main]

use libfuzzer_sys::fuzz_target;
use plaque_fsi::linear::read_matrix_market;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(m) = read_matrix_market(text) {
        let back = read_matrix_market(&m.to_matrix_market("fuzz")).expect("writer output parses");
        assert_eq!(back, m);
    }
});
