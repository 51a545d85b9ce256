#![no_main]

use libfuzzer_sys::fuzz_target;
use trajmt::scene::TestSuite;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(v) = TestSuite::from_json(text) {
        // Accepted input must survive a second round trip unchanged.
        let json = v.to_json().expect("serializable");
        let again = TestSuite::from_json(&json).expect("reparse");
        assert_eq!(again.to_json().expect("serializable"), json);
    }
});
