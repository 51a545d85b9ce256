#![no_main]

use libfuzzer_sys::fuzz_target;
use trajmt::scene::Scene;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(v) = Scene::from_json(text) {
        // Accepted input must survive a second round trip unchanged.
        let json = v.to_json().expect("serializable");
        let again = Scene::from_json(&json).expect("reparse");
        assert_eq!(again.to_json().expect("serializable"), json);
    }
});
