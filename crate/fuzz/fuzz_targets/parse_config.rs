#![no_main]

use libfuzzer_sys::fuzz_target;
use trajmt::config::CampaignConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(c) = CampaignConfig::from_json(text) {
        let _ = c.settings();
        let json = c.to_json().expect("serializable");
        assert!(CampaignConfig::from_json(&json).is_ok());
    }
});
