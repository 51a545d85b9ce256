#![no_main]

use libfuzzer_sys::fuzz_target;
use trajmt::analytics::ReportFormat;
use trajmt::mt::{MRKind, StrictnessLevel};
use trajmt::scene::TaskKind;
use trajmt::sim::{FaultKind, FaultProfile};

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    let _ = s.parse::<FaultProfile>();
    let _ = s.parse::<FaultKind>();
    let _ = s.parse::<MRKind>();
    let _ = s.parse::<StrictnessLevel>();
    let _ = s.parse::<TaskKind>();
    let _ = s.parse::<ReportFormat>();
});
