#![no_main]

use libfuzzer_sys::fuzz_target;
use trajmt::analytics::{heatmap_svg, rows_csv, summary, summary_json};
use trajmt::mt::RowsFile;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(file) = RowsFile::from_json(text) {
        let _ = summary_json(&file);
        let _ = rows_csv(&file.rows);
        let _ = heatmap_svg(&summary(&file).rate_matrix);
        let json = file.to_json().expect("serializable");
        assert!(RowsFile::from_json(&json).is_ok());
    }
});
