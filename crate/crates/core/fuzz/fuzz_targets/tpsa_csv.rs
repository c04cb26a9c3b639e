#![no_main]

use biphoton::tpsa::TpsaGrid;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(grid) = TpsaGrid::from_csv(text) {
        let (rows, cols) = grid.shape();
        assert_eq!(rows * cols, grid.values().len());
        let again = TpsaGrid::from_csv(&grid.to_csv()).expect("exported grid parses");
        assert_eq!(again.shape(), grid.shape());
    }
});
