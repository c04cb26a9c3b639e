#![no_main]

use biphoton::dispersion::{Axis, SellmeierSet};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(set) = SellmeierSet::parse(text) else {
        return;
    };
    let again = SellmeierSet::parse(&set.to_text()).expect("serialized set parses");
    for axis in [Axis::X, Axis::Y, Axis::Z] {
        assert_eq!(set.validity(axis).ok(), again.validity(axis).ok());
        if let Ok((lo, hi)) = set.validity(axis) {
            let mid = 0.5 * (lo + hi);
            let _ = set.refractive_index(axis, mid);
        }
    }
});
