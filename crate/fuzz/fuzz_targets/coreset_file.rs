#![no_main]

use kreg_core::data::{read_coreset, write_coreset};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|bytes: &[u8]| {
    let Ok(cs) = read_coreset(bytes) else {
        return;
    };
    let mut first = Vec::new();
    write_coreset(&cs, &mut first).unwrap();
    let back = read_coreset(first.as_slice()).unwrap();
    let mut second = Vec::new();
    write_coreset(&back, &mut second).unwrap();
    assert_eq!(first, second);
    assert_eq!(back.method(), cs.method());
    assert_eq!(back.len(), cs.len());
});
