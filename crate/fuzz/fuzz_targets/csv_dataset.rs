#![no_main]

use kreg_core::data::{parse_csv, write_dataset, ColumnSchema};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|bytes: &[u8]| {
    let Some((&sel, body)) = bytes.split_first() else {
        return;
    };
    let schema = match sel % 4 {
        0 => ColumnSchema::points(1),
        1 => ColumnSchema::points(2),
        2 => ColumnSchema::points(3),
        _ => ColumnSchema::household(),
    };
    let Ok(loaded) = parse_csv(body, &schema) else {
        return;
    };
    let ds = &loaded.dataset;
    assert!(!ds.is_empty());
    assert!(ds.coords().iter().chain(ds.ys()).all(|v| v.is_finite()));
    assert!(ds.ws().iter().all(|w| w.is_finite() && *w > 0.0));

    let mut out = Vec::new();
    write_dataset(ds, &mut out).unwrap();
    let again = parse_csv(out.as_slice(), &ColumnSchema::points(ds.dim())).unwrap();
    assert_eq!(again.dataset.coords(), ds.coords());
    assert_eq!(again.dataset.ys(), ds.ys());
    assert_eq!(again.dataset.ws(), ds.ws());
});
