#![no_main]

use kreg_core::data::Column;
use kreg_core::{KernelForm, Method, Truncation};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|bytes: &[u8]| {
    let Ok(s) = std::str::from_utf8(bytes) else {
        return;
    };
    if let Ok(m) = s.parse::<Method>() {
        assert_eq!(m.to_string().parse::<Method>().unwrap(), m);
        assert_eq!(m.short_name().parse::<Method>().unwrap(), m);
    }
    if let Ok(t) = s.parse::<Truncation>() {
        assert_eq!(t.to_string().parse::<Truncation>().unwrap(), t);
    }
    if let Ok(k) = s.parse::<KernelForm>() {
        assert_eq!(k.to_string().parse::<KernelForm>().unwrap(), k);
    }
    if let Ok(c) = s.parse::<Column>() {
        assert_eq!(c.to_string().parse::<Column>().unwrap(), c);
    }
});
