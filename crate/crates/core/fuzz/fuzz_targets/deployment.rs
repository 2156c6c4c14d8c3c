//! Deployment JSON as written by `generate`. A deployment that validates
//! must produce link tables without panicking and round-trip byte-exactly.

#![no_main]

use libfuzzer_sys::fuzz_target;

use hetnet_ce::netmodel::{compute_link_gains, Deployment};

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    let Ok(dep) = Deployment::from_json(&text) else {
        return;
    };
    if dep.users.len() * dep.bss.len() <= 4096 {
        let _ = compute_link_gains(&dep);
    }
    let back = Deployment::from_json(&dep.to_json()).expect("round trip");
    assert_eq!(dep.checksum(), back.checksum());
});
