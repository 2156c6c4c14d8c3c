//! Scenario JSON: parse, validate and, for small valid scenarios, generate
//! a drop. Must not panic.

#![no_main]

use libfuzzer_sys::fuzz_target;

use hetnet_ce::netmodel::{compute_link_gains, generate_deployment};
use hetnet_ce::scenario::ScenarioConfig;

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    let Ok(cfg) = ScenarioConfig::from_json(&text) else {
        return;
    };
    let _ = cfg.caps();
    if cfg.n_users <= 64 && cfg.n_sbs <= 8 && cfg.placement_retries <= 2000 {
        if let Ok(dep) = generate_deployment(&cfg, 1) {
            let _ = compute_link_gains(&dep);
        }
    }
});
