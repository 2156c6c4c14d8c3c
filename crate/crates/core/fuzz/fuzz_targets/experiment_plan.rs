#![no_main]

use libfuzzer_sys::fuzz_target;

use hetnet_ce::harness::ExperimentPlan;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(plan) = ExperimentPlan::from_json(text) else {
        return;
    };
    let again = serde_json::to_string(&plan).expect("plan serializes");
    let back = ExperimentPlan::from_json(&again).expect("serialized plan parses");
    assert_eq!(plan, back);
});
