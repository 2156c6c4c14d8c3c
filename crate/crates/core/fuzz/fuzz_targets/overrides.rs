//! `--set key=value` lines applied to the default plan.

#![no_main]

use libfuzzer_sys::fuzz_target;

use hetnet_ce::harness::ExperimentPlan;
use hetnet_ce::overrides::{resolve, Override};

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    let Ok(ovs) = text
        .lines()
        .map(Override::parse)
        .collect::<Result<Vec<_>, _>>()
    else {
        return;
    };
    let doc = serde_json::to_value(ExperimentPlan::default()).expect("default plan serializes");
    if let Ok((plan, _)) = resolve::<ExperimentPlan>(doc, &ovs) {
        let _ = plan.validate();
    }
});
