#![no_main]

use libfuzzer_sys::fuzz_target;

use hetnet_ce::assoc::{bs_loads, Association};

// First byte picks the BS count, the rest is the JSON integer array.
fuzz_target!(|data: &[u8]| {
    let Some((&n, rest)) = data.split_first() else {
        return;
    };
    let n_bs = usize::from(n % 16);
    let text = String::from_utf8_lossy(rest);
    let Ok(a) = Association::from_json(&text, n_bs) else {
        return;
    };
    assert_eq!(bs_loads(&a).iter().sum::<usize>(), a.n_users());
    if a.n_users() * n_bs <= 1 << 16 {
        let bin = a.to_binary();
        assert_eq!(
            Association::from_binary(&bin, n_bs).expect("binary round trip"),
            a
        );
    }
    assert_eq!(
        Association::from_json(&a.to_json(), n_bs).expect("json round trip"),
        a
    );
});
