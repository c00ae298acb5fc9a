#![no_main]

use libfuzzer_sys::fuzz_target;
use rankroute::simulation::Scenario;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    // parsing only; running could be arbitrarily expensive
    if let Ok(s) = Scenario::from_json_str(text) {
        let json = serde_json::to_string(&s).expect("scenario serializes");
        assert_eq!(
            Scenario::from_json_str(&json).expect("written scenario parses"),
            s
        );
    }
});
