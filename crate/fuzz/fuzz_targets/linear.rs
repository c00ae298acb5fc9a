#![no_main]

use libfuzzer_sys::fuzz_target;
use rankroute::providers::{CoefficientProvider, FeatureLinearProvider};
use rankroute::Prompt;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok((provider, models)) = FeatureLinearProvider::from_json_str(text) {
        let _ = provider.evaluate(&Prompt::new("write a poem about the sea").unwrap());
        if let Ok(json) = provider.to_json_string(&models) {
            let (again, names) =
                FeatureLinearProvider::from_json_str(&json).expect("written provider parses");
            assert_eq!(again, provider);
            assert_eq!(names, models);
        }
    }
});
