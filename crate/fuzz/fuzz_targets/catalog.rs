#![no_main]

use libfuzzer_sys::fuzz_target;
use rankroute::ModelCatalog;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cat) = ModelCatalog::from_json_str(text) {
        let again =
            ModelCatalog::from_json_str(&cat.to_json_string()).expect("written catalog parses");
        assert_eq!(cat, again);
    }
});
