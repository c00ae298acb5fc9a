#![no_main]

use libfuzzer_sys::fuzz_target;
use rankroute::providers::RemoteResponse;
use rankroute::FeedbackKind;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let models = ["a".to_string(), "b".to_string(), "c".to_string()];
    for kind in [FeedbackKind::Bt, FeedbackKind::Rk, FeedbackKind::GroundedRk] {
        if let Ok(lb) = RemoteResponse::decode(text, &models, kind) {
            assert_eq!(lb.num_models(), models.len());
        }
    }
});
