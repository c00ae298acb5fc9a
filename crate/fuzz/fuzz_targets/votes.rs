#![no_main]

use libfuzzer_sys::fuzz_target;
use rankroute::formats::{parse_votes, votes_to_jsonl};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(votes) = parse_votes(text) {
        let again = parse_votes(&votes_to_jsonl(&votes)).expect("written votes parse");
        assert_eq!(votes, again);
    }
});
