#![no_main]

use libfuzzer_sys::fuzz_target;
use rankroute::formats::LeaderboardDoc;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(doc) = LeaderboardDoc::from_json_str(text) {
        let again =
            LeaderboardDoc::from_json_str(&doc.to_json_string()).expect("written doc parses");
        assert_eq!(doc, again);
        let _ = doc.leaderboard();
        let _ = doc.anchor();
    }
});
