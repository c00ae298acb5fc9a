#![no_main]

use libfuzzer_sys::fuzz_target;
use rankroute::formats::{parse_table, table_to_jsonl};
use rankroute::providers::TableProvider;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(table) = parse_table(text) {
        let again = parse_table(&table_to_jsonl(&table)).expect("written table parses");
        assert_eq!(table, again);
        let _ = TableProvider::from_table(table);
    }
});
