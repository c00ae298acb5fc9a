#![no_main]

use std::sync::Arc;

use libfuzzer_sys::fuzz_target;
use rankroute::providers::ConstantProvider;
use rankroute::{Leaderboard, ModelCatalog};
use rankroute_cli::api::{Engine, RouteRequest};

fuzz_target!(|data: &[u8]| {
    let Ok(req) = serde_json::from_slice::<RouteRequest>(data) else {
        return;
    };
    let engine = Engine {
        catalog: ModelCatalog::new(
            vec!["big".into(), "mid".into(), "small".into()],
            vec![3.0, 2.0, 1.0],
            None,
        )
        .unwrap(),
        provider: Arc::new(ConstantProvider::new(Leaderboard::bt(vec![1.0, 0.3, -0.5])).unwrap()),
        default_budget: 2.5,
    };
    if let Ok(resp) = engine.route(&req) {
        let total: f64 = resp.policy.iter().map(|p| p.probability).sum();
        assert!((total - 1.0).abs() < 1e-9);
        assert!(resp.expected_cost <= resp.budget.unwrap_or(f64::INFINITY) + 1e-9);
    }
});
