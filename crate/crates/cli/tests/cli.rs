mod common;

use common::*;
use rankroute::formats::LeaderboardDoc;
use rankroute_cli::api::RouteResponse;

#[test]
fn no_arguments_is_a_usage_error() {
    let o = run(&[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Usage"));
    assert_eq!(run(&["fit", "--bogus"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn fit_three_to_one_gives_ln3() {
    let dir = tempfile::tempdir().unwrap();
    let mut votes = String::new();
    for outcome in ["model_a", "model_a", "model_a", "model_b"] {
        votes.push_str(&format!(
            r#"{{"prompt":"q","model_a":"x","model_b":"y","outcome":"{outcome}"}}"#
        ));
        votes.push('\n');
    }
    let v = write(dir.path(), "v.jsonl", &votes);
    let out = dir.path().join("lb.json");
    let o = run(&["fit", "--votes", s(&v), "--kind", "bt", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let doc = LeaderboardDoc::from_json_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(doc.models, vec!["x", "y"]);
    assert!((doc.coefficients[0] - doc.coefficients[1] - 3f64.ln()).abs() < 1e-6);
    assert_eq!(doc.anchor.as_deref(), Some("sum_zero"));
}

#[test]
fn validate_reports_the_bad_line() {
    let dir = tempfile::tempdir().unwrap();
    let v = write(
        dir.path(),
        "bad.jsonl",
        "{\"prompt\":\"q\",\"model_a\":\"x\",\"model_b\":\"y\",\"outcome\":\"tie\"}\n{\"prompt\":\"q\",\"model_a\":\"x\"\n",
    );
    let o = run(&["validate", "--votes", s(&v)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
    let good = write(dir.path(), "cat.json", CATALOG_2);
    let o = run(&["validate", "--catalog", s(&good)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("2 models"));
    assert_eq!(run(&["validate"]).status.code(), Some(1));
}

#[test]
fn route_with_a_binding_budget_mixes_evenly() {
    let dir = tempfile::tempdir().unwrap();
    let cat = write(dir.path(), "cat.json", CATALOG_2);
    let lb = write(dir.path(), "lb.json", LB_2);
    let provider = format!("constant:{}", s(&lb));
    let o = run(&[
        "route",
        "--prompt",
        "2+2?",
        "--catalog",
        s(&cat),
        "--provider",
        &provider,
        "--budget",
        "1.5",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r: RouteResponse = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(r.policy[0].probability, 0.5);
    assert_eq!(r.policy[1].probability, 0.5);
    assert!((r.predicted_win_rate - 0.5).abs() < 1e-15);
    let o = run(&[
        "route",
        "--prompt",
        "x",
        "--catalog",
        s(&cat),
        "--provider",
        &provider,
    ]);
    let r: RouteResponse = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(r.model, "big");
    let o = run(&[
        "route",
        "--prompt",
        "x",
        "--catalog",
        s(&cat),
        "--provider",
        &provider,
        "--budget",
        "0.5",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("below the cheapest"));
}

#[test]
fn missing_inputs_are_data_errors_and_bad_specs_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cat = write(dir.path(), "cat.json", CATALOG_2);
    let o = run(&[
        "route",
        "--prompt",
        "x",
        "--catalog",
        s(&cat),
        "--provider",
        "table:/nonexistent",
    ]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&[
        "route",
        "--prompt",
        "x",
        "--catalog",
        s(&cat),
        "--provider",
        "magic",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn aggregate_of_one_prompt_is_its_leaderboard() {
    let dir = tempfile::tempdir().unwrap();
    let cat = write(dir.path(), "cat.json", CATALOG_2);
    let table = write(
        dir.path(),
        "t.jsonl",
        "{\"id\":\"p1\",\"kind\":\"bt\",\"coefficients\":[0.7,-0.7]}\n{\"id\":\"p2\",\"kind\":\"bt\",\"coefficients\":[-2,2]}\n",
    );
    let prompts = write(
        dir.path(),
        "p.jsonl",
        "{\"prompt\":\"hello\",\"prompt_id\":\"p1\"}\n",
    );
    let o = run(&[
        "aggregate",
        "--prompts",
        s(&prompts),
        "--catalog",
        s(&cat),
        "--provider",
        &format!("table:{}", s(&table)),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let doc = LeaderboardDoc::from_json_str(&stdout(&o)).unwrap();
    assert!((doc.coefficients[0] - 0.7).abs() < 1e-8);
    assert!((doc.coefficients[1] + 0.7).abs() < 1e-8);
}

#[test]
fn train_then_route_with_the_linear_provider() {
    let dir = tempfile::tempdir().unwrap();
    let cat = write(dir.path(), "cat.json", CATALOG_2);
    let mut votes = String::new();
    for i in 0..400 {
        let (text, winner) = if i % 2 == 0 {
            ("solve this math integral", "model_a")
        } else {
            ("write a poem about rain", "model_b")
        };
        votes.push_str(&format!(
            r#"{{"prompt":"{text}","model_a":"big","model_b":"small","outcome":"{winner}"}}"#
        ));
        votes.push('\n');
    }
    let v = write(dir.path(), "v.jsonl", &votes);
    let model = dir.path().join("linear.json");
    let o = run(&[
        "train",
        "--votes",
        s(&v),
        "--catalog",
        s(&cat),
        "--dim",
        "1024",
        "--epochs",
        "3",
        "--seed",
        "1",
        "--out",
        s(&model),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let provider = format!("linear:{}", s(&model));
    for (prompt, expect) in [
        ("math integral please", "big"),
        ("a poem about rain", "small"),
    ] {
        let o = run(&[
            "route",
            "--prompt",
            prompt,
            "--catalog",
            s(&cat),
            "--provider",
            &provider,
        ]);
        let r: RouteResponse = serde_json::from_str(&stdout(&o)).unwrap();
        assert_eq!(r.model, expect, "{prompt}");
    }
}

#[test]
fn analyze_prints_a_table_and_writes_json() {
    let dir = tempfile::tempdir().unwrap();
    let cat = write(
        dir.path(),
        "cat.json",
        r#"{"models":[{"name":"old","cost":1},{"name":"new","cost":1}]}"#,
    );
    let cats = write(
        dir.path(),
        "c.json",
        r#"{"categories":{"code":{"kind":"bt","models":["old","new"],"coefficients":[0,1]},
                          "math":{"kind":"bt","models":["old","new"],"coefficients":[1,0]}}}"#,
    );
    let prompts = write(
        dir.path(),
        "p.jsonl",
        "{\"prompt\":\"a\",\"category_path\":[\"code\"]}\n{\"prompt\":\"b\",\"category_path\":[\"math\"]}\n",
    );
    let out = dir.path().join("report.json");
    let o = run(&[
        "analyze",
        "--prompts",
        s(&prompts),
        "--catalog",
        s(&cat),
        "--provider",
        &format!("category:{}", s(&cats)),
        "--reference",
        "old",
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("math") && text.contains('*'), "{text}");
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(json["flags"].as_array().unwrap().len(), 1);
    assert_eq!(json["flags"][0]["category"], "math");
}

#[test]
fn simulate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write(
        dir.path(),
        "s.json",
        r#"{"world":{"seed":2,"num_models":3,"num_categories":2,"prompts_per_category":4,"effect_scale":1.0},"budgets":[1.5,null],"n_votes":500,"seed":1}"#,
    );
    let a = run(&["simulate", "--scenario", s(&sc)]);
    let b = run(&["simulate", "--scenario", s(&sc)]);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    let c = run(&["simulate", "--scenario", s(&sc), "--seed", "9"]);
    assert_ne!(a.stdout, c.stdout);
}
