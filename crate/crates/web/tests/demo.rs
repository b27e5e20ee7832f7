use hte_web::{composite_index, simulate_and_fit, spei_curve};
use serde_json::Value;

#[test]
fn fit_returns_heatmap_and_two_gates() {
    let text = simulate_and_fit(r#"{"households": 150, "trees": 60, "seed": 3}"#).unwrap();
    let v: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["n_rows"], 300);
    assert_eq!(v["heatmap"]["cells"].as_array().unwrap().len(), 4);
    assert_eq!(v["gates"].as_array().unwrap().len(), 2);
    assert!(v["ate_std_err_per_sd"].as_f64().unwrap() > 0.0);
    assert_eq!(simulate_and_fit(r#"{"households": 150, "trees": 60, "seed": 3}"#).unwrap(), text);
}

#[test]
fn placebo_request_differs_from_true_fit() {
    let a = simulate_and_fit(r#"{"households": 100, "trees": 40}"#).unwrap();
    let b = simulate_and_fit(r#"{"households": 100, "trees": 40, "placebo_seed": 5}"#).unwrap();
    assert_ne!(a, b);
}

#[test]
fn bad_requests_are_errors() {
    assert!(simulate_and_fit("{").is_err());
    assert!(simulate_and_fit(r#"{"households": 5}"#).is_err());
    assert!(simulate_and_fit(r#"{"housholds": 50}"#).is_err());
}

#[test]
fn spei_curve_is_sorted_and_increasing() {
    let series: Vec<String> = (0..60)
        .map(|i| format!("{:.3}", -20.0 + (i as f64 * 0.7).exp().ln_1p() * 15.0 + (i % 7) as f64))
        .collect();
    let v: Value = serde_json::from_str(&spei_curve(&series.join(", ")).unwrap()).unwrap();
    let curve = v["curve"].as_array().unwrap();
    assert_eq!(curve.len(), 60);
    for pair in curve.windows(2) {
        assert!(pair[0][0].as_f64() <= pair[1][0].as_f64());
        assert!(pair[0][1].as_f64() <= pair[1][1].as_f64());
    }
    assert!(spei_curve("1 2 x").is_err());
    assert!(spei_curve("1 2 3").is_err());
}

#[test]
fn composite_index_spans_zero_to_hundred() {
    let csv = "radio,bike,roof\n0,1,0\n1,3,1\n2,5,0\n3,7,1\n4,9,1\n";
    let v: Value = serde_json::from_str(&composite_index(csv).unwrap()).unwrap();
    let scores: Vec<f64> = v["scores"].as_array().unwrap().iter().map(|s| s.as_f64().unwrap()).collect();
    assert_eq!(scores.len(), 5);
    assert!(scores[0].abs() < 1e-9);
    assert!((scores[4] - 100.0).abs() < 1e-9);
    assert!(composite_index("a,b\n1,x\n").is_err());
}
