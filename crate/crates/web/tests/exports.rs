use qicert_web::{certify_scalars, constants, failure_curve};
use serde_json::Value;

fn parse(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

#[test]
fn constants_match_the_library() {
    let v = parse(&constants(2.0 * 2f64.ln(), 0.5));
    assert!((v["ours"]["c_mu"].as_f64().unwrap() - 0.104_764_946_049_101_3).abs() < 1e-15);
    assert!(parse(&constants(1.0, 1.5))["error"].is_string());
}

#[test]
fn certify_reports_hypotheses() {
    let v = parse(&certify_scalars(1e-3, 100.0, 1e6, 0.5, 1.0, 3.0));
    assert_eq!(v["hypotheses"]["certified"], Value::Bool(true));
    assert_eq!(v["tuning"]["constraints"].as_array().unwrap().len(), 6);
    assert!(parse(&certify_scalars(1e-3, 100.0, 1e6, 0.5, 1.0, 2.5))["error"].is_string());
}

#[test]
fn failure_curve_is_nonincreasing() {
    let v = parse(&failure_curve(16, 32, 4, 1.5, 10, 400, 7));
    let p: Vec<f64> = v["p_hat"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    assert_eq!(p.len(), 10);
    assert!(p.windows(2).all(|w| w[1] <= w[0]));
    assert!(parse(&failure_curve(1000, 1000, 4, 1.0, 10, 10, 0))["error"].is_string());
}
