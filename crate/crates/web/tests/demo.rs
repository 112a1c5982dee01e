use serde_json::Value;
use trilemma_web::{deepfool_json, manifold_json, radar_from_csv};

#[test]
fn manifold_reports_coverage_and_radii() {
    let pts = r#"{"real": [[0,0],[1,0],[0,1],[1,1]], "synth": [[0.5,0.5],[0.5,1.5],[9,9],[9,10]]}"#;
    let v: Value = serde_json::from_str(&manifold_json(pts, 1).unwrap()).unwrap();
    assert_eq!(v["precision"], 0.5);
    assert_eq!(v["recall"], 1.0);
    assert_eq!(v["real_radii"], serde_json::json!([1.0, 1.0, 1.0, 1.0]));
    assert!(manifold_json(pts, 4).is_err());
    assert!(manifold_json("not json", 1).is_err());
}

#[test]
fn deepfool_trace_on_linear_model() {
    // Class 1 wins at x; the nearest boundary is with class 0 at distance 1/sqrt(2).
    let input = r#"{"weights": [[1,0],[0,1],[-1,-1]], "bias": [0,0,-5], "x": [0,1]}"#;
    let v: Value = serde_json::from_str(&deepfool_json(input).unwrap()).unwrap();
    let o = &v["outcome"];
    assert_eq!(o["flipped"], true);
    assert_eq!(o["original_class"], 1);
    assert_eq!(o["final_class"], 0);
    let expected = 1.02 / 2f64.sqrt();
    assert!((o["perturbation_l2"].as_f64().unwrap() - expected).abs() < 1e-6);
    assert!(v["trace"].as_array().unwrap().len() >= 2);
    assert!(deepfool_json(r#"{"weights": [[1]], "bias": [0, 1], "x": [0]}"#).is_err());
}

#[test]
fn radar_from_table() {
    let table = "generator,fidelity,diversity,speed,utility,robustness,privacy\n\
                 VAE,0.2,0.1,100,0.5,0.3,0.702\n\
                 GAN,0.6,0.4,200,0.7,0.2,0.409\n\
                 DM,0.8,0.7,1,0.9,0.4,0.442\n";
    let svg = radar_from_csv(table, false).unwrap();
    assert_eq!(svg.matches("class=\"series\"").count(), 3);
    assert!(svg.starts_with("<svg"));
    assert!(radar_from_csv(table, true).is_ok());
    assert!(radar_from_csv("generator,a\nx,1\n", false).is_err());
    assert!(radar_from_csv("g,1,2,3,4,5,6\nx,1,2,oops,4,5,6\n", false).is_err());
}
