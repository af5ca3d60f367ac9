use newsbias_demo::{anonymize_json, bias_lab_json, similarity_json};

#[test]
fn anonymizes_name_and_alias() {
    let v = anonymize_json(
        "'Halo Infinite' delayed, will not debut with new Xbox; Microsoft stock slips",
        "Microsoft Corporation",
        "Xbox, Azure",
    )
    .unwrap();
    assert_eq!(
        v["replaced"],
        "'Halo Infinite' delayed, will not debut with new Blahblahblah; Blahblahblah stock slips"
    );
    assert_eq!(v["cleaned_name"], "Microsoft");
    assert_eq!(v["spans"].as_array().unwrap().len(), 2);
}

#[test]
fn empty_name_is_an_error() {
    assert!(anonymize_json("Shares rise", "Inc.", "").is_err());
}

#[test]
fn similarity_reports_threshold_decision() {
    let v = similarity_json("Costco", "Costco Wholesale");
    assert_eq!(v["replaced"], true);
    assert_eq!(v["token_set"], 100.0);
    let v = similarity_json("Philips", "Phillips 66");
    assert!(v["window"].as_f64().unwrap() < 100.0);
}

#[test]
fn small_lab_runs_and_limits_size() {
    let v = bias_lab_json(1, 40, 60, 0.5, 0.0, 0.2).unwrap();
    assert!(v["gap_bp"].as_f64().unwrap() > 0.0);
    assert!(bias_lab_json(1, 1000, 1000, 0.0, 0.0, 0.2).is_err());
}
