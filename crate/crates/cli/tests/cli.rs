use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bertrand_mnl::mnl::equilibrium_outcome;
use bertrand_mnl::{Assortment, ItemCatalog};
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bertrand-mnl"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn write(dir: &tempfile::TempDir, name: &str, text: &str) -> String {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn example_one_two_item_equilibrium() {
    let cat = configs().join("two_items.json");
    let v = json(&run(&["equilibrium", "--catalog", cat.to_str().unwrap(), "--assortment", "1,2"]));
    assert!((v["q0"].as_f64().unwrap() - 0.331487).abs() < 1e-6);
    assert_eq!(v["items"][0]["item"], 1);
    assert!((v["items"][0]["demand"].as_f64().unwrap() - 0.241216).abs() < 1e-6);
    assert!((v["items"][1]["demand"].as_f64().unwrap() - 0.427298).abs() < 1e-6);
    assert!((v["total_revenue"].as_f64().unwrap() - 1.064005).abs() < 1e-6);
}

#[test]
fn single_item_assortment_matches_two_decimals() {
    let cat = configs().join("two_items.json");
    let v = json(&run(&["equilibrium", "--catalog", cat.to_str().unwrap(), "--assortment", "2"]));
    assert!((v["q0"].as_f64().unwrap() - 0.5).abs() < 1e-9);
    assert!((v["total_revenue"].as_f64().unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn empty_assortment_has_no_sales() {
    let dir = tempfile::tempdir().unwrap();
    let cat = write(&dir, "c.json", r#"{"schema":1,"qualities":[1.0,2.0],"inventories":[1,1]}"#);
    let v = json(&run(&["equilibrium", "--catalog", &cat, "--assortment", ""]));
    assert_eq!(v["q0"].as_f64().unwrap(), 1.0);
    assert_eq!(v["items"].as_array().unwrap().len(), 0);
}

#[test]
fn bad_item_index_is_a_config_error() {
    let cat = configs().join("two_items.json");
    let out = run(&["equilibrium", "--catalog", cat.to_str().unwrap(), "--assortment", "3"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["equilibrium", "--catalog", cat.to_str().unwrap(), "--assortment", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_fields_and_schema_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let extra = write(&dir, "a.json", r#"{"schema":1,"qualities":[1.0],"inventories":[1],"colour":1}"#);
    assert_eq!(run(&["equilibrium", "--catalog", &extra]).status.code(), Some(2));
    let future = write(&dir, "b.json", r#"{"schema":2,"qualities":[1.0],"inventories":[1]}"#);
    assert_eq!(run(&["equilibrium", "--catalog", &future]).status.code(), Some(2));
}

#[test]
fn missing_file_is_an_io_error() {
    assert_eq!(run(&["equilibrium", "--catalog", "/nonexistent/catalog.json"]).status.code(), Some(3));
}

#[test]
fn gcurve_range_must_stay_below_one() {
    assert_eq!(run(&["gcurve", "--to", "1.0"]).status.code(), Some(2));
    let out = run(&["gcurve", "--from", "0.5", "--to", "0.7", "--step", "0.01"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let max = text.lines().find(|l| l.starts_with("max,")).unwrap();
    let g: f64 = max.rsplit(',').next().unwrap().parse().unwrap();
    assert!(g >= 0.057);
    assert!(text.lines().nth(1).unwrap().starts_with("point,0.5,"));
}

#[test]
fn opt_reports_the_single_buyer_optimum() {
    let cat = configs().join("two_items.json");
    let v = json(&run(&["opt", "--catalog", cat.to_str().unwrap(), "--buyers", "1"]));
    assert!((v["objective"].as_f64().unwrap() - 1.064005).abs() < 1e-6);
    let v = json(&run(&["opt", "--catalog", cat.to_str().unwrap(), "--buyers", "1", "--fixed-revenue", "1,1"]));
    assert!((v["objective"].as_f64().unwrap() - (1.0 - 0.331487)).abs() < 1e-6);
}

#[test]
fn simulate_is_reproducible_and_writes_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("modified_vs_hybrid.json");
    let mut files = Vec::new();
    for (k, w) in ["1", "3"].iter().enumerate() {
        let out = dir.path().join(format!("run{k}.csv"));
        let status = bin()
            .args(["--replications", "100", "--seed", "5", "--workers", w, "--out"])
            .arg(&out)
            .args(["simulate", "--config"])
            .arg(&cfg)
            .status()
            .unwrap();
        assert!(status.success());
        files.push(fs::read(&out).unwrap());
    }
    assert_eq!(files[0], files[1]);
    let text = String::from_utf8(files.remove(0)).unwrap();
    assert!(text.starts_with("id,lambda,buyers,opt,hybrid_mean,hybrid_se,hybrid_ratio,hybrid_ratio_se,modified_mean"));
    assert_eq!(text.lines().count(), 7);
}

#[test]
fn unknown_policy_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        &dir,
        "s.json",
        r#"{"schema":1,"id":"x","qualities":[1.0],"inventories":[1],"policies":["oracle"],"lambda":0.5,"buyers":3}"#,
    );
    assert_eq!(run(&["simulate", "--config", &cfg]).status.code(), Some(2));
}

#[test]
fn one_buyer_market_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let market = write(&dir, "m.json", r#"{"schema":1,"theta":[[1.0,2.0]],"capacities":[1,1]}"#);
    let v = json(&run(&["network", "--market", &market]));
    let prices = v["report"]["prices"].as_array().unwrap();
    assert!((prices[0].as_f64().unwrap() - 1.317897).abs() < 1e-6);
    assert!((prices[1].as_f64().unwrap() - 1.746108).abs() < 1e-6);
    assert_eq!(v["report"]["converged"], true);
    assert_eq!(v["verification"]["gain_ok"], true);
}

#[test]
fn inconsistent_market_warns_but_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let market = write(&dir, "m.json", r#"{"schema":1,"theta":[[4.0],[0.5]],"capacities":[2]}"#);
    let out = run(&["network", "--market", &market]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    assert_eq!(json(&out)["consistency"]["consistent"], false);
}

#[test]
fn diagonal_segmentation_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let market = write(
        &dir,
        "m.json",
        r#"{"schema":1,"theta":[[2.0,0.0],[0.0,1.5]],"visibility":[[true,true],[true,true]],"capacities":[1,1]}"#,
    );
    let summary = dir.path().join("pools.csv");
    let out = bin()
        .args(["segment", "--compare", "--market", &market, "--summary"])
        .arg(&summary)
        .output()
        .unwrap();
    let v = json(&out);
    let pools = v["segmentation"]["pools"].as_array().unwrap();
    assert_eq!(pools.len(), 2);
    assert_eq!(pools[0]["buyers"], serde_json::json!([0]));
    assert_eq!(pools[1]["buyers"], serde_json::json!([1]));
    assert!(v["comparison"].is_object());
    let csv = fs::read_to_string(summary).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.starts_with("seller,buyers,price,revenue\n0,0,"));
}

#[test]
fn emitted_json_round_trips() {
    let cat = configs().join("two_items.json");
    let out = run(&["equilibrium", "--catalog", cat.to_str().unwrap()]);
    let v = json(&out);
    let cat = ItemCatalog::new(vec![1.0, 2.0], vec![1, 1]).unwrap();
    let direct = equilibrium_outcome(&cat, &Assortment::full(2)).unwrap();
    assert_eq!(v["q0"].as_f64().unwrap().to_bits(), direct.q0.to_bits());
    assert_eq!(v["total_revenue"].as_f64().unwrap().to_bits(), direct.total_revenue.to_bits());
    let reparsed: Value = serde_json::from_str(&serde_json::to_string(&v).unwrap()).unwrap();
    assert_eq!(reparsed, v);
}

#[test]
fn adversary_demo_ratios_shrink() {
    let out = run(&["adversary-demo", "--base", "10", "--horizon", "6"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let last = text.lines().last().unwrap();
    let ratio: f64 = last.split(',').nth(4).unwrap().parse().unwrap();
    assert!(ratio < 1e-3);
    assert_eq!(run(&["adversary-demo", "--base", "1.0"]).status.code(), Some(2));
    assert_eq!(run(&["adversary-demo", "--base", "10", "--horizon", "400"]).status.code(), Some(3));
}
