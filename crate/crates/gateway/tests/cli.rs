mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::*;
use ledgerquote_core::testkit::raydium_fixture;

const BIN: &str = env!("CARGO_BIN_EXE_ledgerquote");

fn write_config(dir: &Path) -> std::path::PathBuf {
    write_service_config(dir, "")
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("CHAIN_RPC_URL")
        .env_remove("LISTEN_ADDR")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn cost_csv_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let svg = dir.path().join("cost.svg");
    let o = run(&["cost", "--scenario", "stream", "--hours", "2", "--plot", svg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "t_hours,module_cost,metered_mean,metered_ci_low,metered_ci_high,band");
    assert_eq!(lines.len(), 4);
    assert!(lines[2].starts_with("1,0.000000,192.000000,"), "{}", lines[2]);
    assert!(std::fs::read_to_string(svg).unwrap().starts_with("<svg"));

    let o = run(&["cost", "--scenario", "event", "--hours", "48", "--step", "12"]);
    let out = stdout(&o);
    let last = out.lines().last().unwrap();
    assert!(last.starts_with("48,1.350000,921.600000,"), "{last}");
}

#[test]
fn bench_table() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("samples.csv");
    std::fs::write(&input, "asset,timestamp,predicted,reference\nA,1,101,100\nA,2,99,100\n").unwrap();
    let o = run(&["bench", "--input", input.to_str().unwrap()]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 3);
    assert!(out.lines().last().unwrap().starts_with("ALL"));
    assert!(out.contains("1.00"));

    let o = run(&["bench", "--input", dir.path().join("missing.csv").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn price_parse_and_ohlcv_over_fixtures() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let cfg = cfg.to_str().unwrap();

    let o = run(&["--config", cfg, "price", "--mint", &x().to_string(), "--t", &(T0 + 20).to_string()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!((v["price"].as_str(), v["slot"].as_u64()), (Some("0.5"), Some(1020)));

    let sig = raydium_fixture().transaction.signatures[0].clone();
    let o = run(&["--config", cfg, "parse", &sig]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["swapInfo"]["amm_tags"], serde_json::json!(["RAYDIUM"]));

    let doc = dir.path().join("tx.json");
    std::fs::write(&doc, serde_json::to_vec(&rpc_document(&non_swap())).unwrap()).unwrap();
    let o = run(&["--config", cfg, "parse", "--file", doc.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));

    let o = run(&[
        "--config",
        cfg,
        "ohlcv",
        "--mint",
        &y().to_string(),
        "--from",
        &T0.to_string(),
        "--to",
        &(T0 + 60).to_string(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 3);
    assert!(out.lines().nth(1).unwrap().starts_with("1699999980,1.5,1.5,1.5,1.5,"));
}

#[test]
fn fixtures_flag_and_failures_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path());
    let fixtures = dir.path().join("blocks.jsonl");
    // bundled registry does not know the synthetic programs: nothing trades
    let o = run(&[
        "--fixtures",
        fixtures.to_str().unwrap(),
        "price",
        "--mint",
        &x().to_string(),
        "--t",
        &(T0 + 20).to_string(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no price available"));

    // no backend at all
    let o = run(&["price", "--mint", &x().to_string(), "--t", "0"]);
    assert_eq!(o.status.code(), Some(1));
}
