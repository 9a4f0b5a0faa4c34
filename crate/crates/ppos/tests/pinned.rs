//! Pinned regression on the bundled I-SPY-like data (no true arm effect).

use std::path::Path;

use ppos::cli::{run, Cli};
use ppos::report::Report;

use clap::Parser;

const PINNED_PPOS: f64 = 0.1036;

#[test]
fn ispy_like_ppos_is_pinned() {
    let dir = tempfile::tempdir().unwrap();
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/ispy_like.toml");
    let out = dir.path().join("run");
    let cli = Cli::try_parse_from(["ppos", "ppos", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()]).unwrap();
    run(cli).unwrap();
    let report = Report::load(&out.join("report.json")).unwrap();
    assert_eq!(report.k, 2500);
    assert_eq!(report.n_invalid, 0);
    assert!(report.mc_se <= 0.01);
    assert_eq!(report.ppos, PINNED_PPOS);
}
