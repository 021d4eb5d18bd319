use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn txshare(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_txshare"))
        .args(args)
        .current_dir(dir)
        .env_remove("TXSHARE_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn distance_sweep_rows_and_ordering() {
    let dir = tempfile::tempdir().unwrap();
    let o = txshare(&["analytic-sweep-distance"], dir.path());
    assert!(o.status.success());
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 3 * 41);
    let p = |proto: &str| -> Vec<f64> {
        rows.iter()
            .filter(|r| r.starts_with(&format!("{proto},")))
            .map(|r| r.rsplit(',').next().unwrap().parse().unwrap())
            .collect()
    };
    let (e, t, s) = (p("edca"), p("trigger"), p("sharing"));
    for i in 0..41 {
        assert!(s[i] >= t[i] && t[i] >= e[i], "row {i}");
    }

    let o = txshare(&["analytic-sweep-distance", "--d-max", "0"], dir.path());
    assert_eq!(stdout(&o).lines().count(), 1 + 3);
}

#[test]
fn share_ratio_sweep_rows() {
    let dir = tempfile::tempdir().unwrap();
    let o = txshare(&["--out-dir", "out", "analytic-sweep-share-ratio"], dir.path());
    assert!(o.status.success());
    assert!(o.stdout.is_empty(), "CSV goes to the file, not stdout");
    let text = fs::read_to_string(dir.path().join("out/sweep_share_ratio.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 3 * 21);
    let edca: Vec<&str> = text
        .lines()
        .filter(|l| l.starts_with("edca,"))
        .map(|l| l.rsplit(',').next().unwrap())
        .collect();
    assert!(edca.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn bad_flags_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(txshare(&["analytic-sweep-distance", "--step", "-1"], dir.path()).status.code(), Some(2));
    assert_eq!(txshare(&["simulate"], dir.path()).status.code(), Some(2));
    let o = txshare(&["simulate", "--scenario", "nope"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sharing/obss-light/ac0"));
    fs::write(dir.path().join("bad.toml"), "name = 3").unwrap();
    assert_eq!(txshare(&["simulate", "--config", "bad.toml"], dir.path()).status.code(), Some(2));
}

#[test]
fn simulate_is_deterministic_and_traces() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "--out-dir", "a", "simulate", "--scenario", "trigger/obss-large/ac3", "--seed", "2",
        "--duration-s", "2", "--trace",
    ];
    let first = txshare(&args, dir.path());
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let mut again = args;
    again[1] = "b";
    assert!(txshare(&again, dir.path()).status.success());
    let stem = "trigger_obss-large_ac3_seed2";
    for suffix in ["cdf.csv", "summary.json", "trace.csv"] {
        let a = fs::read(dir.path().join(format!("a/{stem}_{suffix}"))).unwrap();
        let b = fs::read(dir.path().join(format!("b/{stem}_{suffix}"))).unwrap();
        assert_eq!(a, b, "{suffix}");
    }
    let trace = format!("a/{stem}_trace.csv");
    let o = txshare(&["trace", &trace, "--query", "postponement"], dir.path());
    assert!(o.status.success());
    let line = stdout(&o);
    let postponed: u64 = line
        .split_whitespace()
        .find_map(|kv| kv.strip_prefix("postponed="))
        .unwrap()
        .parse()
        .unwrap();
    assert!(postponed > 0, "{line}");

    let o = txshare(&["trace", &trace, "--query", "timeline", "--node", "0"], dir.path());
    assert!(stdout(&o).lines().all(|l| l.split(',').nth(1) == Some("0")));
}

#[test]
fn trace_inputs() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("empty.csv"), "").unwrap();
    let o = txshare(&["trace", "empty.csv"], dir.path());
    assert!(o.status.success());
    assert!(stdout(&o).contains("gaps=0"));
    fs::write(dir.path().join("bad.csv"), "1,2\n").unwrap();
    assert_eq!(txshare(&["trace", "bad.csv"], dir.path()).status.code(), Some(2));
    assert_eq!(txshare(&["trace", "missing.csv"], dir.path()).status.code(), Some(2));
}

#[test]
fn env_sets_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_txshare"))
        .args(["simulate", "--scenario", "edca/obss-light/ac0", "--duration-s", "1"])
        .current_dir(dir.path())
        .env("TXSHARE_OUT_DIR", "from_env")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(dir.path().join("from_env/edca_obss-light_ac0_seed1_cdf.csv").exists());
}

#[test]
fn small_batch() {
    let dir = tempfile::tempdir().unwrap();
    let o = txshare(
        &["--out-dir", "r", "batch", "--protocols", "sharing,trigger", "--seeds", "1", "--duration-s", "1", "--workers", "2"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let cdfs = fs::read_dir(dir.path().join("r"))
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().ends_with("_cdf.csv"))
        .count();
    assert_eq!(cdfs, 12);
    assert!(dir.path().join("r/comparison.json").exists());
    assert!(stdout(&o).contains("sharing vs trigger"));
}
