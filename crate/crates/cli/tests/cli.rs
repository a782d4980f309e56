use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;
use upa_codebook::codebook::{design_codebook, DesignOptions, Sweep};
use upa_codebook::pattern::pattern_report;
use upa_codebook::{CodebookConfig, UpaConfig};

fn upacb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_upacb"))
        .args(args)
        .output()
        .expect("spawn upacb")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SMALL: &str = r#"
seed = 1
sweep = "full"

[upa]
m_h = 8
m_v = 4
n_rf = 3
b_phase = 6

[codebook]
q_h = 4
q_v = 2
l_h = 2
l_v = 2
i_phases = 3

[scenario]
preset = "scenario1"

[simulation]
snr_db = [0.0, 10.0]
realizations = 200
"#;

fn write_config(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

fn design(dir: &TempDir, cfg_text: &str, name: &str) -> PathBuf {
    let cfg = write_config(dir, &format!("{name}.toml"), cfg_text);
    let out = dir.path().join(format!("{name}.txt"));
    let o = upacb(&["design", "--config", s(&cfg), "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

#[test]
fn design_writes_codebook_and_stats() {
    let dir = TempDir::new().unwrap();
    let out = design(&dir, SMALL, "cb");
    let stats: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.with_extension("stats.json")).unwrap()).unwrap();
    assert_eq!(stats["candidates_evaluated"], 9);
    assert!(stats["best_mse"].as_f64().unwrap() >= 0.0);
    assert!(stats["wall_time_s"].as_f64().unwrap() >= 0.0);
    assert!(fs::read_to_string(&out).unwrap().starts_with("upa-codebook "));
}

#[test]
fn designs_are_bit_identical() {
    let dir = TempDir::new().unwrap();
    let a = design(&dir, SMALL, "a");
    let b = design(&dir, SMALL, "b");
    assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap());
}

#[test]
fn pattern_round_trip_matches_in_memory_pipeline() {
    let dir = TempDir::new().unwrap();
    let out = design(&dir, SMALL, "cb");
    let o = upacb(&["pattern", s(&out), "--grid-res", "24x12"]);
    assert!(o.status.success());
    let upa = UpaConfig::new(8, 4, 3, 6).unwrap();
    let cb = CodebookConfig::new(4, 2, 2, 2, 3);
    let book = design_codebook(&upa, &cb, &Sweep::Full, 1, &DesignOptions::default()).unwrap();
    let want = pattern_report(&book.composites(), 2, &upa, 24, 12).to_csv();
    assert_eq!(String::from_utf8(o.stdout).unwrap(), want);
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("mean gain"));
}

#[test]
fn kp_dft_pattern_row_count_and_single_beam() {
    let dir = TempDir::new().unwrap();
    let kp = SMALL.replace("l_h = 2\nl_v = 2\ni_phases = 3\n", "kind = \"kp_dft\"\n");
    let out = design(&dir, &kp, "kp");
    let csv = dir.path().join("kp.csv");
    let o = upacb(&["pattern", s(&out), "--grid-res", "30x10", "--out", s(&csv)]);
    assert!(o.status.success());
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 1 + 300);
    assert_eq!(text.lines().next().unwrap(), "theta_h,theta_v,psi_h,psi_v,best_q,best_p,gain");

    let single = kp.replace("q_h = 4\nq_v = 2", "q_h = 1\nq_v = 1");
    let out = design(&dir, &single, "one");
    let o = upacb(&["pattern", s(&out), "--grid-res", "10x5"]);
    let text = String::from_utf8(o.stdout).unwrap();
    for row in text.lines().skip(1) {
        let f: Vec<&str> = row.split(',').collect();
        assert_eq!((f[4], f[5]), ("1", "1"));
    }
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();

    let missing = write_config(&dir, "missing.toml", &SMALL.replace("n_rf = 3\n", ""));
    let o = upacb(&["design", "--config", s(&missing)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("n_rf"));
    assert!(o.stdout.is_empty());

    let infeasible = write_config(&dir, "inf.toml", &SMALL.replace("q_h = 4", "q_h = 16"));
    assert_eq!(upacb(&["design", "--config", s(&infeasible)]).status.code(), Some(3));

    let out = design(&dir, SMALL, "cb");
    let text = fs::read_to_string(&out).unwrap();
    let corrupt = dir.path().join("corrupt.txt");
    fs::write(&corrupt, text.replacen("c = ", "c = 0.5 ", 1)).unwrap();
    let o = upacb(&["pattern", s(&corrupt)]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line"));
    assert_eq!(upacb(&["pattern", s(&dir.path().join("nope.txt"))]).status.code(), Some(4));

    let other_upa = SMALL.replace("m_h = 8", "m_h = 10");
    let other = design(&dir, &other_upa, "other");
    let cfg = write_config(&dir, "sim.toml", SMALL);
    let o = upacb(&["simulate", s(&out), s(&other), "--config", s(&cfg)]);
    assert_eq!(o.status.code(), Some(5));
}

#[test]
fn simulate_is_paired_and_worker_independent() {
    let dir = TempDir::new().unwrap();
    let a = design(&dir, SMALL, "prop");
    let kp = design(
        &dir,
        &SMALL.replace("l_h = 2\nl_v = 2\ni_phases = 3\n", "kind = \"kp_dft\"\n"),
        "kp",
    );
    let cfg = write_config(&dir, "sim.toml", SMALL);
    let run = |workers: &str| {
        let o = upacb(&["simulate", s(&a), s(&kp), "--config", s(&cfg), "--workers", workers]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        String::from_utf8(o.stdout).unwrap()
    };
    let one = run("1");
    assert_eq!(one, run("4"));
    let lines: Vec<&str> = one.lines().collect();
    assert_eq!(lines[0], "snr_db,codebook,mean_rate,stderr,misalign_rate,resound_rate,feedback_bits");
    assert_eq!(lines.len(), 1 + 4);
    assert!(lines[1].starts_with("0,prop,"));
    assert!(lines[3].starts_with("0,kp,"));

    // the same codebook twice gives a zero paired difference
    let o = upacb(&["compare", s(&a), s(&a), "--config", s(&cfg)]);
    let text = String::from_utf8(o.stdout).unwrap();
    for row in text.lines().skip(1) {
        let f: Vec<&str> = row.split(',').collect();
        assert_eq!(f[3].parse::<f64>().unwrap(), 0.0);
    }
}

#[test]
fn verify_reports_and_fails_on_zero_tolerance() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "v.toml", SMALL);
    let o = upacb(&["verify", "--config", s(&cfg), "--trials", "20"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["all_passed"], true);
    let names: Vec<&str> = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert!(names.contains(&"dictionary_deviation_v"));

    let o = upacb(&["verify", "--config", s(&cfg), "--trials", "20", "--tolerance-scale", "0"]);
    assert_ne!(o.status.code(), Some(0));
}
