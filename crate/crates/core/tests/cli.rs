use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn satqkd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_satqkd"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn short_config(dir: &Path) -> String {
    let path = dir.join("short.json");
    fs::write(
        &path,
        r#"{"horizon": 3600, "altitudes": [500000], "pairs": ["Toronto:DC"]}"#,
    )
    .unwrap();
    path.to_string_lossy().into_owned()
}

fn data_lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

#[test]
fn simulate_then_analyse_a_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(dir.path());
    let out = dir.path().to_str().unwrap();

    let sim = satqkd(&["simulate", "--config", &cfg, "--out", out]);
    assert!(sim.status.success(), "{}", String::from_utf8_lossy(&sim.stderr));
    let trace = dir.path().join("trace_Toronto-DC_500000m.csv");
    let text = fs::read_to_string(&trace).unwrap();
    assert!(text.starts_with("# satqkd trace\n# config_sha256="));
    let lines = data_lines(&trace);
    assert_eq!(lines[0], "time_s,sat_ring,sat_slot,fidelity,sifted_bits");
    assert_eq!(lines.len(), 3601);
    let minute = data_lines(&dir.path().join("trace_Toronto-DC_500000m_minute.csv"));
    assert_eq!(minute.len(), 61);

    let t = trace.to_str().unwrap();
    let kr = satqkd(&["keyrate", "--config", &cfg, "--trace", t, "--strategy", "0.9,0.98"]);
    assert!(kr.status.success(), "{}", String::from_utf8_lossy(&kr.stderr));
    let stdout = String::from_utf8(kr.stdout).unwrap();
    assert!(stdout.starts_with("strategy=3-block secret_bits="), "{stdout}");

    let opt = satqkd(&["optimize", "--config", &cfg, "--trace", t, "--out", out]);
    assert!(opt.status.success());
    let grid = data_lines(&dir.path().join("optimize.csv"));
    assert_eq!(grid[0], "threshold,sampling_rate,retained_bits,qber,test_bits,secret_bits");
    assert_eq!(grid.len(), 1 + 11 * 50);

    let cmp = satqkd(&["compare", "--config", &cfg, "--trace", t, "--out", out]);
    assert!(cmp.status.success());
    assert!(String::from_utf8(cmp.stdout).unwrap().contains("improvement_pct="));
    let rows = data_lines(&dir.path().join("compare.csv"));
    assert_eq!(rows[0], "pair,altitude_m,strategy,secret_bits,threshold,improvement_pct,normalized_bits");
    assert_eq!(rows.len(), 5);
    assert!(rows[1].starts_with("Toronto:DC,500000,non-blockwise,"));
}

#[test]
fn sweep_writes_results_and_plotdata() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(dir.path());
    let out = dir.path().join("run");
    let s = satqkd(&[
        "sweep",
        "--config",
        &cfg,
        "--altitude",
        "500000",
        "--altitude",
        "1300000",
        "--pair",
        "Toronto:DC",
        "--pair",
        "Toronto:Houston",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(s.status.success(), "{}", String::from_utf8_lossy(&s.stderr));
    let rows = data_lines(&out.join("results.csv"));
    assert_eq!(rows.len(), 1 + 2 * 2 * 4);
    for alt in ["500000", "1300000"] {
        let group: Vec<_> = rows[1..].iter().filter(|r| r.split(',').nth(1) == Some(alt)).collect();
        let norms: Vec<f64> = group
            .iter()
            .filter_map(|r| r.rsplit(',').next().unwrap().parse().ok())
            .collect();
        let max = norms.iter().cloned().fold(0.0, f64::max);
        assert!(max == 1.0 || max == 0.0, "{alt}: {norms:?}");
    }
    for f in ["threshold_sweep.csv", "improvement.csv", "trace_Toronto-DC_1300000m_minute.csv"] {
        assert!(out.join("plotdata").join(f).exists(), "{f}");
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = satqkd(&["sweep", "--config", "/definitely/not/here.json"]);
    assert_eq!(missing.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("/definitely/not/here.json"));

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"pairs": ["Toronto:Atlantis"]}"#).unwrap();
    let invalid = satqkd(&["simulate", "--config", bad.to_str().unwrap()]);
    assert_eq!(invalid.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&invalid.stderr).contains("Atlantis"));

    fs::write(&bad, "{ not json").unwrap();
    assert_eq!(satqkd(&["simulate", "--config", bad.to_str().unwrap()]).status.code(), Some(2));

    let no_trace = satqkd(&["keyrate", "--trace", dir.path().join("none.csv").to_str().unwrap()]);
    assert_eq!(no_trace.status.code(), Some(3));

    let garbage = dir.path().join("garbage.csv");
    fs::write(&garbage, "time_s,sat_ring,sat_slot,fidelity,sifted_bits\n1,2,3,x,4\n").unwrap();
    let parse = satqkd(&["keyrate", "--trace", garbage.to_str().unwrap()]);
    assert_eq!(parse.status.code(), Some(2));

    assert_eq!(satqkd(&["sweep", "--pair", "nocolon"]).status.code(), Some(2));
    assert_eq!(satqkd(&["keyrate", "--trace", "x", "--strategy", "9-block"]).status.code(), Some(2));
}
