use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stbc-las")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

const SMALL: [&str; 8] = ["--n-t", "2", "--n-r", "2", "--snr-db", "0,6", "--max-bits", "4000"];

#[test]
fn simulate_csv_is_reproducible() {
    let mut args = vec!["simulate", "--seed", "3", "--no-timing"];
    args.extend(SMALL);
    let a = run(&args);
    assert!(a.status.success(), "{}", stderr(&a));
    let text = stdout(&a);
    assert_eq!(text.lines().next().unwrap(), "snr_db,bits,errors,ber,ci95,mean_stages,mean_flips,wall_ms");
    assert_eq!(text.lines().count(), 3);
    assert_eq!(text, stdout(&run(&args)));
    let mut other = args.clone();
    other[2] = "4";
    assert_ne!(text, stdout(&run(&other)));
}

#[test]
fn seed_is_mandatory() {
    let o = run(&["simulate", "--n-t", "2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error[usage]:"));
    assert!(stderr(&o).contains("--seed"));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "[system]\nn_t = 2\nn_r = 2\nmodulation = 16\n\n[sweep]\nsnr_db = [4.0]\nmax_bits = 3000\nrecord_timing = false\n",
    )
    .unwrap();
    let out = dir.path().join("r.json");
    let o = run(&[
        "simulate",
        "--seed",
        "5",
        "-c",
        cfg.to_str().unwrap(),
        "--snr-db",
        "2,8",
        "--format",
        "json",
        "-o",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["snr_db"], 2.0);
    assert_eq!(rows[1]["wall_ms"], 0.0);
    // 16-QAM on a 2x2 code: 4 symbols of 4 bits per frame
    assert_eq!(rows[0]["bits"].as_u64().unwrap() % 16, 0);
}

#[test]
fn bad_config_reports_category() {
    let o = run(&["simulate", "--seed", "1", "--set", "system.modulation=8"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).starts_with("error[config]:"), "{}", stderr(&o));
    let o = run(&["simulate", "--seed", "1", "--format", "xml"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn unwritable_output_is_io_error() {
    let mut args = vec!["simulate", "--seed", "1", "-o", "/nonexistent-dir/out.csv"];
    args.extend(SMALL);
    let o = run(&args);
    assert_eq!(o.status.code(), Some(4));
    let err = stderr(&o);
    assert!(err.starts_with("error[io]:") && err.contains("/nonexistent-dir/out.csv"), "{err}");
}

#[test]
fn plot_data_and_plot_command() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for (m, name) in [("1", "las.csv"), ("0", "mmse.csv")] {
        let out = d.join(name);
        let mut args = vec!["simulate", "--seed", "2", "--m-max", m, "-o", out.to_str().unwrap()];
        args.extend(SMALL);
        assert!(run(&args).status.success());
    }
    let plots = d.join("plots");
    let o = run(&[
        "plot",
        &format!("1-LAS={}", d.join("las.csv").display()),
        d.join("mmse.csv").to_str().unwrap(),
        "--reference",
        "4",
        "-o",
        plots.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["1-LAS.dat", "mmse.dat", "siso_awgn.dat", "ber.svg"] {
        assert!(plots.join(f).is_file(), "{f} missing");
    }
    let svg = std::fs::read_to_string(plots.join("ber.svg")).unwrap();
    assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));

    let pd = d.join("pd");
    let mut args = vec!["simulate", "--seed", "2", "--format", "plot-data", "--label", "run", "-o", pd.to_str().unwrap()];
    args.extend(SMALL);
    assert!(run(&args).status.success());
    assert!(pd.join("run.dat").is_file() && pd.join("ber.svg").is_file());
}

#[test]
fn plot_rejects_malformed_csv() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "snr_db,ber\n1,0.1\n").unwrap();
    let o = run(&["plot", bad.to_str().unwrap(), "-o", dir.path().join("p").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(5));
    assert!(stderr(&o).starts_with("error[format]:"));
    let o = run(&["plot", "missing.csv", "-o", dir.path().join("p").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn capacity_table() {
    let o = run(&["capacity", "--n-t", "2", "--n-r", "2", "--snr-db", "0,10", "--trials", "500"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 2);
    for r in &rows {
        assert!(r[3] < r[1], "bound above perfect-CSIR capacity: {r:?}");
    }
    assert!(rows[1][1] > rows[0][1]);
}

#[test]
fn selftest_passes() {
    let o = run(&["selftest"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).lines().all(|l| l.starts_with("PASS ")));
}

#[test]
fn help_documents_snr_convention() {
    let o = run(&["simulate", "--help"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("SNR convention"));
}
