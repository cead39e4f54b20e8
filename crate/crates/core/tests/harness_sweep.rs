use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use stbc_las::harness::output::{csv_string, parse_csv};
use stbc_las::harness::{
    emit_results, read_csv, run_ber_sweep, run_trials, siso_awgn_ber, write_csv, write_plot_data, CsirMode, Curve,
    ExperimentConfig, OutputFormat,
};

fn base(n: usize, seed: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.system.n_t = n;
    cfg.system.n_r = n;
    cfg.sweep.seed = Some(seed);
    cfg.sweep.record_timing = false;
    cfg
}

#[test]
fn csv_output_is_byte_reproducible() {
    let mut cfg = base(4, 11);
    cfg.sweep.snr_db = vec![4.0, 8.0];
    cfg.sweep.max_bits = 20_000;
    let a = csv_string(&run_ber_sweep(&cfg).unwrap()).unwrap();
    let b = csv_string(&run_ber_sweep(&cfg).unwrap()).unwrap();
    assert_eq!(a, b);
    // worker count does not change the result
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let c = pool.install(|| csv_string(&run_ber_sweep(&cfg).unwrap()).unwrap());
    assert_eq!(a, c);
}

#[test]
fn search_beats_filter_with_paired_draws() {
    // sign test over frames shared by both receivers
    let mut las = base(4, 12);
    las.detector.m_max = 1;
    let mut mmse = las.clone();
    mmse.detector.m_max = 0;
    for snr in [6.0, 8.0, 10.0] {
        let a = run_trials(&las, snr, 12, 3000).unwrap();
        let b = run_trials(&mmse, snr, 12, 3000).unwrap();
        let (la, lb): (u64, u64) = (a.iter().map(|o| o.errors).sum(), b.iter().map(|o| o.errors).sum());
        assert!(la < lb, "{snr} dB: LAS {la} errors, MMSE {lb}");
        let better = a.iter().zip(&b).filter(|(x, y)| x.errors < y.errors).count() as f64;
        let worse = a.iter().zip(&b).filter(|(x, y)| x.errors > y.errors).count() as f64;
        let n = better + worse;
        // one-sided sign test at roughly 3 standard deviations
        assert!(better - n / 2.0 > 3.0 * (n / 4.0).sqrt(), "{snr} dB: {better} better, {worse} worse");
    }
}

#[test]
fn estimated_csir_is_worse_than_perfect() {
    let mut perfect = base(4, 13);
    perfect.channel.data_blocks = 1;
    perfect.sweep.snr_db = vec![10.0, 14.0];
    perfect.sweep.min_errors = 400;
    let mut est = perfect.clone();
    est.channel.csir = CsirMode::OneShot;
    let p = run_ber_sweep(&perfect).unwrap();
    let e = run_ber_sweep(&est).unwrap();
    for (a, b) in p.iter().zip(&e) {
        assert!(a.ber < b.ber, "{} dB: perfect {} vs estimated {}", a.snr_db, a.ber, b.ber);
    }
}

#[test]
fn qpsk_reference_matches_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for snr_db in [0.0, 4.0, 8.0] {
        let gamma = 10f64.powf(snr_db / 10.0);
        // Es = 2 with +-1 rails, per-rail noise variance Es / (2 gamma)
        let sigma = (1.0 / gamma).sqrt();
        let bits = 10_000_000u64;
        let mut errors = 0u64;
        for _ in 0..bits {
            let b: bool = rng.random();
            let s = if b { 1.0 } else { -1.0 };
            let n: f64 = rng.sample(StandardNormal);
            if ((s + sigma * n) > 0.0) != b {
                errors += 1;
            }
        }
        let p = errors as f64 / bits as f64;
        let ci = 1.96 * (p * (1.0 - p) / bits as f64).sqrt();
        let exact = siso_awgn_ber(4, snr_db).unwrap();
        assert!((p - exact).abs() <= ci, "{snr_db} dB: simulated {p} ± {ci}, analytic {exact}");
    }
}

#[test]
fn sixteen_qam_reference_matches_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let rail = stbc_las::signal::pam_alphabet(4).unwrap();
    let snr_db = 10.0;
    let sigma = (10.0 / (2.0 * 10f64.powf(snr_db / 10.0))).sqrt();
    let symbols = 2_000_000u64;
    let mut errors = 0u64;
    for _ in 0..symbols {
        let i = rng.random_range(0..4);
        let s = rail.levels()[i];
        let n: f64 = rng.sample(StandardNormal);
        let r = rail.quantize(s + sigma * n);
        let j = rail.index_of(r).unwrap();
        errors += u64::from((rail.label(i) ^ rail.label(j)).count_ones());
    }
    let bits = 2 * symbols;
    let p = errors as f64 / bits as f64;
    let ci = 1.96 * (p * (1.0 - p) / bits as f64).sqrt();
    let exact = siso_awgn_ber(16, snr_db).unwrap();
    assert!((p - exact).abs() <= 1.5 * ci, "simulated {p} ± {ci}, analytic {exact}");
}

#[test]
fn csv_and_json_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = base(2, 16);
    cfg.sweep.snr_db = vec![2.0, 6.0];
    cfg.sweep.max_bits = 4000;
    let recs = run_ber_sweep(&cfg).unwrap();
    let path = dir.path().join("out.csv");
    write_csv(&path, &recs).unwrap();
    assert_eq!(read_csv(&path).unwrap(), recs);
    assert_eq!(parse_csv(&std::fs::read_to_string(&path).unwrap()).unwrap(), recs);

    let curve = Curve {
        label: "las".into(),
        records: recs.clone(),
    };
    let json = dir.path().join("out.json");
    emit_results(std::slice::from_ref(&curve), OutputFormat::Json, &json).unwrap();
    let back: Vec<stbc_las::harness::BerRecord> =
        serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(back, recs);

    let err = write_csv(&dir.path().join("missing/dir/out.csv"), &recs).unwrap_err();
    assert_eq!(err.category(), "io");
    assert!(err.to_string().contains("missing"));
    assert!(emit_results(&[curve.clone(), curve], OutputFormat::Csv, &path).is_err());
}

#[test]
fn plot_data_for_two_curves() {
    let dir = tempfile::tempdir().unwrap();
    let mut las = base(2, 17);
    las.sweep.snr_db = vec![0.0, 5.0, 10.0];
    las.sweep.max_bits = 8000;
    let mut mmse = las.clone();
    mmse.detector.m_max = 0;
    let curves = vec![
        Curve {
            label: "1-LAS".into(),
            records: run_ber_sweep(&las).unwrap(),
        },
        Curve {
            label: "MMSE only".into(),
            records: run_ber_sweep(&mmse).unwrap(),
        },
    ];
    let written = write_plot_data(dir.path(), &curves, None).unwrap();
    let names: Vec<String> = written
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    assert_eq!(names, vec!["1-LAS.dat", "MMSE_only.dat", "ber.svg"]);
    let series = std::fs::read_to_string(dir.path().join("1-LAS.dat")).unwrap();
    let rows: Vec<&str> = series.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0].split_whitespace().count(), 3);
    let svg = std::fs::read_to_string(dir.path().join("ber.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 2);
    assert!(svg.contains("1-LAS") && svg.contains("MMSE only"));
}
