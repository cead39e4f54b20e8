//! Quick consistency checks behind `stbc-las selftest`.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::{complex_normal, db_to_linear, draw_channel, draw_noise};
use crate::detector::{local_minimum_check, ml_oracle, mlas_detect, optimal_step, DetectorConfig, InitialFilter};
use crate::detector::las::step_cost;
use crate::harness::{run_point, siso_awgn_ber, ExperimentConfig};
use crate::signal::SignalSpace;
use crate::stbc::CdaCode;
use crate::system::{build_transmission_system, stack_real};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, f: impl FnOnce() -> Result<String, String>) -> Check {
    match f() {
        Ok(detail) => Check {
            name,
            passed: true,
            detail,
        },
        Err(detail) => Check {
            name,
            passed: false,
            detail,
        },
    }
}

/// Runs every check; each takes well under a second in release builds.
pub fn run_selftest(seed: u64) -> Vec<Check> {
    vec![
        check("step-rule", || step_rule(seed)),
        check("code-transforms", || code_transforms(seed)),
        check("noise-power", || noise_power(seed)),
        check("detector-local-minimum", || local_minima(seed)),
        check("detector-ml-small", || small_ml(seed)),
        check("siso-reference", siso_reference),
        check("sweep-determinism", || determinism(seed)),
    ]
}

fn step_rule(seed: u64) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 20_000;
    for _ in 0..n {
        let z: f64 = rng.random_range(-20.0..20.0);
        let a: f64 = rng.random_range(0.1..5.0);
        let l = optimal_step(z, a);
        let best = (0..=40)
            .map(|k| step_cost(2.0 * k as f64, z, a))
            .fold(f64::INFINITY, f64::min);
        if step_cost(l, z, a) > best + 1e-9 * (1.0 + best.abs()) {
            return Err(format!("z = {z}, a = {a}: step {l} is not cost-minimal"));
        }
    }
    Ok(format!("{n} random draws"))
}

fn code_transforms(seed: u64) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for n in [2, 4, 8] {
        let code = CdaCode::ill_only(n).map_err(|e| e.to_string())?;
        let v = DVector::from_iterator(n * n, (0..n * n).map(|_| complex_normal(&mut rng)));
        let fast = code.va_adjoint_multiply(&v, true).map_err(|e| e.to_string())?;
        let slow = code.va_adjoint_multiply(&v, false).map_err(|e| e.to_string())?;
        let err = (fast - slow).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if err > 1e-9 {
            return Err(format!("n = {n}: transform paths differ by {err:e}"));
        }
    }
    Ok("FFT and direct paths agree for n = 2, 4, 8".into())
}

fn noise_power(seed: u64) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws = 200;
    let total: f64 = (0..draws).map(|_| draw_noise(8, 8, &mut rng).norm_squared()).sum();
    let per_entry = total / (draws * 64) as f64;
    if (per_entry - 1.0).abs() > 0.05 {
        return Err(format!("per-entry noise power {per_entry:.4}"));
    }
    Ok(format!("per-entry noise power {per_entry:.4}"))
}

struct Problem {
    system: crate::system::RealSystem,
    space: SignalSpace,
    y: DVector<f64>,
    nsr: f64,
}

fn problem(rng: &mut ChaCha8Rng, n: usize, snr_db: f64) -> Result<Problem, String> {
    let code = CdaCode::ill_only(n).map_err(|e| e.to_string())?;
    let system = build_transmission_system(&draw_channel(n, n, rng), &code).map_err(|e| e.to_string())?;
    let space = SignalSpace::qam(4, code.k()).map_err(|e| e.to_string())?;
    let x: Vec<f64> = (0..space.dim()).map(|_| if rng.random() { 1.0 } else { -1.0 }).collect();
    let sigma2 = n as f64 * 2.0 / db_to_linear(snr_db);
    let noise: Vec<Complex64> = (0..n * n).map(|_| complex_normal(rng)).collect();
    let y = system.h() * DVector::from_vec(x) + stack_real(&noise) * sigma2.sqrt();
    Ok(Problem {
        system,
        space,
        y,
        nsr: sigma2 / 2.0,
    })
}

fn local_minima(seed: u64) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = 20;
    for i in 0..count {
        let p = problem(&mut rng, 4, 6.0)?;
        let cfg = DetectorConfig::new(InitialFilter::mmse(p.nsr), 1);
        let det = mlas_detect(&p.system, &p.y, &p.space, &cfg).map_err(|e| e.to_string())?;
        if !local_minimum_check(&det.symbols, &p.system, &p.y, &p.space, 1).map_err(|e| e.to_string())? {
            return Err(format!("instance {i}: 1-LAS output is not a 1-symbol local minimum"));
        }
    }
    Ok(format!("{count} 4x4 instances"))
}

fn small_ml(seed: u64) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = 50;
    let mut hits = 0;
    for _ in 0..count {
        let p = problem(&mut rng, 2, 15.0)?;
        let cfg = DetectorConfig::new(InitialFilter::mmse(p.nsr), 2);
        let det = mlas_detect(&p.system, &p.y, &p.space, &cfg).map_err(|e| e.to_string())?;
        let ml = ml_oracle(&p.system, &p.y, &p.space).map_err(|e| e.to_string())?;
        let (a, b) = (
            p.system.cost(&p.y, &det.symbols.0).map_err(|e| e.to_string())?,
            p.system.cost(&p.y, &ml.0).map_err(|e| e.to_string())?,
        );
        if a <= b + 1e-9 * (1.0 + b.abs()) {
            hits += 1;
        }
    }
    if hits * 10 < count * 9 {
        return Err(format!("2-LAS reached the ML cost in {hits}/{count} instances"));
    }
    Ok(format!("2-LAS reached the ML cost in {hits}/{count} 2x2 instances"))
}

fn siso_reference() -> Result<String, String> {
    let got = siso_awgn_ber(4, 10.0).map_err(|e| e.to_string())?;
    // Q(sqrt(gamma)) for Gray QPSK
    let want = 0.5 * statrs::function::erf::erfc(5f64.sqrt());
    if (got - want).abs() > 1e-12 * want {
        return Err(format!("QPSK at 10 dB: {got:e} vs {want:e}"));
    }
    Ok(format!("QPSK at 10 dB = {got:.4e}"))
}

fn determinism(seed: u64) -> Result<String, String> {
    let mut cfg = ExperimentConfig::default();
    cfg.system.n_t = 2;
    cfg.system.n_r = 2;
    cfg.sweep.max_bits = 2000;
    cfg.sweep.record_timing = false;
    let a = run_point(&cfg, 6.0, seed).map_err(|e| e.to_string())?;
    let b = run_point(&cfg, 6.0, seed).map_err(|e| e.to_string())?;
    if a != b {
        return Err("two runs with one seed disagree".into());
    }
    Ok(format!("{} bits, {} errors, repeated exactly", a.bits, a.errors))
}
