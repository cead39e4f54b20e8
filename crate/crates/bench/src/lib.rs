//! Random detection problems shared by the benchmarks.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stbc_las::channel::{complex_normal, db_to_linear, draw_channel};
use stbc_las::stbc::CdaCode;
use stbc_las::system::{build_transmission_system, stack_real, RealSystem};
use stbc_las::{CodeVariant, SignalSpace};

pub struct Fixture {
    pub system: RealSystem,
    pub space: SignalSpace,
    pub y: DVector<f64>,
    pub noise_to_signal: f64,
}

/// An `n x n` ILL-only or FD-ILL system with square `qam` symbols at `snr_db`.
pub fn fixture(n: usize, variant: CodeVariant, qam: usize, snr_db: f64, seed: u64) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let code = CdaCode::new(n, variant).expect("supported code");
    let system = build_transmission_system(&draw_channel(n, n, &mut rng), &code).expect("square system");
    let space = SignalSpace::qam(qam, code.k()).expect("square QAM");
    let x: Vec<f64> = space
        .sets()
        .iter()
        .map(|s| s.levels()[rng.random_range(0..s.order())])
        .collect();
    let es = 2.0 * space.set(0).mean_energy();
    let sigma2 = n as f64 * es / db_to_linear(snr_db);
    let noise: Vec<Complex64> = (0..n * n).map(|_| complex_normal(&mut rng)).collect();
    let y = system.h() * DVector::from_vec(x) + stack_real(&noise) * sigma2.sqrt();
    Fixture {
        system,
        space,
        y,
        noise_to_signal: sigma2 / es,
    }
}
