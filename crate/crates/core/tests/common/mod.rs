#![allow(dead_code)]

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use stbc_las::channel::{complex_normal, db_to_linear, draw_channel};
use stbc_las::signal::SignalSpace;
use stbc_las::stbc::CdaCode;
use stbc_las::system::{build_transmission_system, stack_real, RealSystem};

/// A random detection problem with known transmitted vector.
pub struct Instance {
    pub system: RealSystem,
    pub space: SignalSpace,
    pub x: Vec<f64>,
    pub y: DVector<f64>,
    /// `sigma^2 / E_s` for the MMSE filter.
    pub noise_to_signal: f64,
}

pub fn random_symbols<R: Rng>(space: &SignalSpace, rng: &mut R) -> Vec<f64> {
    space
        .sets()
        .iter()
        .map(|s| s.levels()[rng.random_range(0..s.order())])
        .collect()
}

pub fn instance<R: Rng>(rng: &mut R, code: &CdaCode, n_r: usize, qam: usize, snr_db: f64) -> Instance {
    let n = code.n();
    let system = build_transmission_system(&draw_channel(n_r, n, rng), code).unwrap();
    let space = SignalSpace::qam(qam, code.k()).unwrap();
    let x = random_symbols(&space, rng);
    let es = 2.0 * space.set(0).mean_energy();
    let sigma2 = n as f64 * es / db_to_linear(snr_db);
    let noise: Vec<Complex64> = (0..n_r * n).map(|_| complex_normal(rng)).collect();
    let y = system.h() * DVector::from_vec(x.clone()) + stack_real(&noise) * sigma2.sqrt();
    Instance {
        system,
        space,
        x,
        y,
        noise_to_signal: sigma2 / es,
    }
}
