//! Analytic SISO AWGN bit-error rate for Gray-labeled square QAM.

use statrs::function::erf::erfc;

use crate::channel::db_to_linear;
use crate::error::Result;
use crate::signal::{pam_alphabet, qam_rail_order};

/// Gaussian tail `Q(x)`.
fn q(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Exact bit-error probability of `order`-QAM at `Es/N0 = gamma`, which for
/// a single antenna is the received SNR of the simulator.
pub fn siso_awgn_ber(order: usize, snr_db: f64) -> Result<f64> {
    let rail = pam_alphabet(qam_rail_order(order)?)?;
    let m = rail.order();
    let es = 2.0 * rail.mean_energy();
    // per-rail noise standard deviation, N0 / 2 = Es / (2 gamma)
    let sigma = (es / (2.0 * db_to_linear(snr_db))).sqrt();
    let levels = rail.levels();
    let nb = rail.bits_per_symbol();
    let mut errors = 0.0;
    for (i, &s) in levels.iter().enumerate() {
        for (j, &r) in levels.iter().enumerate() {
            let differing = (rail.label(i) ^ rail.label(j)).count_ones() as f64;
            if differing == 0.0 {
                continue;
            }
            // decision region of level j is (r - 1, r + 1), open at the ends;
            // it never contains s, so both tails are taken on the far side
            let (near, far) = if r > s {
                (r - 1.0 - s, if j == m - 1 { f64::INFINITY } else { r + 1.0 - s })
            } else {
                (s - r - 1.0, if j == 0 { f64::INFINITY } else { s - r + 1.0 })
            };
            errors += differing * (q(near / sigma) - q(far / sigma));
        }
    }
    Ok(errors / (m * nb) as f64)
}

/// The reference curve over an SNR grid.
pub fn siso_awgn_reference(order: usize, snr_db: &[f64]) -> Result<Vec<(f64, f64)>> {
    snr_db.iter().map(|&s| Ok((s, siso_awgn_ber(order, s)?))).collect()
}
