//! Per-bit soft values from a detected vector.

use crate::error::{Error, Result};
use crate::signal::SignalSpace;
use crate::system::RealSystem;

/// Soft values for every bit, in the order of
/// [`symbols_to_bits`](crate::signal::symbols_to_bits). Positive values
/// favour label bit `1`.
///
/// `z` must equal `H^T (y - H d)` for the detected `d`, as held by the
/// search state on exit.
pub fn soft_outputs(d: &[f64], z: &[f64], system: &RealSystem, space: &SignalSpace) -> Result<Vec<f64>> {
    let dim = system.dim();
    if d.len() != dim || z.len() != dim || space.dim() != dim {
        return Err(Error::Shape(format!(
            "soft outputs need d, z and alphabet of length {dim}, got {}, {} and {}",
            d.len(),
            z.len(),
            space.dim()
        )));
    }
    let g = system.gram();
    let mut out = Vec::with_capacity(space.total_bits());
    for (i, set) in space.sets().iter().enumerate() {
        let ratio = z[i] / g[(i, i)];
        for j in 0..set.bits_per_symbol() {
            let bad = || Error::Shape(format!("{} is not a point of the {}-PAM alphabet", d[i], set.order()));
            let hard = set.bit_of(d[i], j).ok_or_else(bad)?;
            let plus = set.with_bit(d[i], j, 1).ok_or_else(bad)?;
            let minus = set.with_bit(d[i], j, 0).ok_or_else(bad)?;
            let lambda = minus - plus;
            let b = if hard == 1 {
                lambda * lambda - 2.0 * lambda * ratio
            } else {
                -lambda * lambda - 2.0 * lambda * ratio
            };
            out.push(b / (0.25 * lambda * lambda));
        }
    }
    Ok(out)
}
