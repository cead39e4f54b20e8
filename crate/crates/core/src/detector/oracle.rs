//! Exhaustive references for small systems.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::signal::{SignalSpace, SymbolVector};
use crate::system::RealSystem;

/// Largest search the oracles will attempt.
pub const ORACLE_BUDGET: u128 = 1 << 20;

/// Exact maximum-likelihood vector by enumeration of the whole signal space.
pub fn ml_oracle(system: &RealSystem, y: &DVector<f64>, space: &SignalSpace) -> Result<SymbolVector> {
    ml_oracle_with_budget(system, y, space, ORACLE_BUDGET)
}

pub fn ml_oracle_with_budget(
    system: &RealSystem,
    y: &DVector<f64>,
    space: &SignalSpace,
    budget: u128,
) -> Result<SymbolVector> {
    let candidates = space.cardinality();
    if candidates > budget {
        return Err(Error::SearchTooLarge { candidates, budget });
    }
    if space.dim() != system.dim() {
        return Err(Error::Shape(format!(
            "alphabet has {} entries, system has dimension {}",
            space.dim(),
            system.dim()
        )));
    }
    let hy = system.matched(y)?;
    let dim = space.dim();
    let mut idx = vec![0usize; dim];
    let mut d: Vec<f64> = space.sets().iter().map(|s| s.levels()[0]).collect();
    let mut best = (f64::INFINITY, d.clone());
    loop {
        let c = system.cost_with_matched(&hy, &d);
        if c < best.0 {
            best = (c, d.clone());
        }
        // odometer over the per-index alphabets
        let mut p = 0;
        loop {
            if p == dim {
                return Ok(SymbolVector(best.1));
            }
            let set = space.set(p);
            idx[p] += 1;
            if idx[p] < set.order() {
                d[p] = set.levels()[idx[p]];
                break;
            }
            idx[p] = 0;
            d[p] = set.levels()[0];
            p += 1;
        }
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i as u128 + 1))
}

/// Whether no update of at most `k` entries, over every admissible nonzero
/// step, lowers the cost of `d`.
pub fn local_minimum_check(
    d: &SymbolVector,
    system: &RealSystem,
    y: &DVector<f64>,
    space: &SignalSpace,
    k: usize,
) -> Result<bool> {
    let dim = system.dim();
    if d.len() != dim || space.dim() != dim {
        return Err(Error::Shape(format!(
            "vector of length {} and alphabet of {} for system dimension {dim}",
            d.len(),
            space.dim()
        )));
    }
    if !space.contains(&d.0) {
        return Err(Error::Parameter("vector is not in the signal space".into()));
    }
    let k = k.min(dim);
    let widest = space.sets().iter().map(|s| s.order() as u128 - 1).max().unwrap_or(1);
    let total: u128 = (1..=k).map(|m| binomial(dim, m).saturating_mul(widest.saturating_pow(m as u32))).sum();
    if total > ORACLE_BUDGET {
        return Err(Error::SearchTooLarge {
            candidates: total,
            budget: ORACLE_BUDGET,
        });
    }
    let hy = system.matched(y)?;
    let base = system.cost_with_matched(&hy, &d.0);
    let tol = 1e-9 * base.abs().max(1.0);
    let mut trial = d.0.clone();
    for m in 1..=k {
        let mut idx: Vec<usize> = (0..m).collect();
        loop {
            if improves(&idx, 0, &mut trial, &d.0, space, &|t: &[f64]| {
                system.cost_with_matched(&hy, t) < base - tol
            }) {
                return Ok(false);
            }
            // next combination
            let mut i = m;
            let mut advanced = false;
            while i > 0 {
                i -= 1;
                if idx[i] < dim - m + i {
                    idx[i] += 1;
                    for j in i + 1..m {
                        idx[j] = idx[j - 1] + 1;
                    }
                    advanced = true;
                    break;
                }
            }
            if !advanced {
                break;
            }
        }
    }
    Ok(true)
}

/// Tries every combination of changed values on `idx[pos..]`.
fn improves(
    idx: &[usize],
    pos: usize,
    trial: &mut [f64],
    d: &[f64],
    space: &SignalSpace,
    better: &dyn Fn(&[f64]) -> bool,
) -> bool {
    if pos == idx.len() {
        return better(trial);
    }
    let i = idx[pos];
    for &v in space.set(i).levels() {
        if v == d[i] {
            continue;
        }
        trial[i] = v;
        let hit = improves(idx, pos + 1, trial, d, space, better);
        trial[i] = d[i];
        if hit {
            return true;
        }
    }
    false
}
