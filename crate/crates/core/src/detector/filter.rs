//! Linear initial solutions `d0 = quantize(B y)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::signal::{SignalSpace, SymbolVector};
use crate::system::{stack_real, RealSystem};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterKind {
    /// Matched filter, each output normalized by `|h_i|^2`.
    Mf,
    Zf,
    Mmse,
}

/// Filter choice plus the noise-to-signal ratio `sigma^2 / E_s` the MMSE
/// filter regularizes with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialFilter {
    pub kind: FilterKind,
    pub noise_to_signal: f64,
}

impl InitialFilter {
    pub fn mmse(noise_to_signal: f64) -> Self {
        InitialFilter {
            kind: FilterKind::Mmse,
            noise_to_signal,
        }
    }

    pub fn zf() -> Self {
        InitialFilter {
            kind: FilterKind::Zf,
            noise_to_signal: 0.0,
        }
    }

    pub fn mf() -> Self {
        InitialFilter {
            kind: FilterKind::Mf,
            noise_to_signal: 0.0,
        }
    }
}

/// How the filter output is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FilterPath {
    /// Solve in the full `2k`-dimensional real system.
    Dense,
    /// Per-slot `N_t x N_t` complex filter lifted through `V_a^H`, using the
    /// FFT for ILL-only codes.
    #[default]
    Lifted,
}

#[derive(Debug, Clone)]
pub struct InitialSolution {
    pub symbols: SymbolVector,
    /// Unquantized filter output.
    pub estimate: DVector<f64>,
    /// ZF hit a singular system and fell back to a lightly regularized MMSE.
    pub zf_fallback: bool,
}

const FALLBACK_REG: f64 = 1e-9;

pub fn initial_solution(
    system: &RealSystem,
    y: &DVector<f64>,
    space: &SignalSpace,
    filter: InitialFilter,
    path: FilterPath,
) -> Result<InitialSolution> {
    system.check_obs(y)?;
    if space.dim() != system.dim() {
        return Err(Error::Shape(format!(
            "signal space has dimension {}, system has {}",
            space.dim(),
            system.dim()
        )));
    }
    if filter.kind == FilterKind::Mmse && !(filter.noise_to_signal > 0.0) {
        return Err(Error::Parameter("MMSE filter needs a positive noise-to-signal ratio".into()));
    }
    let (estimate, zf_fallback) = match path {
        FilterPath::Dense => dense(system, y, filter)?,
        FilterPath::Lifted => lifted(system, y, filter)?,
    };
    Ok(InitialSolution {
        symbols: space.quantize(estimate.as_slice()),
        estimate,
        zf_fallback,
    })
}

fn dense(system: &RealSystem, y: &DVector<f64>, filter: InitialFilter) -> Result<(DVector<f64>, bool)> {
    let hy = system.matched(y)?;
    let g = system.gram();
    match filter.kind {
        FilterKind::Mf => Ok((normalize_by_diag(hy, g), false)),
        FilterKind::Mmse => {
            let a = regularized(g, filter.noise_to_signal);
            let chol = a.cholesky().ok_or_else(|| Error::Parameter("MMSE system not positive definite".into()))?;
            Ok((chol.solve(&hy), false))
        }
        FilterKind::Zf => match g.clone().cholesky().filter(|c| well_conditioned(c.l_dirty())) {
            Some(chol) => Ok((chol.solve(&hy), false)),
            None => {
                let reg = FALLBACK_REG * g.trace() / g.nrows() as f64;
                let chol = regularized(g, reg.max(f64::MIN_POSITIVE))
                    .cholesky()
                    .ok_or_else(|| Error::Parameter("zero channel".into()))?;
                Ok((chol.solve(&hy), true))
            }
        },
    }
}

fn lifted(system: &RealSystem, y: &DVector<f64>, filter: InitialFilter) -> Result<(DVector<f64>, bool)> {
    let code = system.code();
    let h = system.channel();
    let n = code.n();
    let nr = h.nrows();
    let dims = system.dims();
    // complex received block Y (N_r x p), column-major vec
    let half = dims.obs_dim() / 2;
    let yc = DMatrix::from_fn(nr, dims.p, |r, j| Complex64::new(y[r + nr * j], y[half + r + nr * j]));

    let q = h.adjoint() * h;
    let (per_slot, fallback) = match filter.kind {
        FilterKind::Mf => (h.adjoint() * &yc, false),
        FilterKind::Mmse | FilterKind::Zf => {
            // (H~^H H~ + rho I)^-1 H~^H y = V_a^H vec((Q + rho/n I)^-1 H^H Y) / n
            let mut rho = filter.noise_to_signal / n as f64;
            let mut fallback = false;
            let chol = match (filter.kind, regularized_c(&q, rho).cholesky()) {
                (FilterKind::Zf, Some(c)) if well_conditioned_c(c.l_dirty()) => c,
                (FilterKind::Mmse, Some(c)) => c,
                (FilterKind::Mmse, None) => {
                    return Err(Error::Parameter("MMSE system not positive definite".into()))
                }
                _ => {
                    fallback = true;
                    rho = FALLBACK_REG * system.gram().trace() / system.dim() as f64 / n as f64;
                    regularized_c(&q, rho.max(f64::MIN_POSITIVE))
                        .cholesky()
                        .ok_or_else(|| Error::Parameter("zero channel".into()))?
                }
            };
            (chol.solve(&(h.adjoint() * &yc)) / Complex64::new(n as f64, 0.0), fallback)
        }
    };
    let v = DVector::from_column_slice(per_slot.as_slice());
    let xc = code.va_adjoint_auto(&v)?;
    let out = stack_real(xc.as_slice());
    Ok(match filter.kind {
        FilterKind::Mf => (normalize_by_diag(out, system.gram()), false),
        _ => (out, fallback),
    })
}

fn normalize_by_diag(mut v: DVector<f64>, g: &DMatrix<f64>) -> DVector<f64> {
    for (i, x) in v.iter_mut().enumerate() {
        let a = g[(i, i)];
        *x = if a > 0.0 { *x / a } else { 0.0 };
    }
    v
}

fn regularized(g: &DMatrix<f64>, rho: f64) -> DMatrix<f64> {
    let mut a = g.clone();
    for i in 0..a.nrows() {
        a[(i, i)] += rho;
    }
    a
}

fn regularized_c(q: &DMatrix<Complex64>, rho: f64) -> DMatrix<Complex64> {
    let mut a = q.clone();
    for i in 0..a.nrows() {
        a[(i, i)] += rho;
    }
    a
}

fn well_conditioned(l: &DMatrix<f64>) -> bool {
    let d: Vec<f64> = l.diagonal().iter().map(|x| x.abs()).collect();
    let max = d.iter().cloned().fold(0.0, f64::max);
    let min = d.iter().cloned().fold(f64::INFINITY, f64::min);
    max > 0.0 && min > 1e-7 * max
}

fn well_conditioned_c(l: &DMatrix<Complex64>) -> bool {
    let d: Vec<f64> = l.diagonal().iter().map(|x| x.norm()).collect();
    let max = d.iter().cloned().fold(0.0, f64::max);
    let min = d.iter().cloned().fold(f64::INFINITY, f64::min);
    max > 0.0 && min > 1e-7 * max
}
