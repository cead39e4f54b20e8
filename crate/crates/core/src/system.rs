//! The real-valued linear model `y = H x + n` of an STBC MIMO link.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::stbc::CdaCode;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub n_t: usize,
    pub n_r: usize,
    /// Time slots per code matrix.
    pub p: usize,
    /// Complex symbols per code matrix.
    pub k: usize,
}

impl Dims {
    /// Length of the real symbol vector, `2k`.
    pub fn real_dim(&self) -> usize {
        2 * self.k
    }

    /// Length of the real received vector, `2 N_r p`.
    pub fn obs_dim(&self) -> usize {
        2 * self.n_r * self.p
    }
}

/// Real channel matrix `H` with its Gram matrix `G = H^T H` cached.
///
/// The received vector is not part of the system; detectors take it
/// separately so that one channel can serve every block of a frame.
#[derive(Debug, Clone)]
pub struct RealSystem {
    h: DMatrix<f64>,
    gram: DMatrix<f64>,
    /// The complex channel the system was built from.
    channel: DMatrix<Complex64>,
    code: CdaCode,
    dims: Dims,
}

/// Builds the real system for `channel` (`N_r x N_t`) under `code`.
///
/// Column `i` of the complex effective channel is `vec(H_c A^(i))`, and the
/// real form is `[[Re, -Im], [Im, Re]]`.
pub fn build_real_system(channel: &DMatrix<Complex64>, code: &CdaCode) -> Result<RealSystem> {
    if channel.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Parameter("channel has non-finite entries".into()));
    }
    let ht = code.effective_channel(channel)?;
    let gram_c = code.effective_gram(&(channel.adjoint() * channel));
    let dims = Dims {
        n_t: code.n(),
        n_r: channel.nrows(),
        p: code.n(),
        k: code.k(),
    };
    Ok(RealSystem {
        h: real_form(&ht),
        gram: real_form(&gram_c),
        channel: channel.clone(),
        code: code.clone(),
        dims,
    })
}

/// Builds the system seen by the receiver when code matrices are sent with
/// the `1/sqrt(n)` power normalization.
pub fn build_transmission_system(channel: &DMatrix<Complex64>, code: &CdaCode) -> Result<RealSystem> {
    build_real_system(&channel.map(|z| z * code.power_scale()), code)
}

impl RealSystem {
    pub fn h(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn channel(&self) -> &DMatrix<Complex64> {
        &self.channel
    }

    pub fn code(&self) -> &CdaCode {
        &self.code
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn dim(&self) -> usize {
        self.dims.real_dim()
    }

    /// `H^T y`.
    pub fn matched(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_obs(y)?;
        Ok(self.h.tr_mul(y))
    }

    /// `d^T G d - 2 y^T H d`, the ML metric up to the constant `|y|^2`.
    pub fn cost(&self, y: &DVector<f64>, d: &[f64]) -> Result<f64> {
        let hy = self.matched(y)?;
        Ok(self.cost_with_matched(&hy, d))
    }

    pub(crate) fn cost_with_matched(&self, hy: &DVector<f64>, d: &[f64]) -> f64 {
        let d = DVector::from_column_slice(d);
        let gd = &self.gram * &d;
        d.dot(&gd) - 2.0 * hy.dot(&d)
    }

    /// `|y - H d|^2`.
    pub fn residual_norm_sq(&self, y: &DVector<f64>, d: &[f64]) -> Result<f64> {
        self.check_obs(y)?;
        Ok((y - &self.h * DVector::from_column_slice(d)).norm_squared())
    }

    pub(crate) fn check_obs(&self, y: &DVector<f64>) -> Result<()> {
        if y.len() != self.dims.obs_dim() {
            return Err(Error::Shape(format!(
                "received vector has length {}, system expects {}",
                y.len(),
                self.dims.obs_dim()
            )));
        }
        Ok(())
    }
}

/// `[[Re M, -Im M], [Im M, Re M]]`.
pub fn real_form(m: &DMatrix<Complex64>) -> DMatrix<f64> {
    let (r, c) = m.shape();
    DMatrix::from_fn(2 * r, 2 * c, |i, j| {
        let z = m[(i % r, j % c)];
        match (i < r, j < c) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

/// `[Re v; Im v]`.
pub fn stack_real(v: &[Complex64]) -> DVector<f64> {
    let n = v.len();
    DVector::from_fn(2 * n, |i, _| if i < n { v[i].re } else { v[i - n].im })
}

/// Inverse of [`stack_real`].
pub fn unstack_complex(x: &[f64]) -> Vec<Complex64> {
    let k = x.len() / 2;
    (0..k).map(|i| Complex64::new(x[i], x[k + i])).collect()
}

/// Real stacking of `vec(Y)` for a received block.
pub fn received_vector(y: &DMatrix<Complex64>) -> DVector<f64> {
    stack_real(y.as_slice())
}
