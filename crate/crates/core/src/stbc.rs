//! Full-rate circulant space-time block codes from cyclic division algebras.
//!
//! An `n x n` code matrix carries `n^2` complex symbols `x[u][v]`. Entry
//! `(r, j)` (antenna `r`, slot `j`) collects the symbols with
//! `(r - j) mod n == u`, weighted by `omega^(j v) t^v`, and by `delta` when it
//! sits above the diagonal (`r < j`). Symbol `x[u][v]` has linear index
//! `u + n v`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Named `(delta, t)` choices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CodeVariant {
    /// `delta = e^{j sqrt 5}`, `t = e^{j}`: full diversity and information lossless.
    FdIll,
    /// `delta = t = 1`: information lossless only.
    IllOnly,
    Custom,
}

#[derive(Clone)]
pub struct CdaCode {
    n: usize,
    delta: Complex64,
    t: Complex64,
    variant: CodeVariant,
    fft: Option<Arc<dyn Fft<f64>>>,
}

impl fmt::Debug for CdaCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CdaCode")
            .field("n", &self.n)
            .field("delta", &self.delta)
            .field("t", &self.t)
            .field("variant", &self.variant)
            .finish()
    }
}

impl CdaCode {
    pub fn new(n: usize, variant: CodeVariant) -> Result<Self> {
        match variant {
            CodeVariant::FdIll => Self::custom(n, Complex64::cis(5f64.sqrt()), Complex64::cis(1.0))
                .map(|c| c.with_variant(CodeVariant::FdIll)),
            CodeVariant::IllOnly => Self::custom(n, Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)),
            CodeVariant::Custom => Err(Error::Parameter(
                "custom codes need explicit delta and t, use CdaCode::custom".into(),
            )),
        }
    }

    pub fn fd_ill(n: usize) -> Result<Self> {
        Self::new(n, CodeVariant::FdIll)
    }

    pub fn ill_only(n: usize) -> Result<Self> {
        Self::new(n, CodeVariant::IllOnly)
    }

    /// A code with arbitrary unit-modulus `delta` and `t`.
    pub fn custom(n: usize, delta: Complex64, t: Complex64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Parameter("code size n must be positive".into()));
        }
        for (name, value) in [("delta", delta), ("t", t)] {
            if (value.norm() - 1.0).abs() > 1e-12 {
                return Err(Error::Parameter(format!("|{name}| = {} is not 1", value.norm())));
            }
        }
        let one = Complex64::new(1.0, 0.0);
        let ill_only = delta == one && t == one;
        let variant = if ill_only { CodeVariant::IllOnly } else { CodeVariant::Custom };
        let fft = ill_only.then(|| FftPlanner::new().plan_fft_forward(n));
        Ok(CdaCode {
            n,
            delta,
            t,
            variant,
            fft,
        })
    }

    fn with_variant(mut self, variant: CodeVariant) -> Self {
        self.variant = variant;
        self
    }

    /// Number of transmit antennas, equal to the number of time slots.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Complex symbols per code matrix, `n^2`.
    pub fn k(&self) -> usize {
        self.n * self.n
    }

    pub fn delta(&self) -> Complex64 {
        self.delta
    }

    pub fn t(&self) -> Complex64 {
        self.t
    }

    pub fn variant(&self) -> CodeVariant {
        self.variant
    }

    pub fn is_ill_only(&self) -> bool {
        self.fft.is_some()
    }

    /// Amplitude scale `1/sqrt(n)` that brings the mean code-matrix energy
    /// `E[tr(X X^H)]` to `n^2 E_s`.
    pub fn power_scale(&self) -> f64 {
        1.0 / (self.n as f64).sqrt()
    }

    /// Row and weight of symbol `(u, v)` in column `j`.
    #[inline]
    pub(crate) fn entry(&self, u: usize, v: usize, j: usize) -> (usize, Complex64) {
        let n = self.n;
        let row = (u + j) % n;
        let mut w = Complex64::cis(2.0 * PI * ((j * v) % n) as f64 / n as f64) * self.t.powu(v as u32);
        if row < j {
            w *= self.delta;
        }
        (row, w)
    }

    /// Encodes `n^2` complex symbols (linear index `u + n v`) into the
    /// unnormalized code matrix.
    pub fn encode(&self, symbols: &[Complex64]) -> Result<DMatrix<Complex64>> {
        let n = self.n;
        if symbols.len() != self.k() {
            return Err(Error::Shape(format!(
                "code of size {n} takes {} symbols, got {}",
                self.k(),
                symbols.len()
            )));
        }
        let mut x = DMatrix::zeros(n, n);
        for v in 0..n {
            for u in 0..n {
                let s = symbols[u + n * v];
                for j in 0..n {
                    let (r, w) = self.entry(u, v, j);
                    x[(r, j)] += s * w;
                }
            }
        }
        Ok(x)
    }

    pub fn weight_matrices(&self) -> WeightMatrixSet {
        let n = self.n;
        let k = self.k();
        let mut matrices = Vec::with_capacity(k);
        let mut va = DMatrix::zeros(k, k);
        for i in 0..k {
            let (u, v) = (i % n, i / n);
            let mut a = DMatrix::zeros(n, n);
            for j in 0..n {
                let (r, w) = self.entry(u, v, j);
                a[(r, j)] = w;
                va[(r + n * j, i)] = w;
            }
            matrices.push(a);
        }
        WeightMatrixSet { matrices, va }
    }

    /// Computes `V_a^H v`. With `fast`, uses the block-DFT structure of
    /// ILL-only codes; otherwise multiplies by the dense `V_a^H`.
    pub fn va_adjoint_multiply(&self, v: &DVector<Complex64>, fast: bool) -> Result<DVector<Complex64>> {
        self.check_len(v)?;
        if fast {
            let fft = self.fft.as_ref().ok_or_else(|| {
                Error::UnsupportedVariant(format!(
                    "FFT multiply needs delta = t = 1, got delta = {}, t = {}",
                    self.delta, self.t
                ))
            })?;
            Ok(self.va_adjoint_fft(fft.as_ref(), v))
        } else {
            Ok(self.weight_matrices().va.adjoint() * v)
        }
    }

    /// `V_a^H v` using the one-nonzero-per-row-and-column structure, `O(n^3)`.
    pub fn va_adjoint_sparse(&self, v: &DVector<Complex64>) -> Result<DVector<Complex64>> {
        self.check_len(v)?;
        let n = self.n;
        let mut out = DVector::zeros(self.k());
        for vi in 0..n {
            for u in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for j in 0..n {
                    let (r, w) = self.entry(u, vi, j);
                    acc += w.conj() * v[r + n * j];
                }
                out[u + n * vi] = acc;
            }
        }
        Ok(out)
    }

    /// `V_a^H v` by the fastest available route.
    pub fn va_adjoint_auto(&self, v: &DVector<Complex64>) -> Result<DVector<Complex64>> {
        match &self.fft {
            Some(fft) => {
                self.check_len(v)?;
                Ok(self.va_adjoint_fft(fft.as_ref(), v))
            }
            None => self.va_adjoint_sparse(v),
        }
    }

    fn va_adjoint_fft(&self, fft: &dyn Fft<f64>, v: &DVector<Complex64>) -> DVector<Complex64> {
        // After permuting column (r + n j) to block u = (r - j) mod n, each
        // block of V_a^H is an n-point DFT matrix.
        let n = self.n;
        let mut out = DVector::zeros(self.k());
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        for u in 0..n {
            for (j, b) in buf.iter_mut().enumerate() {
                *b = v[(u + j) % n + n * j];
            }
            fft.process_with_scratch(&mut buf, &mut scratch);
            for (vi, b) in buf.iter().enumerate() {
                out[u + n * vi] = *b;
            }
        }
        out
    }

    fn check_len(&self, v: &DVector<Complex64>) -> Result<()> {
        if v.len() != self.k() {
            return Err(Error::Shape(format!(
                "V_a multiply needs a vector of length {}, got {}",
                self.k(),
                v.len()
            )));
        }
        Ok(())
    }

    /// The effective complex channel `H~` whose column `i` is
    /// `vec(H_c A^(i))`, built from the permutation structure.
    pub fn effective_channel(&self, h: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
        let n = self.n;
        if h.ncols() != n {
            return Err(Error::Shape(format!(
                "channel has {} transmit antennas, code needs {n}",
                h.ncols()
            )));
        }
        let nr = h.nrows();
        let mut out = DMatrix::zeros(nr * n, self.k());
        for i in 0..self.k() {
            let (u, v) = (i % n, i / n);
            let mut col = out.column_mut(i);
            for j in 0..n {
                let (r, w) = self.entry(u, v, j);
                for row in 0..nr {
                    col[row + nr * j] = h[(row, r)] * w;
                }
            }
        }
        Ok(out)
    }

    /// `H~^H H~ = V_a^H (I (x) H^H H) V_a` from the `n x n` channel Gram matrix.
    pub fn effective_gram(&self, channel_gram: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let n = self.n;
        let k = self.k();
        // weights[i][j] = (row, w) of symbol i in column j
        let weights: Vec<Vec<(usize, Complex64)>> = (0..k)
            .map(|i| (0..n).map(|j| self.entry(i % n, i / n, j)).collect())
            .collect();
        let mut out = DMatrix::zeros(k, k);
        for b in 0..k {
            for a in 0..=b {
                let mut acc = Complex64::new(0.0, 0.0);
                for j in 0..n {
                    let (ra, wa) = weights[a][j];
                    let (rb, wb) = weights[b][j];
                    acc += wa.conj() * wb * channel_gram[(ra, rb)];
                }
                if a == b {
                    acc.im = 0.0;
                }
                out[(a, b)] = acc;
                out[(b, a)] = acc.conj();
            }
        }
        out
    }
}

/// The weight matrices `A^(i)` and the matrix `V_a` with `vec(A^(i))` as
/// column `i`.
#[derive(Debug, Clone)]
pub struct WeightMatrixSet {
    pub matrices: Vec<DMatrix<Complex64>>,
    pub va: DMatrix<Complex64>,
}

impl WeightMatrixSet {
    /// `sum_i x_i A^(i)`.
    pub fn combine(&self, symbols: &[Complex64]) -> Result<DMatrix<Complex64>> {
        if symbols.len() != self.matrices.len() {
            return Err(Error::Shape(format!(
                "expected {} symbols, got {}",
                self.matrices.len(),
                symbols.len()
            )));
        }
        let (r, c) = self.matrices[0].shape();
        Ok(self
            .matrices
            .iter()
            .zip(symbols)
            .fold(DMatrix::zeros(r, c), |acc, (a, &x)| acc + a * x))
    }
}

/// Column-major `vec(M)`.
pub fn vec_of(m: &DMatrix<Complex64>) -> DVector<Complex64> {
    DVector::from_column_slice(m.as_slice())
}
