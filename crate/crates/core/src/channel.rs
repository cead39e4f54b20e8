//! Rayleigh block-fading channels, AWGN and pilot-plus-data frames.
//!
//! SNR convention: `gamma` is the average received SNR per receive antenna.
//! Code matrices are sent with the `1/sqrt(N_t)` normalization, so
//! `E[tr(X X^H)] = N_t^2 E_s` and the noise variance is
//! `sigma^2 = N_t E_s / (gamma beta_d)`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::stbc::CdaCode;

/// Which part of a frame a block belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Pilot,
    Data,
}

/// Received SNR bookkeeping for a `1P + N_d D` frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrModel {
    gamma: f64,
    symbol_energy: f64,
    beta_p: f64,
    beta_d: f64,
    data_blocks: usize,
}

impl SnrModel {
    /// Perfect-CSIR operation: `beta_p = beta_d = 1`.
    pub fn new(gamma: f64, symbol_energy: f64) -> Result<Self> {
        Self::with_betas(gamma, symbol_energy, 1.0, 1.0, 1)
    }

    pub fn from_db(gamma_db: f64, symbol_energy: f64) -> Result<Self> {
        Self::new(db_to_linear(gamma_db), symbol_energy)
    }

    /// Training frame with explicit pilot/data SNR fractions. The fractions
    /// must satisfy `beta_p + N_d beta_d = N_d + 1` to within `1e-3`.
    pub fn with_betas(
        gamma: f64,
        symbol_energy: f64,
        beta_p: f64,
        beta_d: f64,
        data_blocks: usize,
    ) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::Parameter(format!("gamma must be positive and finite, got {gamma}")));
        }
        if !(symbol_energy > 0.0) {
            return Err(Error::Parameter(format!("symbol energy must be positive, got {symbol_energy}")));
        }
        if !(beta_p > 0.0 && beta_d > 0.0) {
            return Err(Error::Parameter("beta_p and beta_d must be positive".into()));
        }
        let nd = data_blocks as f64;
        if data_blocks > 0 && (beta_p + nd * beta_d - (nd + 1.0)).abs() > 1e-3 {
            return Err(Error::Parameter(format!(
                "beta_p + N_d beta_d = {} but must equal N_d + 1 = {}",
                beta_p + nd * beta_d,
                nd + 1.0
            )));
        }
        Ok(SnrModel {
            gamma,
            symbol_energy,
            beta_p,
            beta_d,
            data_blocks,
        })
    }

    /// Training frame with pilot fraction `beta_p`; `beta_d` follows from the
    /// power constraint.
    pub fn with_pilot_fraction(gamma: f64, symbol_energy: f64, beta_p: f64, data_blocks: usize) -> Result<Self> {
        if data_blocks == 0 {
            return Self::with_betas(gamma, symbol_energy, beta_p, 1.0, 0);
        }
        let nd = data_blocks as f64;
        Self::with_betas(gamma, symbol_energy, beta_p, (nd + 1.0 - beta_p) / nd, data_blocks)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn symbol_energy(&self) -> f64 {
        self.symbol_energy
    }

    pub fn beta_p(&self) -> f64 {
        self.beta_p
    }

    pub fn beta_d(&self) -> f64 {
        self.beta_d
    }

    pub fn data_blocks(&self) -> usize {
        self.data_blocks
    }

    pub fn gamma_pilot(&self) -> f64 {
        self.beta_p * self.gamma
    }

    pub fn gamma_data(&self) -> f64 {
        self.beta_d * self.gamma
    }

    /// Per-entry noise variance. The whole frame shares one variance; the
    /// pilot SNR boost is carried by the pilot power instead.
    pub fn noise_variance(&self, n_t: usize, _phase: Phase) -> f64 {
        n_t as f64 * self.symbol_energy / (self.gamma * self.beta_d)
    }

    /// Pilot power `mu = N_t E_s beta_p / beta_d`, with `X_P X_P^H = mu I`.
    pub fn pilot_power(&self, n_t: usize) -> f64 {
        n_t as f64 * self.symbol_energy * self.beta_p / self.beta_d
    }

    /// Noise-to-signal ratio `sigma^2 / E_s` used by the MMSE filter.
    pub fn noise_to_signal(&self, n_t: usize) -> f64 {
        self.noise_variance(n_t, Phase::Data) / self.symbol_energy
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// One `CN(0, 1)` sample.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// An `n_r x n_t` matrix of i.i.d. `CN(0, 1)` gains.
pub fn draw_channel<R: Rng + ?Sized>(n_r: usize, n_t: usize, rng: &mut R) -> DMatrix<Complex64> {
    // filled column by column so a seed fixes the matrix regardless of layout
    let data: Vec<Complex64> = (0..n_r * n_t).map(|_| complex_normal(rng)).collect();
    DMatrix::from_vec(n_r, n_t, data)
}

/// Unit-variance complex noise of the given shape.
pub fn draw_noise<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<Complex64> {
    draw_channel(rows, cols, rng)
}

/// `Y = H X + N` with `N` i.i.d. `CN(0, sigma^2)`.
pub fn transmit<R: Rng + ?Sized>(
    x: &DMatrix<Complex64>,
    h: &DMatrix<Complex64>,
    snr: &SnrModel,
    phase: Phase,
    rng: &mut R,
) -> Result<DMatrix<Complex64>> {
    if h.ncols() != x.nrows() {
        return Err(Error::Shape(format!(
            "channel has {} transmit antennas, signal has {} rows",
            h.ncols(),
            x.nrows()
        )));
    }
    let sigma = snr.noise_variance(h.ncols(), phase).sqrt();
    let noise = draw_noise(h.nrows(), x.ncols(), rng);
    Ok(h * x + noise * Complex64::new(sigma, 0.0))
}

/// The normalized code matrix actually radiated for `symbols`.
pub fn transmitted_block(code: &CdaCode, symbols: &[Complex64]) -> Result<DMatrix<Complex64>> {
    Ok(code.encode(symbols)? * Complex64::new(code.power_scale(), 0.0))
}

/// One coherence block: a pilot matrix followed by `N_d` code matrices, all
/// seen through the same channel.
#[derive(Debug, Clone)]
pub struct Frame {
    pub pilot: DMatrix<Complex64>,
    /// Normalized code matrices as transmitted.
    pub data: Vec<DMatrix<Complex64>>,
    /// `N_r x N_t (1 + N_d)` received frame.
    pub received: DMatrix<Complex64>,
    /// Coherence time in channel uses, `(N_d + 1) N_t`.
    pub coherence: usize,
    /// Pilot duration, `N_t`.
    pub tau: usize,
    pub noise_variance: f64,
}

impl Frame {
    pub fn n_t(&self) -> usize {
        self.tau
    }

    /// Received pilot block `Y_P`.
    pub fn received_pilot(&self) -> DMatrix<Complex64> {
        self.received.columns(0, self.tau).into_owned()
    }

    /// Received block of data matrix `i` (0-based).
    pub fn received_data(&self, i: usize) -> DMatrix<Complex64> {
        self.received.columns(self.tau * (i + 1), self.tau).into_owned()
    }

    /// The transmitted frame `[X_P X_1 ... X_Nd]`.
    pub fn transmitted(&self) -> DMatrix<Complex64> {
        concat_blocks(&self.pilot, &self.data)
    }
}

pub(crate) fn concat_blocks(first: &DMatrix<Complex64>, rest: &[DMatrix<Complex64>]) -> DMatrix<Complex64> {
    let n = first.nrows();
    let cols = first.ncols() + rest.iter().map(|b| b.ncols()).sum::<usize>();
    let mut out = DMatrix::zeros(n, cols);
    let mut at = 0;
    for b in std::iter::once(first).chain(rest) {
        out.columns_mut(at, b.ncols()).copy_from(b);
        at += b.ncols();
    }
    out
}

/// Builds and transmits one frame of `data_symbols.len()` code matrices.
pub fn make_frame<R: Rng + ?Sized>(
    data_symbols: &[Vec<Complex64>],
    code: &CdaCode,
    snr: &SnrModel,
    h: &DMatrix<Complex64>,
    rng: &mut R,
) -> Result<Frame> {
    let n_t = code.n();
    if h.ncols() != n_t {
        return Err(Error::Shape(format!("channel has {} transmit antennas, code needs {n_t}", h.ncols())));
    }
    let pilot = DMatrix::<Complex64>::identity(n_t, n_t) * Complex64::new(snr.pilot_power(n_t).sqrt(), 0.0);
    let data = data_symbols
        .iter()
        .map(|s| transmitted_block(code, s))
        .collect::<Result<Vec<_>>>()?;
    let sigma2 = snr.noise_variance(n_t, Phase::Data);
    let x = concat_blocks(&pilot, &data);
    let noise = draw_noise(h.nrows(), x.ncols(), rng);
    let received = h * &x + noise * Complex64::new(sigma2.sqrt(), 0.0);
    Ok(Frame {
        pilot,
        data,
        received,
        coherence: (data_symbols.len() + 1) * n_t,
        tau: n_t,
        noise_variance: sigma2,
    })
}

/// Purposes of the independent random streams drawn per trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Bits = 0,
    Channel = 1,
    Noise = 2,
}

/// A generator for one `(trial, purpose)` pair under a base seed. Streams
/// never overlap, so comparable runs sharing a seed see identical draws.
pub fn stream_rng(seed: u64, trial: u64, purpose: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial.wrapping_mul(4).wrapping_add(purpose as u64));
    rng
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn channel_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = draw_channel(1000, 1000, &mut rng);
        let n = h.len() as f64;
        let power = h.iter().map(|z| z.norm_sqr()).sum::<f64>() / n;
        let mean_re = h.iter().map(|z| z.re).sum::<f64>() / n;
        let var_re = h.iter().map(|z| (z.re - mean_re).powi(2)).sum::<f64>() / n;
        assert!((power - 1.0).abs() < 0.01, "{power}");
        assert!((var_re - 0.5).abs() < 0.01, "{var_re}");
        assert!(mean_re.abs() < 0.01);
    }

    #[test]
    fn seeded_channels_repeat() {
        let a = draw_channel(4, 4, &mut stream_rng(9, 3, Stream::Channel));
        let b = draw_channel(4, 4, &mut stream_rng(9, 3, Stream::Channel));
        let c = draw_channel(4, 4, &mut stream_rng(9, 4, Stream::Channel));
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn noise_variance_convention() {
        let snr = SnrModel::new(1.0, 2.0).unwrap();
        assert_eq!(snr.noise_variance(4, Phase::Data), 8.0);
        let snr = SnrModel::with_betas(10.0, 2.0, 1.4641, 0.8453, 3).unwrap();
        assert!((snr.gamma() * 4.0 - snr.gamma_pilot() - 3.0 * snr.gamma_data()).abs() < 1e-3);
        assert!(SnrModel::with_betas(10.0, 2.0, 2.0, 1.0, 3).is_err());
        assert!(SnrModel::new(0.0, 2.0).is_err());
        let snr = SnrModel::with_pilot_fraction(3.0, 2.0, 1.5, 4).unwrap();
        assert_eq!(snr.gamma() * 5.0, snr.gamma_pilot() + 4.0 * snr.gamma_data());
    }

    #[test]
    fn noiseless_transmission() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = draw_channel(3, 2, &mut rng);
        let x = draw_channel(2, 2, &mut rng);
        let snr = SnrModel::new(1e300, 1.0).unwrap();
        let y = transmit(&x, &h, &snr, Phase::Data, &mut rng).unwrap();
        assert!((y - &h * &x).camax() < 1e-140);
        assert!(transmit(&x, &draw_channel(3, 3, &mut rng), &snr, Phase::Data, &mut rng).is_err());
    }

    #[test]
    fn frame_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let snr = SnrModel::new(10.0, 2.0).unwrap();
        let code = CdaCode::ill_only(16).unwrap();
        let h = draw_channel(16, 16, &mut rng);
        let sym = vec![Complex64::new(1.0, -1.0); 256];
        let f = make_frame(&[], &code, &snr, &h, &mut rng).unwrap();
        assert_eq!((f.coherence, f.tau, f.received.ncols()), (16, 16, 16));
        let f = make_frame(&vec![sym.clone(); 8], &code, &snr, &h, &mut rng).unwrap();
        assert_eq!((f.coherence, f.tau), (144, 16));
        let f = make_frame(&[sym], &code, &snr, &h, &mut rng).unwrap();
        assert_eq!(f.coherence, 32);
        let mu = snr.pilot_power(16);
        assert!((&f.pilot * f.pilot.adjoint() - DMatrix::identity(16, 16) * Complex64::new(mu, 0.0)).camax() < 1e-12);
    }
}
