//! Training-based channel estimation and capacity evaluators.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::channel::{concat_blocks, draw_channel, draw_noise, stream_rng, transmitted_block, Frame, SnrModel, Stream};
use crate::detector::{mlas_detect, DetectionStats, DetectorConfig};
use crate::error::{Error, Result};
use crate::signal::{SignalSpace, SymbolVector};
use crate::stbc::CdaCode;
use crate::system::{build_transmission_system, received_vector, unstack_complex};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimateSource {
    OneShot,
    Iterative(usize),
}

#[derive(Debug, Clone)]
pub struct ChannelEstimate {
    pub h: DMatrix<Complex64>,
    pub source: EstimateSource,
    /// `|Y - H_est X|_F` over the blocks used for the estimate.
    pub residual: f64,
}

/// Linear MMSE estimate `Y X^H (sigma^2 I + X X^H)^-1` for a unit-variance
/// i.i.d. channel.
pub fn mmse_estimate(y: &DMatrix<Complex64>, x: &DMatrix<Complex64>, sigma2: f64) -> Result<ChannelEstimate> {
    if !(sigma2 > 0.0) {
        return Err(Error::Parameter(format!("noise variance must be positive, got {sigma2}")));
    }
    let h = regularized_fit(y, x, sigma2)?;
    let residual = (y - &h * x).norm();
    Ok(ChannelEstimate {
        h,
        source: EstimateSource::OneShot,
        residual,
    })
}

/// Zero-forcing estimate `Y X^H (X X^H)^-1`; needs a full-rank training
/// matrix.
pub fn zf_estimate(y: &DMatrix<Complex64>, x: &DMatrix<Complex64>) -> Result<ChannelEstimate> {
    let h = regularized_fit(y, x, 0.0)?;
    let residual = (y - &h * x).norm();
    Ok(ChannelEstimate {
        h,
        source: EstimateSource::OneShot,
        residual,
    })
}

fn regularized_fit(y: &DMatrix<Complex64>, x: &DMatrix<Complex64>, sigma2: f64) -> Result<DMatrix<Complex64>> {
    if y.ncols() != x.ncols() {
        return Err(Error::Shape(format!(
            "received block has {} columns, training block has {}",
            y.ncols(),
            x.ncols()
        )));
    }
    let n = x.nrows();
    let a = x * x.adjoint() + DMatrix::<Complex64>::identity(n, n) * Complex64::new(sigma2, 0.0);
    let chol = a
        .cholesky()
        .ok_or_else(|| Error::Parameter("training matrix is rank deficient".into()))?;
    // H = Y X^H A^-1, i.e. H^H = A^-1 X Y^H since A is Hermitian
    Ok(chol.solve(&(x * y.adjoint())).adjoint())
}

#[derive(Debug, Clone)]
pub struct IterationDiagnostics {
    /// Frame residual `|Y - H_est X_est|_F` after each re-estimate.
    pub residuals: Vec<f64>,
    /// Symbols that changed between successive detections.
    pub changed_symbols: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct IterativeResult {
    pub estimate: ChannelEstimate,
    /// Detected real symbol vectors, one per data block.
    pub detected: Vec<SymbolVector>,
    /// Search statistics of the final detection of each block.
    pub stats: Vec<DetectionStats>,
    pub diagnostics: IterationDiagnostics,
}

/// Pilot-only estimate, then `iters` rounds of detecting every data block
/// and re-estimating from the whole frame with the detected code matrices.
pub fn iterative_detect_estimate(
    frame: &Frame,
    code: &CdaCode,
    snr: &SnrModel,
    space: &SignalSpace,
    iters: usize,
    detector: &DetectorConfig,
) -> Result<IterativeResult> {
    let n_t = code.n();
    let sigma2 = frame.noise_variance;
    let mut estimate = mmse_estimate(&frame.received_pilot(), &frame.pilot, sigma2)?;
    let (mut detected, mut stats) = detect_blocks(frame, code, &estimate.h, space, detector)?;
    let mut diagnostics = IterationDiagnostics {
        residuals: Vec::with_capacity(iters),
        changed_symbols: Vec::with_capacity(iters),
    };
    debug_assert_eq!(snr.noise_variance(n_t, crate::channel::Phase::Data), sigma2);
    for it in 1..=iters {
        let blocks = detected
            .iter()
            .map(|d| transmitted_block(code, &unstack_complex(&d.0)))
            .collect::<Result<Vec<_>>>()?;
        let x = concat_blocks(&frame.pilot, &blocks);
        let h = regularized_fit(&frame.received, &x, sigma2)?;
        let residual = (&frame.received - &h * &x).norm();
        estimate = ChannelEstimate {
            h,
            source: EstimateSource::Iterative(it),
            residual,
        };
        let (next, next_stats) = detect_blocks(frame, code, &estimate.h, space, detector)?;
        let changed = next
            .iter()
            .zip(&detected)
            .map(|(a, b)| a.0.iter().zip(&b.0).filter(|(p, q)| p != q).count())
            .sum();
        diagnostics.residuals.push(residual);
        diagnostics.changed_symbols.push(changed);
        detected = next;
        stats = next_stats;
    }
    Ok(IterativeResult {
        estimate,
        detected,
        stats,
        diagnostics,
    })
}

fn detect_blocks(
    frame: &Frame,
    code: &CdaCode,
    h: &DMatrix<Complex64>,
    space: &SignalSpace,
    detector: &DetectorConfig,
) -> Result<(Vec<SymbolVector>, Vec<DetectionStats>)> {
    let system = build_transmission_system(h, code)?;
    let mut symbols = Vec::with_capacity(frame.data.len());
    let mut stats = Vec::with_capacity(frame.data.len());
    for i in 0..frame.data.len() {
        let det = mlas_detect(&system, &received_vector(&frame.received_data(i)), space, detector)?;
        symbols.push(det.symbols);
        stats.push(det.stats);
    }
    Ok((symbols, stats))
}

/// A Monte-Carlo mean with its 95% half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub ci95: f64,
    pub trials: usize,
}

impl McEstimate {
    fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        McEstimate {
            mean,
            ci95: 1.96 * (var / n).sqrt(),
            trials: samples.len(),
        }
    }
}

/// `log2 det(I + c A A^H)`.
pub fn log2_det_shifted(a: &DMatrix<Complex64>, c: f64) -> f64 {
    let n = a.nrows();
    let m = DMatrix::<Complex64>::identity(n, n) + a * a.adjoint() * Complex64::new(c, 0.0);
    let chol = m.cholesky().expect("I + c A A^H is positive definite for c >= 0");
    let l = chol.l_dirty();
    (0..n).map(|i| 2.0 * l[(i, i)].re.log2()).sum()
}

/// Parameters of the training-based capacity lower bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingBoundParams {
    pub n_t: usize,
    pub n_r: usize,
    /// Coherence time `T` in channel uses.
    pub coherence: usize,
    /// Training duration `tau`.
    pub tau: usize,
    /// Linear SNR.
    pub gamma: f64,
    pub beta_p: f64,
    pub beta_d: f64,
}

impl TrainingBoundParams {
    /// The effective SNR coefficient multiplying `H_est H_est^H / (N_t var)`.
    pub fn coefficient(&self) -> f64 {
        let (g, nt, tau) = (self.gamma, self.n_t as f64, self.tau as f64);
        g * g * self.beta_d * self.beta_p * tau / (nt * (1.0 + g * self.beta_d) + g * self.beta_p * tau)
    }
}

/// Lower bound on capacity with MMSE-estimated channels. The normalizing
/// variance of the estimate is taken from the same ensemble.
pub fn capacity_bound(p: &TrainingBoundParams, trials: usize, seed: u64) -> Result<McEstimate> {
    if p.tau < p.n_t {
        return Err(Error::Parameter(format!("training length {} is shorter than N_t = {}", p.tau, p.n_t)));
    }
    if p.coherence <= p.tau {
        return Err(Error::Parameter(format!(
            "coherence time {} must exceed training length {}",
            p.coherence, p.tau
        )));
    }
    if trials < 2 || !(p.gamma > 0.0 && p.beta_p > 0.0 && p.beta_d > 0.0) {
        return Err(Error::Parameter("need at least two trials and positive SNR parameters".into()));
    }
    // Training at unit symbol energy: X_P X_P^H = mu (tau / N_t) I.
    let nt = p.n_t as f64;
    let mu = nt * p.beta_p / p.beta_d * p.tau as f64 / nt;
    let sigma2 = nt / (p.gamma * p.beta_d);
    let estimate = |t: usize| -> DMatrix<Complex64> {
        let h = draw_channel(p.n_r, p.n_t, &mut stream_rng(seed, t as u64, Stream::Channel));
        let noise = draw_noise(p.n_r, p.n_t, &mut stream_rng(seed, t as u64, Stream::Noise));
        let y = h * Complex64::new(mu.sqrt(), 0.0) + noise * Complex64::new(sigma2.sqrt(), 0.0);
        y * Complex64::new(mu.sqrt() / (sigma2 + mu), 0.0)
    };
    // first pass: the estimate's per-entry variance; second pass replays the
    // same draws
    let total: f64 = (0..trials).into_par_iter().map(|t| estimate(t).norm_squared()).sum();
    let var = total / (trials * p.n_t * p.n_r) as f64;
    let c = p.coefficient() / (nt * var);
    let prelog = (p.coherence - p.tau) as f64 / p.coherence as f64;
    let samples: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| prelog * log2_det_shifted(&estimate(t), c))
        .collect();
    Ok(McEstimate::from_samples(&samples))
}

/// Ergodic capacity with perfect receiver CSI, `E[log2 det(I + gamma/N_t H H^H)]`.
pub fn ergodic_capacity_csir(n_t: usize, n_r: usize, gamma: f64, trials: usize, seed: u64) -> Result<McEstimate> {
    if trials < 2 || !(gamma >= 0.0) || n_t == 0 || n_r == 0 {
        return Err(Error::Parameter("need at least two trials, gamma >= 0 and nonempty arrays".into()));
    }
    let samples: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let h = draw_channel(n_r, n_t, &mut stream_rng(seed, t as u64, Stream::Channel));
            log2_det_shifted(&h, gamma / n_t as f64)
        })
        .collect();
    Ok(McEstimate::from_samples(&samples))
}

/// Per-entry MSE of `h_est` against `h`.
pub fn estimation_mse(h_est: &DMatrix<Complex64>, h: &DMatrix<Complex64>) -> f64 {
    (h_est - h).norm_squared() / h.len() as f64
}
