//! Monte-Carlo BER sweeps.

use std::time::Instant;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{draw_channel, make_frame, stream_rng, SnrModel, Stream};
use crate::detector::{mlas_detect, DetectorConfig};
use crate::error::{Error, Result};
use crate::estimation::iterative_detect_estimate;
use crate::signal::{bits_to_symbols, SignalSpace, SymbolVector};
use crate::stbc::CdaCode;
use crate::system::{build_transmission_system, received_vector, unstack_complex};

use super::config::ExperimentConfig;

/// Aggregate result at one SNR point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerRecord {
    pub snr_db: f64,
    pub bits: u64,
    pub errors: u64,
    pub ber: f64,
    pub ci95: f64,
    pub mean_stages: f64,
    pub mean_flips: f64,
    pub wall_ms: f64,
}

/// Normal-approximation 95% half-width for `errors` out of `bits`.
pub fn binomial_ci95(errors: u64, bits: u64) -> f64 {
    if bits == 0 {
        return 0.0;
    }
    let p = errors as f64 / bits as f64;
    1.96 * (p * (1.0 - p) / bits as f64).sqrt()
}

/// Outcome of one simulated frame.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TrialOutcome {
    pub bits: u64,
    pub errors: u64,
    pub detections: u64,
    pub stages: u64,
    pub flips: u64,
}

struct Setup {
    code: CdaCode,
    space: SignalSpace,
    n_r: usize,
    data_blocks: usize,
    rounds: Option<usize>,
}

impl Setup {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        Ok(Setup {
            code: cfg.code()?,
            space: cfg.space()?,
            n_r: cfg.system.n_r,
            data_blocks: cfg.channel.data_blocks,
            rounds: cfg.estimation_rounds(),
        })
    }
}

/// Simulates frame `trial`. Bits, channel and noise come from separate
/// streams keyed by `(seed, trial)`, so every SNR point and every receiver
/// variant sees the same draws.
fn run_trial(setup: &Setup, snr: &SnrModel, det: &DetectorConfig, seed: u64, trial: u64) -> Result<TrialOutcome> {
    let space = &setup.space;
    let n_t = setup.code.n();
    let mut bit_rng = stream_rng(seed, trial, Stream::Bits);
    let bits: Vec<Vec<u8>> = (0..setup.data_blocks)
        .map(|_| (0..space.total_bits()).map(|_| bit_rng.random_range(0..2u8)).collect())
        .collect();
    let sent: Vec<SymbolVector> = bits.iter().map(|b| bits_to_symbols(b, space)).collect::<Result<_>>()?;
    let complex: Vec<Vec<Complex64>> = sent.iter().map(|s| unstack_complex(&s.0)).collect();
    let h = draw_channel(setup.n_r, n_t, &mut stream_rng(seed, trial, Stream::Channel));
    let frame = make_frame(&complex, &setup.code, snr, &h, &mut stream_rng(seed, trial, Stream::Noise))?;

    let mut out = TrialOutcome::default();
    let mut tally = |d: &SymbolVector, s: &SymbolVector, stages: usize, flips: usize| {
        out.bits += space.total_bits() as u64;
        out.errors += symbol_bit_errors(d, s, space);
        out.detections += 1;
        out.stages += stages as u64;
        out.flips += flips as u64;
    };
    match setup.rounds {
        None => {
            let system = build_transmission_system(&h, &setup.code)?;
            for (i, s) in sent.iter().enumerate() {
                let det_out = mlas_detect(&system, &received_vector(&frame.received_data(i)), space, det)?;
                tally(&det_out.symbols, s, det_out.stats.stages, det_out.stats.flips);
            }
        }
        Some(rounds) => {
            let res = iterative_detect_estimate(&frame, &setup.code, snr, space, rounds, det)?;
            for ((d, st), s) in res.detected.iter().zip(&res.stats).zip(&sent) {
                tally(d, s, st.stages, st.flips);
            }
        }
    }
    Ok(out)
}

/// Bit errors between two symbol vectors under the Gray labeling.
pub fn symbol_bit_errors(a: &SymbolVector, b: &SymbolVector, space: &SignalSpace) -> u64 {
    a.0.iter()
        .zip(&b.0)
        .zip(space.sets())
        .map(|((&x, &y), set)| {
            if x == y {
                return 0;
            }
            let (lx, ly) = (set.index_of(x), set.index_of(y));
            match (lx, ly) {
                (Some(i), Some(j)) => u64::from((set.label(i) ^ set.label(j)).count_ones()),
                _ => set.bits_per_symbol() as u64,
            }
        })
        .sum()
}

/// Runs one SNR point until the stopping rule is met.
pub fn run_point(cfg: &ExperimentConfig, snr_db: f64, seed: u64) -> Result<BerRecord> {
    let setup = Setup::new(cfg)?;
    let snr = cfg.snr_model(snr_db)?;
    let det = cfg.detector_config(&snr);
    let start = Instant::now();
    let batch = (rayon::current_num_threads() * 4).max(8) as u64;
    let mut acc = TrialOutcome::default();
    let mut next = 0u64;
    'outer: loop {
        let outcomes: Vec<TrialOutcome> = (next..next + batch)
            .into_par_iter()
            .map(|t| run_trial(&setup, &snr, &det, seed, t))
            .collect::<Result<_>>()?;
        next += batch;
        // merge in trial order; results after the stopping trial are dropped
        for o in outcomes {
            acc.bits += o.bits;
            acc.errors += o.errors;
            acc.detections += o.detections;
            acc.stages += o.stages;
            acc.flips += o.flips;
            if acc.errors >= cfg.sweep.min_errors || acc.bits >= cfg.sweep.max_bits {
                break 'outer;
            }
        }
    }
    let wall_ms = if cfg.sweep.record_timing {
        start.elapsed().as_secs_f64() * 1e3
    } else {
        0.0
    };
    let n = acc.detections.max(1) as f64;
    Ok(BerRecord {
        snr_db,
        bits: acc.bits,
        errors: acc.errors,
        ber: acc.errors as f64 / acc.bits as f64,
        ci95: binomial_ci95(acc.errors, acc.bits),
        mean_stages: acc.stages as f64 / n,
        mean_flips: acc.flips as f64 / n,
        wall_ms,
    })
}

/// Per-frame outcomes of trials `0..trials` at one SNR point, in trial
/// order.
pub fn run_trials(cfg: &ExperimentConfig, snr_db: f64, seed: u64, trials: u64) -> Result<Vec<TrialOutcome>> {
    let setup = Setup::new(cfg)?;
    let snr = cfg.snr_model(snr_db)?;
    let det = cfg.detector_config(&snr);
    (0..trials)
        .into_par_iter()
        .map(|t| run_trial(&setup, &snr, &det, seed, t))
        .collect()
}

/// Runs every SNR point of the configuration. The seed must be set.
pub fn run_ber_sweep(cfg: &ExperimentConfig) -> Result<Vec<BerRecord>> {
    cfg.validate()?;
    let seed = cfg
        .sweep
        .seed
        .ok_or_else(|| Error::Config(vec!["sweep.seed is required for a simulation".into()]))?;
    cfg.sweep.snr_db.iter().map(|&s| run_point(cfg, s, seed)).collect()
}
