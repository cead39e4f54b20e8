//! Multistage likelihood ascent search.
//!
//! The search keeps `z = H^T (y - H d)` up to date, so the cost change of a
//! step `lambda` on the index set `U` is
//! `lambda^T G_UU lambda - 2 lambda^T z_U` and an accepted step updates
//! `z -= G_U lambda`.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::signal::{SignalSpace, SymbolVector};
use crate::system::RealSystem;

use super::filter::{initial_solution, FilterPath, InitialFilter};

/// One accepted update, kept when auditing is on.
#[derive(Debug, Clone, PartialEq)]
pub struct AppliedUpdate {
    pub indices: Vec<usize>,
    pub steps: Vec<f64>,
    /// Predicted cost change.
    pub delta_cost: f64,
    /// Cost recomputed from scratch after the update.
    pub cost_after: f64,
}

/// A scored multi-symbol step.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateCandidate {
    pub indices: Vec<usize>,
    pub steps: Vec<f64>,
    pub delta_cost: f64,
}

/// Working state of one detection.
#[derive(Debug, Clone)]
pub struct LasState {
    pub d: Vec<f64>,
    pub z: Vec<f64>,
    pub cost: f64,
    pub stage_count: usize,
    pub substage_index: usize,
    /// Accepted 1-symbol iterations.
    pub iterations: usize,
    /// Symbols changed over all accepted updates.
    pub flips: usize,
    /// Candidate evaluations performed by 1-symbol scans.
    pub scan_evaluations: u64,
    /// Index sets skipped because `G_UU` was numerically singular.
    pub singular_skips: u64,
    /// Set if the safety cap on accepted updates stopped the search.
    pub truncated: bool,
    matched: DVector<f64>,
    audit: Option<Vec<AppliedUpdate>>,
}

impl LasState {
    pub fn new(system: &RealSystem, y: &DVector<f64>, d: SymbolVector, audit: bool) -> Result<Self> {
        if d.len() != system.dim() {
            return Err(Error::Shape(format!(
                "start vector has length {}, system has dimension {}",
                d.len(),
                system.dim()
            )));
        }
        let matched = system.matched(y)?;
        let dv = DVector::from_column_slice(&d.0);
        let z = &matched - system.gram() * &dv;
        let cost = system.cost_with_matched(&matched, &d.0);
        Ok(LasState {
            d: d.0,
            z: z.as_slice().to_vec(),
            cost,
            stage_count: 0,
            substage_index: 0,
            iterations: 0,
            flips: 0,
            scan_evaluations: 0,
            singular_skips: 0,
            truncated: false,
            matched,
            audit: audit.then(Vec::new),
        })
    }

    pub fn symbols(&self) -> SymbolVector {
        SymbolVector(self.d.clone())
    }

    /// Accepted updates in order, if auditing was enabled.
    pub fn audit_log(&self) -> Option<&[AppliedUpdate]> {
        self.audit.as_deref()
    }

    /// `H^T (y - H d)` computed from scratch.
    pub fn recompute_z(&self, system: &RealSystem) -> Vec<f64> {
        let dv = DVector::from_column_slice(&self.d);
        (&self.matched - system.gram() * dv).as_slice().to_vec()
    }

    pub fn recompute_cost(&self, system: &RealSystem) -> f64 {
        system.cost_with_matched(&self.matched, &self.d)
    }

    fn apply(&mut self, system: &RealSystem, indices: &[usize], steps: &[f64], delta_cost: f64) {
        let g = system.gram();
        for (&i, &step) in indices.iter().zip(steps) {
            self.d[i] += step;
            for (zr, gr) in self.z.iter_mut().zip(g.column(i).iter()) {
                *zr -= step * gr;
            }
        }
        self.cost += delta_cost;
        self.flips += indices.len();
        if let Some(log) = self.audit.as_mut() {
            let cost_after = system.cost_with_matched(&self.matched, &self.d);
            log.push(AppliedUpdate {
                indices: indices.to_vec(),
                steps: steps.to_vec(),
                delta_cost,
                cost_after,
            });
        }
    }
}

/// Optimal even step magnitude `2 round(|z| / (2a))` for a single symbol.
#[inline]
pub fn optimal_step(z: f64, a: f64) -> f64 {
    2.0 * (z.abs() / (2.0 * a)).round_ties_even()
}

/// `F(l) = l^2 a - 2 l |z|`, the cost change of a step of size `l` in the
/// direction of `z`.
#[inline]
pub fn step_cost(l: f64, z: f64, a: f64) -> f64 {
    l * l * a - 2.0 * l * z.abs()
}

/// The best single-symbol step at index `p`, after clipping to the alphabet:
/// `(signed step, cost change)`, or `None` for a zero step.
#[inline]
fn one_symbol_candidate(d: f64, z: f64, a: f64, max_level: f64) -> Option<(f64, f64)> {
    if z == 0.0 || a <= 0.0 {
        return None;
    }
    let l = optimal_step(z, a);
    if l == 0.0 {
        return None;
    }
    let target = (d + l * z.signum()).clamp(-max_level, max_level);
    let clipped = (target - d).abs();
    if clipped == 0.0 {
        return None;
    }
    Some((target - d, step_cost(clipped, z, a)))
}

/// Hard cap on accepted updates; strict descent on a finite lattice makes
/// it unreachable in exact arithmetic.
fn update_cap(dim: usize) -> usize {
    1000 * dim.max(1) * dim.max(1)
}

/// Runs 1-symbol updates until none lowers the cost. Returns the number of
/// accepted iterations.
pub fn one_symbol_stage(state: &mut LasState, system: &RealSystem, space: &SignalSpace) -> usize {
    let g = system.gram();
    let dim = state.d.len();
    let max: Vec<f64> = space.sets().iter().map(|s| s.max_level()).collect();
    let diag: Vec<f64> = (0..dim).map(|i| g[(i, i)]).collect();
    let cap = update_cap(dim);
    let mut accepted = 0;
    loop {
        let mut best: Option<(usize, f64, f64)> = None;
        for p in 0..dim {
            if let Some((step, f)) = one_symbol_candidate(state.d[p], state.z[p], diag[p], max[p]) {
                if best.is_none_or(|(_, _, bf)| f < bf) {
                    best = Some((p, step, f));
                }
            }
        }
        state.scan_evaluations += dim as u64;
        match best {
            Some((_, _, f)) if f < 0.0 && accepted >= cap => {
                state.truncated = true;
                return accepted;
            }
            Some((s, step, f)) if f < 0.0 => {
                state.apply(system, &[s], &[step], f);
                state.iterations += 1;
                accepted += 1;
            }
            _ => return accepted,
        }
    }
}

/// Cost change of `steps` on `indices`.
pub fn delta_cost(system: &RealSystem, z: &[f64], indices: &[usize], steps: &[f64]) -> f64 {
    let g = system.gram();
    let mut quad = 0.0;
    let mut lin = 0.0;
    for (p, (&ip, &lp)) in indices.iter().zip(steps).enumerate() {
        quad += lp * lp * g[(ip, ip)];
        for (&iq, &lq) in indices[..p].iter().zip(steps) {
            quad += 2.0 * lp * lq * g[(ip, iq)];
        }
        lin += lp * z[ip];
    }
    quad - 2.0 * lin
}

/// Scratch space for the `K x K` solves of one sub-stage.
struct Solver {
    k: usize,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl Solver {
    fn new(k: usize) -> Self {
        Solver {
            k,
            a: vec![0.0; k * k],
            b: vec![0.0; k],
        }
    }

    /// Solves `F x = z` in place by Gaussian elimination with partial
    /// pivoting; `None` when a pivot is negligible against `scale`.
    fn solve(&mut self, scale: f64) -> Option<&[f64]> {
        let k = self.k;
        let (a, b) = (&mut self.a, &mut self.b);
        for col in 0..k {
            let (piv, pv) = (col..k)
                .map(|r| (r, a[r * k + col].abs()))
                .fold((col, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if pv <= 1e-12 * scale {
                return None;
            }
            if piv != col {
                for c in 0..k {
                    a.swap(piv * k + c, col * k + c);
                }
                b.swap(piv, col);
            }
            let d = a[col * k + col];
            for r in col + 1..k {
                let f = a[r * k + col] / d;
                if f != 0.0 {
                    for c in col..k {
                        a[r * k + c] -= f * a[col * k + c];
                    }
                    b[r] -= f * b[col];
                }
            }
        }
        for r in (0..k).rev() {
            let mut s = b[r];
            for c in r + 1..k {
                s -= a[r * k + c] * b[c];
            }
            b[r] = s / a[r * k + r];
        }
        Some(&self.b)
    }
}

/// Advances `idx` to the next `K`-combination of `0..n` in lexicographic
/// order.
fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if idx[i] < n - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Finds the best round-and-clip `K`-symbol candidate over all index sets,
/// without applying it. Sets with a numerically singular `G_UU` or a zero
/// step entry are skipped.
pub fn best_k_symbol_candidate(
    state: &mut LasState,
    system: &RealSystem,
    space: &SignalSpace,
    k: usize,
) -> Result<Option<UpdateCandidate>> {
    let dim = state.d.len();
    if k == 0 || k > dim {
        return Err(Error::Parameter(format!("K = {k} must lie in 1..={dim}")));
    }
    let g = system.gram();
    let scale = (0..dim).map(|i| g[(i, i)]).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut idx: Vec<usize> = (0..k).collect();
    let mut steps = vec![0.0; k];
    let mut solver = Solver::new(k);
    let mut best: Option<UpdateCandidate> = None;
    loop {
        for (p, &ip) in idx.iter().enumerate() {
            for (q, &iq) in idx.iter().enumerate() {
                solver.a[p * k + q] = g[(ip, iq)];
            }
            solver.b[p] = state.z[ip];
        }
        match solver.solve(scale) {
            None => state.singular_skips += 1,
            Some(sol) => {
                let mut admissible = true;
                for (j, (&i, &lt)) in idx.iter().zip(sol).enumerate() {
                    let max = space.set(i).max_level();
                    let mut l = 2.0 * (0.5 * lt).round_ties_even();
                    let d = state.d[i];
                    if d + l > max {
                        l = max - d;
                    } else if d + l < -max {
                        l = -max - d;
                    }
                    if l == 0.0 {
                        admissible = false;
                        break;
                    }
                    steps[j] = l;
                }
                if admissible {
                    let dc = delta_cost(system, &state.z, &idx, &steps);
                    if best.as_ref().is_none_or(|b| dc < b.delta_cost) {
                        best = Some(UpdateCandidate {
                            indices: idx.clone(),
                            steps: steps.clone(),
                            delta_cost: dc,
                        });
                    }
                }
            }
        }
        if !next_combination(&mut idx, dim) {
            break;
        }
    }
    Ok(best)
}

/// One `K`-symbol sub-stage: applies the best candidate if it lowers the
/// cost. Returns whether an update was applied.
pub fn k_symbol_substage(state: &mut LasState, system: &RealSystem, space: &SignalSpace, k: usize) -> Result<bool> {
    state.substage_index = k;
    match best_k_symbol_candidate(state, system, space, k)? {
        Some(c) if c.delta_cost < 0.0 => {
            state.apply(system, &c.indices, &c.steps, c.delta_cost);
            Ok(true)
        }
        _ => Ok(false),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorConfig {
    pub filter: InitialFilter,
    pub path: FilterPath,
    /// Highest sub-stage order `M`; `0` skips the search and returns the
    /// quantized filter output.
    pub max_substage: usize,
    pub audit: bool,
}

impl DetectorConfig {
    pub fn new(filter: InitialFilter, max_substage: usize) -> Self {
        DetectorConfig {
            filter,
            path: FilterPath::Lifted,
            max_substage,
            audit: false,
        }
    }

    pub fn with_audit(mut self, audit: bool) -> Self {
        self.audit = audit;
        self
    }

    pub fn with_path(mut self, path: FilterPath) -> Self {
        self.path = path;
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DetectionStats {
    pub stages: usize,
    pub iterations: usize,
    pub flips: usize,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub scan_evaluations: u64,
    pub singular_skips: u64,
    /// Successful sub-stages by order, index `K - 2`.
    pub multi_successes: Vec<usize>,
    pub zf_fallback: bool,
    pub truncated: bool,
}

#[derive(Debug, Clone)]
pub struct Detection {
    pub symbols: SymbolVector,
    pub stats: DetectionStats,
    pub state: LasState,
}

/// Filters, quantizes, then runs search stages until every sub-stage up to
/// `max_substage` fails.
pub fn mlas_detect(
    system: &RealSystem,
    y: &DVector<f64>,
    space: &SignalSpace,
    config: &DetectorConfig,
) -> Result<Detection> {
    let init = initial_solution(system, y, space, config.filter, config.path)?;
    let mut state = LasState::new(system, y, init.symbols, config.audit)?;
    let initial_cost = state.cost;
    let mut multi = vec![0; config.max_substage.saturating_sub(1)];
    if config.max_substage > 0 {
        search(&mut state, system, space, config.max_substage, &mut multi)?;
    }
    let stats = DetectionStats {
        stages: state.stage_count,
        iterations: state.iterations,
        flips: state.flips,
        initial_cost,
        final_cost: state.cost,
        scan_evaluations: state.scan_evaluations,
        singular_skips: state.singular_skips,
        multi_successes: multi,
        zf_fallback: init.zf_fallback,
        truncated: state.truncated,
    };
    Ok(Detection {
        symbols: state.symbols(),
        stats,
        state,
    })
}

/// The stage loop from an arbitrary starting state.
pub fn run_search(state: &mut LasState, system: &RealSystem, space: &SignalSpace, max_substage: usize) -> Result<()> {
    if max_substage == 0 {
        return Err(Error::Parameter("search needs at least one sub-stage".into()));
    }
    let mut multi = vec![0; max_substage - 1];
    search(state, system, space, max_substage, &mut multi)
}

fn search(
    state: &mut LasState,
    system: &RealSystem,
    space: &SignalSpace,
    max_substage: usize,
    multi: &mut [usize],
) -> Result<()> {
    let cap = update_cap(state.d.len());
    let max_k = max_substage.min(state.d.len());
    'stages: loop {
        state.stage_count += 1;
        state.substage_index = 1;
        one_symbol_stage(state, system, space);
        if state.truncated || state.stage_count >= cap {
            state.truncated = true;
            break;
        }
        for k in 2..=max_k {
            if k_symbol_substage(state, system, space, k)? {
                multi[k - 2] += 1;
                continue 'stages;
            }
        }
        break;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{complex_normal, draw_channel};
    use crate::detector::oracle::{local_minimum_check, ml_oracle};
    use crate::stbc::CdaCode;
    use crate::system::build_transmission_system;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    struct Instance {
        system: RealSystem,
        space: SignalSpace,
        x: Vec<f64>,
        y: DVector<f64>,
        sigma2: f64,
    }

    fn instance(rng: &mut ChaCha8Rng, n: usize, qam: usize, snr_db: f64) -> Instance {
        let code = CdaCode::ill_only(n).unwrap();
        let system = build_transmission_system(&draw_channel(n, n, rng), &code).unwrap();
        let space = SignalSpace::qam(qam, code.k()).unwrap();
        let x: Vec<f64> = space.sets().iter().map(|s| s.levels()[rng.random_range(0..s.order())]).collect();
        let es = 2.0 * space.set(0).mean_energy();
        let sigma2 = n as f64 * es / 10f64.powf(snr_db / 10.0);
        let noise: Vec<_> = (0..system.dims().obs_dim() / 2).map(|_| complex_normal(rng)).collect();
        let y = system.h() * DVector::from_vec(x.clone())
            + crate::system::stack_real(&noise) * sigma2.sqrt();
        Instance {
            system,
            space,
            x,
            y,
            sigma2: sigma2 / es,
        }
    }

    #[test]
    fn step_examples() {
        assert_eq!(optimal_step(5.2, 1.0), 6.0);
        assert_eq!(optimal_step(-5.2, 1.0), 6.0);
        assert_eq!(optimal_step(0.0, 1.0), 0.0);
        // |z|/(2a) = 0.5 ties to even, i.e. a zero step
        assert_eq!(optimal_step(1.0, 1.0), 0.0);
        assert_eq!(optimal_step(3.0, 1.0), 4.0);
        assert_eq!(one_symbol_candidate(3.0, 50.0, 1.0, 3.0), None);
        assert_eq!(one_symbol_candidate(1.0, 50.0, 1.0, 3.0), Some((2.0, 4.0 - 200.0)));
        assert_eq!(one_symbol_candidate(1.0, 0.0, 1.0, 3.0), None);
    }

    #[test]
    fn step_is_exhaustive_minimizer() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..20_000 {
            let z: f64 = rng.random_range(-40.0..40.0);
            let a: f64 = rng.random_range(0.01..10.0);
            let l = optimal_step(z, a);
            let limit = (2.0 * z.abs() / a).ceil() as i64 + 4;
            let best = (0..=limit / 2 + 1)
                .map(|m| 2.0 * m as f64)
                .min_by(|p, q| step_cost(*p, z, a).total_cmp(&step_cost(*q, z, a)))
                .unwrap();
            assert!(step_cost(l, z, a) <= step_cost(best, z, a) + 1e-9 * (1.0 + z.abs() * l));
            assert!(step_cost(l, z, a) <= 0.0);
        }
    }

    #[test]
    fn k1_substage_matches_one_symbol_choice() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        for _ in 0..50 {
            let inst = instance(&mut rng, 2, 16, 5.0);
            let start = inst.space.quantize(&[0.0; 8]);
            let mut a = LasState::new(&inst.system, &inst.y, start.clone(), false).unwrap();
            let cand = best_k_symbol_candidate(&mut a, &inst.system, &inst.space, 1).unwrap();
            let g = inst.system.gram();
            let best = (0..8)
                .filter_map(|p| {
                    one_symbol_candidate(a.d[p], a.z[p], g[(p, p)], 3.0).map(|(s, f)| (p, s, f))
                })
                .fold(None::<(usize, f64, f64)>, |acc, c| match acc {
                    Some(b) if b.2 <= c.2 => Some(b),
                    _ => Some(c),
                });
            match (cand, best) {
                (Some(c), Some((p, s, f))) => {
                    assert_eq!(c.indices, vec![p]);
                    assert_eq!(c.steps, vec![s]);
                    assert!((c.delta_cost - f).abs() < 1e-9 * f.abs().max(1.0));
                }
                (None, None) => {}
                other => panic!("mismatch {other:?}"),
            }
        }
    }

    #[test]
    fn noiseless_start_at_truth_is_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let inst = instance(&mut rng, 2, 4, 300.0);
        let y = inst.system.h() * DVector::from_vec(inst.x.clone());
        let mut st = LasState::new(&inst.system, &y, SymbolVector(inst.x.clone()), false).unwrap();
        assert_eq!(one_symbol_stage(&mut st, &inst.system, &inst.space), 0);
        for k in 2..=3 {
            assert!(!k_symbol_substage(&mut st, &inst.system, &inst.space, k).unwrap());
        }
        assert_eq!(st.d, inst.x);
    }

    #[test]
    fn descent_and_bookkeeping() {
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        for trial in 0..200 {
            let n = 1 + trial % 4;
            let qam = if trial % 2 == 0 { 4 } else { 16 };
            let snr = rng.random_range(0.0..20.0);
            let inst = instance(&mut rng, n, qam, snr);
            let cfg = DetectorConfig::new(InitialFilter::mmse(inst.sigma2), 1 + trial % 3).with_audit(true);
            let det = mlas_detect(&inst.system, &inst.y, &inst.space, &cfg).unwrap();
            let log = det.state.audit_log().unwrap();
            let mut prev = det.stats.initial_cost;
            for u in log {
                assert!(u.delta_cost < 0.0);
                assert!(u.cost_after < prev);
                prev = u.cost_after;
            }
            assert!(det.stats.final_cost <= det.stats.initial_cost);
            assert!(!det.stats.truncated);
            let z = det.state.recompute_z(&inst.system);
            let zn = z.iter().map(|v| v * v).sum::<f64>().sqrt();
            let err = z.iter().zip(&det.state.z).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            assert!(err <= 1e-8 * zn.max(1.0));
            assert!((det.state.recompute_cost(&inst.system) - det.stats.final_cost).abs() < 1e-8 * prev.abs().max(1.0));
            assert!(inst.space.contains(&det.symbols.0));
            assert!(local_minimum_check(&det.symbols, &inst.system, &inst.y, &inst.space, 1).unwrap());
        }
    }

    #[test]
    fn search_never_beats_ml() {
        let mut rng = ChaCha8Rng::seed_from_u64(35);
        for _ in 0..100 {
            let inst = instance(&mut rng, 2, 4, 10.0);
            let cfg = DetectorConfig::new(InitialFilter::mmse(inst.sigma2), 2);
            let det = mlas_detect(&inst.system, &inst.y, &inst.space, &cfg).unwrap();
            let ml = ml_oracle(&inst.system, &inst.y, &inst.space).unwrap();
            let ml_cost = inst.system.cost(&inst.y, &ml.0).unwrap();
            assert!(ml_cost <= det.stats.final_cost + 1e-9 * ml_cost.abs());
        }
    }

    #[test]
    fn filter_only_mode() {
        let mut rng = ChaCha8Rng::seed_from_u64(36);
        let inst = instance(&mut rng, 3, 4, 4.0);
        let cfg = DetectorConfig::new(InitialFilter::mmse(inst.sigma2), 0);
        let det = mlas_detect(&inst.system, &inst.y, &inst.space, &cfg).unwrap();
        assert_eq!(det.stats.flips, 0);
        assert_eq!(det.stats.final_cost, det.stats.initial_cost);
    }

    #[test]
    fn one_symbol_scan_cost_is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for n in [2, 4, 8] {
            let inst = instance(&mut rng, n, 4, 6.0);
            let cfg = DetectorConfig::new(InitialFilter::mmse(inst.sigma2), 1);
            let det = mlas_detect(&inst.system, &inst.y, &inst.space, &cfg).unwrap();
            // every scan (accepted or final) looks at each of the 2k entries once
            assert_eq!(
                det.stats.scan_evaluations,
                (det.stats.iterations as u64 + det.stats.stages as u64) * inst.system.dim() as u64
            );
        }
    }

    #[test]
    fn combinations_enumerate_in_order() {
        let mut idx = vec![0, 1];
        let mut seen = vec![idx.clone()];
        while next_combination(&mut idx, 4) {
            seen.push(idx.clone());
        }
        assert_eq!(seen, vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]);
    }

    #[test]
    fn bad_k_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(38);
        let inst = instance(&mut rng, 1, 4, 6.0);
        let mut st = LasState::new(&inst.system, &inst.y, inst.space.quantize(&[0.0, 0.0]), false).unwrap();
        assert!(k_symbol_substage(&mut st, &inst.system, &inst.space, 3).is_err());
        assert!(k_symbol_substage(&mut st, &inst.system, &inst.space, 0).is_err());
    }
}
