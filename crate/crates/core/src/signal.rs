//! PAM signal sets, Gray labeling and the product signal space.
//!
//! An `M`-QAM symbol is carried as two independent `sqrt(M)`-PAM rails: the
//! in-phase rail at real index `i` and the quadrature rail at index `k + i`.

use crate::error::{Error, Result};

/// An `M`-PAM alphabet `{2m - 1 - M : m = 1..M}` with binary-reflected Gray
/// labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalSet {
    levels: Vec<f64>,
    bits_per_symbol: usize,
    /// `labels[m]` is the label of `levels[m]`.
    labels: Vec<u32>,
    /// `index_of_label[label]` is the level index carrying that label.
    index_of_label: Vec<usize>,
}

/// Builds the `order`-PAM alphabet.
pub fn pam_alphabet(order: usize) -> Result<SignalSet> {
    if order < 2 || !order.is_power_of_two() {
        return Err(Error::InvalidOrder(order));
    }
    let levels = (1..=order)
        .map(|m| (2 * m) as f64 - 1.0 - order as f64)
        .collect();
    let labels: Vec<u32> = (0..order as u32).map(|m| m ^ (m >> 1)).collect();
    let mut index_of_label = vec![0; order];
    for (m, &l) in labels.iter().enumerate() {
        index_of_label[l as usize] = m;
    }
    Ok(SignalSet {
        levels,
        bits_per_symbol: order.trailing_zeros() as usize,
        labels,
        index_of_label,
    })
}

impl SignalSet {
    pub fn order(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol
    }

    /// Largest amplitude, `M - 1`.
    pub fn max_level(&self) -> f64 {
        (self.order() - 1) as f64
    }

    /// Mean energy of one rail with equiprobable levels, `(M^2 - 1) / 3`.
    pub fn mean_energy(&self) -> f64 {
        let m = self.order() as f64;
        (m * m - 1.0) / 3.0
    }

    /// Level index of `value`, if it is exactly an alphabet point.
    pub fn index_of(&self, value: f64) -> Option<usize> {
        let m = (value + self.max_level()) / 2.0;
        if m.fract() != 0.0 || m < 0.0 || m as usize >= self.order() {
            return None;
        }
        Some(m as usize)
    }

    pub fn contains(&self, value: f64) -> bool {
        self.index_of(value).is_some()
    }

    pub fn label(&self, index: usize) -> u32 {
        self.labels[index]
    }

    pub fn level_for_label(&self, label: u32) -> f64 {
        self.levels[self.index_of_label[label as usize]]
    }

    /// Nearest alphabet point; ties go to the smaller level.
    pub fn quantize(&self, value: f64) -> f64 {
        let max = self.max_level();
        if !value.is_finite() {
            return if value > 0.0 { max } else { -max };
        }
        // levels are the odd integers; ceil puts even-valued ties on the lower one
        let q = 2.0 * (value / 2.0).ceil() - 1.0;
        q.clamp(-max, max)
    }

    /// Bit `bit` (0 = most significant) of the label at `value`.
    pub fn bit_of(&self, value: f64, bit: usize) -> Option<u8> {
        let idx = self.index_of(value)?;
        let label = self.labels[idx];
        Some(((label >> (self.bits_per_symbol - 1 - bit)) & 1) as u8)
    }

    /// The symbol obtained from `value` by forcing bit `bit` of its label.
    pub fn with_bit(&self, value: f64, bit: usize, set: u8) -> Option<f64> {
        let idx = self.index_of(value)?;
        let mask = 1u32 << (self.bits_per_symbol - 1 - bit);
        let label = if set != 0 {
            self.labels[idx] | mask
        } else {
            self.labels[idx] & !mask
        };
        Some(self.level_for_label(label))
    }
}

/// The Cartesian product of per-index alphabets, the search space of the
/// detector.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalSpace {
    sets: Vec<SignalSet>,
}

impl SignalSpace {
    pub fn uniform(set: SignalSet, dim: usize) -> Self {
        SignalSpace {
            sets: vec![set; dim],
        }
    }

    /// Space for `k` complex `order`-QAM symbols, i.e. `2k` PAM rails.
    pub fn qam(order: usize, k: usize) -> Result<Self> {
        let rail = qam_rail_order(order)?;
        Ok(Self::uniform(pam_alphabet(rail)?, 2 * k))
    }

    pub fn from_sets(sets: Vec<SignalSet>) -> Self {
        SignalSpace { sets }
    }

    pub fn dim(&self) -> usize {
        self.sets.len()
    }

    pub fn set(&self, i: usize) -> &SignalSet {
        &self.sets[i]
    }

    pub fn sets(&self) -> &[SignalSet] {
        &self.sets
    }

    pub fn total_bits(&self) -> usize {
        self.sets.iter().map(SignalSet::bits_per_symbol).sum()
    }

    pub fn contains(&self, symbols: &[f64]) -> bool {
        symbols.len() == self.dim() && symbols.iter().zip(&self.sets).all(|(&x, s)| s.contains(x))
    }

    pub fn quantize(&self, values: &[f64]) -> SymbolVector {
        SymbolVector(
            values
                .iter()
                .zip(&self.sets)
                .map(|(&v, s)| s.quantize(v))
                .collect(),
        )
    }

    /// Number of lattice points, saturating.
    pub fn cardinality(&self) -> u128 {
        self.sets
            .iter()
            .fold(1u128, |acc, s| acc.saturating_mul(s.order() as u128))
    }
}

/// Per-rail PAM order of a square `order`-QAM constellation.
pub fn qam_rail_order(order: usize) -> Result<usize> {
    if order < 4 || !order.is_power_of_two() || !order.trailing_zeros().is_multiple_of(2) {
        return Err(Error::InvalidOrder(order));
    }
    Ok(1 << (order.trailing_zeros() / 2))
}

/// A real lattice point; each entry belongs to its index's alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolVector(pub Vec<f64>);

impl SymbolVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Maps a bit stream (one `0`/`1` byte per bit, MSB first within a symbol)
/// onto the signal space.
pub fn bits_to_symbols(bits: &[u8], space: &SignalSpace) -> Result<SymbolVector> {
    let needed = space.total_bits();
    if bits.len() != needed {
        return Err(Error::Shape(format!(
            "expected {needed} bits for the signal space, got {}",
            bits.len()
        )));
    }
    let mut pos = 0;
    let mut out = Vec::with_capacity(space.dim());
    for set in space.sets() {
        let nb = set.bits_per_symbol();
        let label = bits[pos..pos + nb]
            .iter()
            .fold(0u32, |acc, &b| (acc << 1) | u32::from(b != 0));
        out.push(set.level_for_label(label));
        pos += nb;
    }
    Ok(SymbolVector(out))
}

/// Inverse of [`bits_to_symbols`].
pub fn symbols_to_bits(symbols: &[f64], space: &SignalSpace) -> Result<Vec<u8>> {
    if symbols.len() != space.dim() {
        return Err(Error::Shape(format!(
            "expected {} symbols, got {}",
            space.dim(),
            symbols.len()
        )));
    }
    let mut out = Vec::with_capacity(space.total_bits());
    for (&x, set) in symbols.iter().zip(space.sets()) {
        let idx = set
            .index_of(x)
            .ok_or_else(|| Error::Shape(format!("{x} is not a point of the {}-PAM alphabet", set.order())))?;
        let label = set.label(idx);
        let nb = set.bits_per_symbol();
        out.extend((0..nb).rev().map(|j| ((label >> j) & 1) as u8));
    }
    Ok(out)
}
