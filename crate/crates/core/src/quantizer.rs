//! Quantizers `Q : X → {0..M-1}`, distortion measures and the per-stage cost.

use serde::{Deserialize, Serialize};

use crate::belief::Channel;
use crate::error::{Error, Result};
use crate::source::Belief;

/// Default upper bound on the number of enumerated quantizers.
pub const DEFAULT_ACTION_CAP: usize = 1_000_000;

/// A deterministic map from source symbols to channel symbols.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Quantizer {
    labels: Vec<usize>,
    num_symbols: usize,
}

impl Quantizer {
    pub fn new(labels: Vec<usize>, num_symbols: usize) -> Result<Self> {
        if num_symbols == 0 {
            return Err(Error::InvalidArgument("quantizer needs M >= 1".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_symbols) {
            return Err(Error::InvalidArgument(format!(
                "label {bad} out of range for M = {num_symbols}"
            )));
        }
        Ok(Self {
            labels,
            num_symbols,
        })
    }

    /// Everything mapped to symbol 0.
    pub fn constant(num_states: usize, num_symbols: usize) -> Self {
        Self {
            labels: vec![0; num_states],
            num_symbols,
        }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_states(&self) -> usize {
        self.labels.len()
    }

    pub fn num_symbols(&self) -> usize {
        self.num_symbols
    }

    #[inline]
    pub fn apply(&self, x: usize) -> usize {
        self.labels[x]
    }

    pub fn cell(&self, symbol: usize) -> impl Iterator<Item = usize> + Clone + '_ {
        self.labels
            .iter()
            .enumerate()
            .filter(move |(_, l)| **l == symbol)
            .map(|(x, _)| x)
    }

    pub fn is_injective(&self) -> bool {
        let mut seen = vec![false; self.num_symbols];
        self.labels.iter().all(|&l| !std::mem::replace(&mut seen[l], true))
    }

    /// Relabels cells by order of first appearance.
    pub fn canonical(&self) -> Quantizer {
        let mut map = vec![usize::MAX; self.num_symbols];
        let mut next = 0;
        let labels = self
            .labels
            .iter()
            .map(|&l| {
                if map[l] == usize::MAX {
                    map[l] = next;
                    next += 1;
                }
                map[l]
            })
            .collect();
        Quantizer {
            labels,
            num_symbols: self.num_symbols,
        }
    }
}

/// How quantizers that induce the same partition are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DedupMode {
    /// Every one of the `M^|X|` label vectors.
    Labeled,
    /// One canonical representative per partition into at most `M` cells.
    Partition,
}

/// Lists quantizers in lexicographic order of their label vectors.
pub fn enumerate_quantizers(
    num_states: usize,
    num_symbols: usize,
    mode: DedupMode,
    cap: usize,
) -> Result<Vec<Quantizer>> {
    if num_states == 0 || num_symbols == 0 {
        return Err(Error::InvalidArgument(
            "need at least one state and one channel symbol".into(),
        ));
    }
    let count = (num_symbols as f64).powi(num_states as i32);
    if mode == DedupMode::Labeled && count > cap as f64 {
        return Err(Error::ActionSpaceTooLarge { count, cap });
    }
    let mut out = Vec::new();
    let mut labels = vec![0usize; num_states];
    let limit = |labels: &[usize], pos: usize| match mode {
        DedupMode::Labeled => num_symbols,
        // restricted growth: a new cell label is at most one past the largest so far
        DedupMode::Partition => {
            let max_prev = labels[..pos].iter().max().map_or(0, |m| m + 1);
            (max_prev + 1).min(num_symbols)
        }
    };
    fn rec(
        pos: usize,
        labels: &mut Vec<usize>,
        out: &mut Vec<Quantizer>,
        num_symbols: usize,
        cap: usize,
        limit: &dyn Fn(&[usize], usize) -> usize,
    ) -> Result<()> {
        if pos == labels.len() {
            if out.len() >= cap {
                return Err(Error::ActionSpaceTooLarge {
                    count: (out.len() + 1) as f64,
                    cap,
                });
            }
            out.push(Quantizer {
                labels: labels.clone(),
                num_symbols,
            });
            return Ok(());
        }
        for l in 0..limit(labels, pos) {
            labels[pos] = l;
            rec(pos + 1, labels, out, num_symbols, cap, limit)?;
        }
        Ok(())
    }
    rec(0, &mut labels, &mut out, num_symbols, cap, &limit)?;
    Ok(out)
}

/// Single-letter distortion `d(x, x̂)` on `X × X̂`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct DistortionSpec {
    matrix: Vec<Vec<f64>>,
    sup: f64,
}

impl DistortionSpec {
    pub fn new(matrix: Vec<Vec<f64>>) -> Result<Self> {
        let cols = matrix.first().map_or(0, Vec::len);
        if matrix.is_empty() || cols == 0 {
            return Err(Error::InvalidArgument("empty distortion matrix".into()));
        }
        let mut sup: f64 = 0.0;
        for (r, row) in matrix.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    found: row.len(),
                    context: "distortion row length",
                });
            }
            for (c, &v) in row.iter().enumerate() {
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::NegativeEntry {
                        row: r,
                        col: c,
                        value: v,
                    });
                }
                sup = sup.max(v);
            }
        }
        Ok(Self { matrix, sup })
    }

    /// 0/1 distortion with `X̂ = X`.
    pub fn hamming(n: usize) -> Self {
        let matrix = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 0.0 } else { 1.0 }).collect())
            .collect();
        Self {
            matrix,
            sup: if n > 1 { 1.0 } else { 0.0 },
        }
    }

    pub fn num_states(&self) -> usize {
        self.matrix.len()
    }

    pub fn reproduction_size(&self) -> usize {
        self.matrix[0].len()
    }

    /// `‖d‖∞`.
    pub fn sup_norm(&self) -> f64 {
        self.sup
    }

    #[inline]
    pub fn get(&self, x: usize, xhat: usize) -> f64 {
        self.matrix[x][xhat]
    }

    pub fn matrix(&self) -> &[Vec<f64>] {
        &self.matrix
    }

    /// Scales every entry by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            matrix: self
                .matrix
                .iter()
                .map(|r| r.iter().map(|v| v * factor).collect())
                .collect(),
            sup: self.sup * factor,
        }
    }

    /// `argmin_x̂ Σ_x w(x) d(x, x̂)` and its value, ties to the smallest index.
    /// `weights` yields `(x, w(x))` in increasing `x`.
    pub(crate) fn best_reproduction<I>(&self, weights: I) -> (usize, f64)
    where
        I: Iterator<Item = (usize, f64)> + Clone,
    {
        let mut best = (0, f64::INFINITY);
        for xhat in 0..self.reproduction_size() {
            let mut acc = 0.0;
            for (x, w) in weights.clone() {
                acc += w * self.matrix[x][xhat];
            }
            if acc < best.1 {
                best = (xhat, acc);
            }
        }
        best
    }
}

impl TryFrom<Vec<Vec<f64>>> for DistortionSpec {
    type Error = Error;
    fn try_from(m: Vec<Vec<f64>>) -> Result<Self> {
        DistortionSpec::new(m)
    }
}

impl From<DistortionSpec> for Vec<Vec<f64>> {
    fn from(d: DistortionSpec) -> Self {
        d.matrix
    }
}

fn check_dims(pi: &Belief, q: &Quantizer, d: &DistortionSpec) -> Result<()> {
    if q.num_states() != pi.len() {
        return Err(Error::DimensionMismatch {
            expected: pi.len(),
            found: q.num_states(),
            context: "quantizer domain vs belief",
        });
    }
    if d.num_states() != pi.len() {
        return Err(Error::DimensionMismatch {
            expected: pi.len(),
            found: d.num_states(),
            context: "distortion rows vs belief",
        });
    }
    Ok(())
}

/// Expected distortion of `q` under belief `pi` with the best reproduction
/// per cell: `Σ_i min_x̂ Σ_{x ∈ Q⁻¹(i)} π(x) d(x, x̂)`.
pub fn stage_cost(pi: &Belief, q: &Quantizer, d: &DistortionSpec) -> Result<f64> {
    check_dims(pi, q, d)?;
    Ok(stage_cost_unchecked(pi, q, d))
}

pub(crate) fn stage_cost_unchecked(pi: &Belief, q: &Quantizer, d: &DistortionSpec) -> f64 {
    let mut total = 0.0;
    for i in 0..q.num_symbols() {
        let weights = q.cell(i).map(|x| (x, pi[x]));
        if weights.clone().next().is_none() {
            continue;
        }
        total += d.best_reproduction(weights).1;
    }
    total
}

/// Stage cost when the decoder sees `q'` through `channel`:
/// `Σ_{q'} min_x̂ Σ_x π(x) T(q' | Q(x)) d(x, x̂)`. Reduces to [`stage_cost`]
/// for the identity channel.
pub fn noisy_stage_cost(
    pi: &Belief,
    q: &Quantizer,
    d: &DistortionSpec,
    channel: &Channel,
) -> Result<f64> {
    check_dims(pi, q, d)?;
    if channel.input_size() != q.num_symbols() {
        return Err(Error::DimensionMismatch {
            expected: q.num_symbols(),
            found: channel.input_size(),
            context: "channel inputs vs quantizer symbols",
        });
    }
    Ok(noisy_stage_cost_unchecked(pi, q, d, channel))
}

pub(crate) fn noisy_stage_cost_unchecked(
    pi: &Belief,
    q: &Quantizer,
    d: &DistortionSpec,
    channel: &Channel,
) -> f64 {
    let mut total = 0.0;
    for out in 0..channel.output_size() {
        let weights = (0..pi.len()).map(|x| (x, pi[x] * channel.prob(q.apply(x), out)));
        total += d.best_reproduction(weights).1;
    }
    total
}

/// Best reproduction symbol for cell `cell`; index 0 when the cell is empty
/// or has zero mass.
pub fn optimal_reproduction(pi: &Belief, q: &Quantizer, d: &DistortionSpec, cell: usize) -> usize {
    let mass: f64 = q.cell(cell).map(|x| pi[x]).sum();
    if mass <= 0.0 {
        return 0;
    }
    d.best_reproduction(q.cell(cell).map(|x| (x, pi[x]))).0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(v: &[f64]) -> Belief {
        Belief::new(v.to_vec()).unwrap()
    }

    #[test]
    fn enumeration_counts() {
        let l = enumerate_quantizers(2, 2, DedupMode::Labeled, DEFAULT_ACTION_CAP).unwrap();
        assert_eq!(l.len(), 4);
        assert_eq!(l[1].labels(), &[0, 1]);
        let p = enumerate_quantizers(2, 2, DedupMode::Partition, DEFAULT_ACTION_CAP).unwrap();
        let labels: Vec<_> = p.iter().map(|q| q.labels().to_vec()).collect();
        assert_eq!(labels, vec![vec![0, 0], vec![0, 1]]);
        assert_eq!(
            enumerate_quantizers(3, 2, DedupMode::Partition, DEFAULT_ACTION_CAP)
                .unwrap()
                .len(),
            4
        );
        // Bell(4) = 15
        assert_eq!(
            enumerate_quantizers(4, 4, DedupMode::Partition, DEFAULT_ACTION_CAP)
                .unwrap()
                .len(),
            15
        );
        assert!(matches!(
            enumerate_quantizers(10, 5, DedupMode::Labeled, DEFAULT_ACTION_CAP),
            Err(Error::ActionSpaceTooLarge { .. })
        ));
    }

    #[test]
    fn partition_mode_is_canonical_subset_of_labeled() {
        let labeled = enumerate_quantizers(4, 3, DedupMode::Labeled, DEFAULT_ACTION_CAP).unwrap();
        let mut canon: Vec<_> = labeled.iter().map(Quantizer::canonical).collect();
        canon.sort();
        canon.dedup();
        let part = enumerate_quantizers(4, 3, DedupMode::Partition, DEFAULT_ACTION_CAP).unwrap();
        assert_eq!(canon, part);
    }

    #[test]
    fn stage_cost_examples() {
        let h = DistortionSpec::hamming(2);
        let id = Quantizer::new(vec![0, 1], 2).unwrap();
        let konst = Quantizer::constant(2, 2);
        assert_eq!(stage_cost(&b(&[0.3, 0.7]), &id, &h).unwrap(), 0.0);
        assert!((stage_cost(&b(&[0.7, 0.3]), &konst, &h).unwrap() - 0.3).abs() < 1e-15);
        let d = DistortionSpec::new(vec![vec![0.0, 1.0], vec![2.0, 0.0]]).unwrap();
        assert!((stage_cost(&b(&[0.5, 0.5]), &konst, &d).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(
            stage_cost(&b(&[0.2, 0.3, 0.5]), &id, &h),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn reproduction_examples() {
        let h = DistortionSpec::hamming(2);
        let id = Quantizer::new(vec![0, 1], 2).unwrap();
        assert_eq!(optimal_reproduction(&b(&[0.4, 0.6]), &id, &h, 1), 1);
        let konst = Quantizer::constant(2, 2);
        assert_eq!(optimal_reproduction(&b(&[0.5, 0.5]), &konst, &h, 0), 0);
        // 0.5*0 + 0.5*2 = 1 for x̂=0 versus 0.5*1 + 0.5*0 = 0.5 for x̂=1
        let d = DistortionSpec::new(vec![vec![0.0, 1.0], vec![2.0, 0.0]]).unwrap();
        assert_eq!(optimal_reproduction(&b(&[0.5, 0.5]), &konst, &d, 0), 1);
        // empty cell
        assert_eq!(optimal_reproduction(&b(&[0.5, 0.5]), &konst, &d, 1), 0);
        // zero-mass cell
        assert_eq!(optimal_reproduction(&b(&[1.0, 0.0]), &id, &d, 1), 0);
    }

    #[test]
    fn noisy_cost_reduces_to_noiseless() {
        let d = DistortionSpec::new(vec![vec![0.0, 1.0, 3.0], vec![2.0, 0.0, 1.0], vec![1.0, 1.0, 0.0]]).unwrap();
        let pi = b(&[0.2, 0.45, 0.35]);
        for q in enumerate_quantizers(3, 2, DedupMode::Labeled, 100).unwrap() {
            let a = stage_cost(&pi, &q, &d).unwrap();
            let c = noisy_stage_cost(&pi, &q, &d, &Channel::noiseless(2)).unwrap();
            assert_eq!(a.to_bits(), c.to_bits());
        }
        // a useless channel leaves only the prior guess: min over x̂ of Σ π d
        let blind = Channel::new(vec![vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let q = Quantizer::new(vec![0, 1, 1], 2).unwrap();
        let c = noisy_stage_cost(&pi, &q, &d, &blind).unwrap();
        let prior = stage_cost(&pi, &Quantizer::constant(3, 2), &d).unwrap();
        assert!((c - prior).abs() < 1e-15);
    }

    #[test]
    fn canonical_relabeling() {
        let q = Quantizer::new(vec![2, 0, 2, 1], 3).unwrap();
        assert_eq!(q.canonical().labels(), &[0, 1, 0, 2]);
        assert!(!q.is_injective());
        assert!(Quantizer::new(vec![1, 0, 2], 3).unwrap().is_injective());
        assert!(Quantizer::new(vec![0, 3], 3).is_err());
    }
}
