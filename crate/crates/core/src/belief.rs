//! Belief filtering, the discrete channel, the L₁ Wasserstein metric and the
//! type-lattice discretization of the simplex.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantizer::Quantizer;
use crate::source::{Belief, MarkovModel, STOCHASTIC_TOL};

/// Observations with probability at or below this are treated as impossible.
pub const ZERO_PROB_TOL: f64 = 1e-15;

/// A discrete memoryless channel `T(q' | q)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct Channel {
    matrix: Vec<Vec<f64>>,
}

impl Channel {
    pub fn new(matrix: Vec<Vec<f64>>) -> Result<Self> {
        let cols = matrix.first().map_or(0, Vec::len);
        if matrix.is_empty() || cols == 0 {
            return Err(Error::InvalidArgument("empty channel matrix".into()));
        }
        for (r, row) in matrix.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    found: row.len(),
                    context: "channel row length",
                });
            }
            for (c, &v) in row.iter().enumerate() {
                if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                    return Err(Error::NegativeEntry {
                        row: r,
                        col: c,
                        value: v,
                    });
                }
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::NonStochasticMatrix { row: r, sum });
            }
        }
        Ok(Self { matrix })
    }

    /// Identity channel on `m` symbols.
    pub fn noiseless(m: usize) -> Self {
        Self {
            matrix: (0..m)
                .map(|i| (0..m).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                .collect(),
        }
    }

    /// Binary symmetric channel with crossover probability `epsilon`.
    pub fn bsc(epsilon: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::InvalidArgument(format!(
                "BSC crossover {epsilon} outside [0, 1]"
            )));
        }
        Self::new(vec![
            vec![1.0 - epsilon, epsilon],
            vec![epsilon, 1.0 - epsilon],
        ])
    }

    pub fn input_size(&self) -> usize {
        self.matrix.len()
    }

    pub fn output_size(&self) -> usize {
        self.matrix[0].len()
    }

    /// `T(output | input)`.
    #[inline]
    pub fn prob(&self, input: usize, output: usize) -> f64 {
        self.matrix[input][output]
    }

    pub fn row(&self, input: usize) -> &[f64] {
        &self.matrix[input]
    }

    pub fn matrix(&self) -> &[Vec<f64>] {
        &self.matrix
    }

    pub fn is_identity(&self) -> bool {
        self.input_size() == self.output_size()
            && self.matrix.iter().enumerate().all(|(i, row)| {
                row.iter()
                    .enumerate()
                    .all(|(j, &v)| v == if i == j { 1.0 } else { 0.0 })
            })
    }
}

impl TryFrom<Vec<Vec<f64>>> for Channel {
    type Error = Error;
    fn try_from(m: Vec<Vec<f64>>) -> Result<Self> {
        Channel::new(m)
    }
}

impl From<Channel> for Vec<Vec<f64>> {
    fn from(c: Channel) -> Self {
        c.matrix
    }
}

/// `π(Q⁻¹(q))`.
pub fn symbol_probability(pi: &Belief, q: &Quantizer, symbol: usize) -> f64 {
    let mut mass = 0.0;
    for x in q.cell(symbol) {
        mass += pi[x];
    }
    mass
}

/// Propagates unnormalized weights `w(x)` through `P` and divides by their
/// total. Shared by both filters so the identity channel reproduces the
/// noiseless update bit for bit.
fn propagate_weights(weights: &[f64], mass: f64, model: &MarkovModel) -> Belief {
    let n = model.num_states();
    let mut out = vec![0.0; n];
    for (x, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        for (y, o) in out.iter_mut().enumerate() {
            *o += model.prob(x, y) * w;
        }
    }
    for o in out.iter_mut() {
        *o /= mass;
    }
    Belief::from_normalized(out)
}

/// Noiseless filter: the belief about `X_{t+1}` after observing `q_t = symbol`.
pub fn filter_update(
    pi: &Belief,
    q: &Quantizer,
    symbol: usize,
    model: &MarkovModel,
) -> Result<Belief> {
    let weights: Vec<f64> = (0..pi.len())
        .map(|x| if q.apply(x) == symbol { pi[x] } else { 0.0 })
        .collect();
    let mass = symbol_probability(pi, q, symbol);
    if mass <= ZERO_PROB_TOL {
        return Err(Error::ZeroProbabilitySymbol { symbol });
    }
    Ok(propagate_weights(&weights, mass, model))
}

/// Joint weights `π(x) T(q' | Q(x))` of the current symbol and the received
/// output.
pub fn channel_likelihood_weights(
    pi: &Belief,
    q: &Quantizer,
    output: usize,
    channel: &Channel,
) -> Vec<f64> {
    (0..pi.len())
        .map(|x| pi[x] * channel.prob(q.apply(x), output))
        .collect()
}

/// `P(q' | π, Q) = Σ_x π(x) T(q' | Q(x))`.
pub fn output_probability(pi: &Belief, q: &Quantizer, output: usize, channel: &Channel) -> f64 {
    channel_likelihood_weights(pi, q, output, channel)
        .iter()
        .sum()
}

/// Filter for a noisy channel with feedback: the belief about `X_{t+1}` after
/// the decoder receives `q'_t = output`.
pub fn noisy_filter_update(
    pi: &Belief,
    q: &Quantizer,
    output: usize,
    model: &MarkovModel,
    channel: &Channel,
) -> Result<Belief> {
    let weights = channel_likelihood_weights(pi, q, output, channel);
    let mass: f64 = weights.iter().sum();
    if mass <= ZERO_PROB_TOL {
        return Err(Error::ZeroProbabilitySymbol { symbol: output });
    }
    Ok(propagate_weights(&weights, mass, model))
}

/// L₁ Wasserstein distance with states embedded as consecutive integers,
/// via the CDF formula `Σ_k |F_μ(k) - F_ζ(k)|`.
pub fn wasserstein1(mu: &Belief, zeta: &Belief) -> Result<f64> {
    if mu.len() != zeta.len() {
        return Err(Error::DimensionMismatch {
            expected: mu.len(),
            found: zeta.len(),
            context: "wasserstein operands",
        });
    }
    let (mut fm, mut fz, mut dist) = (0.0, 0.0, 0.0);
    for k in 0..mu.len() - 1 {
        fm += mu[k];
        fz += zeta[k];
        dist += f64::abs(fm - fz);
    }
    Ok(dist)
}

/// All beliefs with entries in `{0, 1/n, .., 1}`, in lexicographic order.
#[derive(Debug, Clone)]
pub struct BeliefGrid {
    resolution: usize,
    num_states: usize,
    points: Vec<Belief>,
    // binom[a][b] = C(a, b) for a <= n + |X|, b <= |X|
    binom: Vec<Vec<usize>>,
}

impl BeliefGrid {
    pub fn new(num_states: usize, resolution: usize) -> Result<Self> {
        if num_states == 0 || resolution == 0 {
            return Err(Error::InvalidArgument(
                "grid needs at least one state and resolution >= 1".into(),
            ));
        }
        let rows = resolution + num_states + 1;
        let mut binom = vec![vec![0usize; num_states + 1]; rows];
        for a in 0..rows {
            binom[a][0] = 1;
            for b in 1..=num_states.min(a) {
                binom[a][b] = binom[a - 1][b - 1].saturating_add(if b < a { binom[a - 1][b] } else { 0 });
            }
        }
        let count = binom[resolution + num_states - 1][num_states - 1];
        let mut points = Vec::with_capacity(count);
        let mut counts = vec![0usize; num_states];
        Self::enumerate(0, resolution, &mut counts, resolution, &mut points);
        debug_assert_eq!(points.len(), count);
        Ok(Self {
            resolution,
            num_states,
            points,
            binom,
        })
    }

    fn enumerate(
        pos: usize,
        remaining: usize,
        counts: &mut Vec<usize>,
        n: usize,
        out: &mut Vec<Belief>,
    ) {
        if pos == counts.len() - 1 {
            counts[pos] = remaining;
            out.push(Belief::from_normalized(
                counts.iter().map(|&c| c as f64 / n as f64).collect(),
            ));
            return;
        }
        for c in 0..=remaining {
            counts[pos] = c;
            Self::enumerate(pos + 1, remaining - c, counts, n, out);
        }
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Belief] {
        &self.points
    }

    pub fn point(&self, index: usize) -> &Belief {
        &self.points[index]
    }

    /// ρ₁ covering radius bound `|X| / (2n)`.
    pub fn covering_radius(&self) -> f64 {
        self.num_states as f64 / (2.0 * self.resolution as f64)
    }

    /// Lexicographic rank of a count vector summing to `n`.
    pub fn index_of_counts(&self, counts: &[usize]) -> usize {
        let k = self.num_states;
        let mut rank = 0;
        let mut remaining = self.resolution;
        for (i, &c) in counts.iter().enumerate().take(k - 1) {
            // vectors of length m = k-1-i after this slot: Σ_{v<c} C(r-v+m-1, m-1)
            //   = C(r+m, m) - C(r-c+m, m)
            let m = k - 1 - i;
            rank += self.binom[remaining + m][m] - self.binom[remaining - c + m][m];
            remaining -= c;
        }
        rank
    }

    /// Index of a grid point nearest to `pi` in ρ₁.
    ///
    /// Grid points are exactly the CDFs with values in `{0, 1/n, .., 1}`, and ρ₁
    /// is the L₁ distance between CDFs, so rounding each CDF value to the
    /// nearest multiple of `1/n` is optimal. Exact half-way ties round down,
    /// which selects the lexicographically smallest nearest point.
    pub fn project(&self, pi: &Belief) -> usize {
        debug_assert_eq!(pi.len(), self.num_states);
        let n = self.resolution as f64;
        let k = self.num_states;
        let mut counts = Vec::with_capacity(k);
        let mut cdf = 0.0;
        let mut prev = 0usize;
        for x in 0..k - 1 {
            cdf += pi[x];
            let scaled = cdf * n;
            let lo = scaled.floor();
            let level = if scaled - lo > 0.5 { lo + 1.0 } else { lo };
            let level = (level.max(0.0) as usize).min(self.resolution).max(prev);
            counts.push(level - prev);
            prev = level;
        }
        counts.push(self.resolution - prev);
        self.index_of_counts(&counts)
    }
}
