//! Finite-state Markov sources.
//!
//! States are `0..num_states` internally; files and traces print them as
//! `1..=num_states`. The integer embedding matters for the Wasserstein metric
//! in [`crate::belief`].

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Tolerance used when validating user-supplied stochastic rows and vectors.
pub const STOCHASTIC_TOL: f64 = 1e-9;

/// A probability vector over the source alphabet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Belief {
    probs: Vec<f64>,
}

impl Belief {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidBelief("empty vector".into()));
        }
        for (i, &p) in probs.iter().enumerate() {
            if !p.is_finite() || p < 0.0 {
                return Err(Error::InvalidBelief(format!("entry {i} is {p}")));
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > STOCHASTIC_TOL {
            return Err(Error::InvalidBelief(format!("entries sum to {sum}")));
        }
        Ok(Self { probs })
    }

    /// Wraps a vector already known to be a distribution (filter outputs,
    /// grid points). Only checked in debug builds.
    pub(crate) fn from_normalized(probs: Vec<f64>) -> Self {
        debug_assert!(
            probs.iter().all(|p| *p >= 0.0) && (probs.iter().sum::<f64>() - 1.0).abs() < 1e-9,
            "not a distribution: {probs:?}"
        );
        Self { probs }
    }

    pub fn point_mass(num_states: usize, state: usize) -> Self {
        let mut probs = vec![0.0; num_states];
        probs[state] = 1.0;
        Self { probs }
    }

    pub fn uniform(num_states: usize) -> Self {
        Self {
            probs: vec![1.0 / num_states as f64; num_states],
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// One step of the chain without observation: `πP`.
    pub fn propagate(&self, model: &MarkovModel) -> Belief {
        let n = model.num_states();
        let mut out = vec![0.0; n];
        for (x, &px) in self.probs.iter().enumerate() {
            for (y, o) in out.iter_mut().enumerate() {
                *o += model.prob(x, y) * px;
            }
        }
        Belief { probs: out }
    }

    /// Bit pattern of the entries; used as an exact hash key.
    pub(crate) fn bit_key(&self) -> Vec<u64> {
        self.probs.iter().map(|p| p.to_bits()).collect()
    }
}

impl TryFrom<Vec<f64>> for Belief {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Belief::new(v)
    }
}

impl From<Belief> for Vec<f64> {
    fn from(b: Belief) -> Self {
        b.probs
    }
}

impl std::ops::Index<usize> for Belief {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.probs[i]
    }
}

/// A time-homogeneous Markov chain `(π₀, P)` on `{0, .., num_states-1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovModel {
    transition: Vec<Vec<f64>>,
    initial: Belief,
}

impl MarkovModel {
    /// Builds and validates a model.
    pub fn new(transition: Vec<Vec<f64>>, initial: Belief) -> Result<Self> {
        let model = Self {
            transition,
            initial,
        };
        validate(&model)?;
        Ok(model)
    }

    /// Model started from its invariant distribution.
    pub fn stationary(transition: Vec<Vec<f64>>) -> Result<Self> {
        let n = transition.len();
        let mut model = Self::new(transition, Belief::uniform(n.max(1)))?;
        model.initial = stationary_distribution(&model)?;
        Ok(model)
    }

    /// Same chain with a different initial distribution.
    pub fn with_initial(&self, initial: Belief) -> Result<Self> {
        Self::new(self.transition.clone(), initial)
    }

    pub fn num_states(&self) -> usize {
        self.transition.len()
    }

    pub fn initial(&self) -> &Belief {
        &self.initial
    }

    pub fn transition(&self) -> &[Vec<f64>] {
        &self.transition
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.transition[x]
    }

    /// `P(y | x)`.
    #[inline]
    pub fn prob(&self, x: usize, y: usize) -> f64 {
        self.transition[x][y]
    }

    fn positive_successors(&self) -> Vec<Vec<usize>> {
        self.transition
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(_, &p)| p > 0.0)
                    .map(|(y, _)| y)
                    .collect()
            })
            .collect()
    }
}

/// Checks that `transition` is square and row-stochastic and that `initial`
/// is a distribution of matching length.
pub fn validate(model: &MarkovModel) -> Result<()> {
    let n = model.transition.len();
    if n == 0 {
        return Err(Error::InvalidArgument("model has no states".into()));
    }
    for (r, row) in model.transition.iter().enumerate() {
        if row.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: row.len(),
                context: "transition row length",
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
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > STOCHASTIC_TOL {
            return Err(Error::NonStochasticMatrix { row: r, sum });
        }
    }
    if model.initial.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: model.initial.len(),
            context: "initial distribution length",
        });
    }
    Ok(())
}

fn reachable(adj: &[Vec<usize>], start: usize) -> Vec<bool> {
    let mut seen = vec![false; adj.len()];
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(u) = stack.pop() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    seen
}

/// True iff the positive-transition graph is strongly connected.
pub fn is_irreducible(model: &MarkovModel) -> bool {
    let succ = model.positive_successors();
    let n = succ.len();
    let mut pred = vec![Vec::new(); n];
    for (u, vs) in succ.iter().enumerate() {
        for &v in vs {
            pred[v].push(u);
        }
    }
    reachable(&succ, 0).into_iter().all(|b| b) && reachable(&pred, 0).into_iter().all(|b| b)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// True iff every state has return-time gcd 1.
///
/// Works per strongly connected class: BFS levels inside the class give the
/// period as the gcd of `level[u] + 1 - level[v]` over internal edges. A state
/// that lies on no cycle never returns and makes the chain not aperiodic.
pub fn is_aperiodic(model: &MarkovModel) -> bool {
    let succ = model.positive_successors();
    let n = succ.len();
    let mut pred = vec![Vec::new(); n];
    for (u, vs) in succ.iter().enumerate() {
        for &v in vs {
            pred[v].push(u);
        }
    }
    let mut class = vec![usize::MAX; n];
    for s in 0..n {
        if class[s] != usize::MAX {
            continue;
        }
        let fwd = reachable(&succ, s);
        let bwd = reachable(&pred, s);
        for v in 0..n {
            if fwd[v] && bwd[v] {
                class[v] = s;
            }
        }
    }
    let mut checked = vec![false; n];
    for root in 0..n {
        if checked[class[root]] {
            continue;
        }
        checked[class[root]] = true;
        let c = class[root];
        let mut level = vec![usize::MAX; n];
        level[root] = 0;
        let mut queue = VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            for &v in &succ[u] {
                if class[v] == c && level[v] == usize::MAX {
                    level[v] = level[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        let mut period = 0;
        for u in (0..n).filter(|&u| class[u] == c) {
            for &v in succ[u].iter().filter(|&&v| class[v] == c) {
                let diff = (level[u] + 1).abs_diff(level[v]);
                period = gcd(period, diff);
            }
        }
        // period 0: no internal edge, so the state never returns
        if period != 1 {
            return false;
        }
    }
    true
}

/// Unique invariant distribution of an irreducible chain, from the linear
/// system `(Pᵀ - I)π = 0` with one equation replaced by `Σπ = 1`.
pub fn stationary_distribution(model: &MarkovModel) -> Result<Belief> {
    if !is_irreducible(model) {
        return Err(Error::NotIrreducible);
    }
    let n = model.num_states();
    let mut a = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] = model.prob(j, i) - if i == j { 1.0 } else { 0.0 };
        }
    }
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(n);
    rhs[n - 1] = 1.0;
    let sol = a.lu().solve(&rhs).ok_or(Error::NotIrreducible)?;
    let mut probs: Vec<f64> = sol.iter().map(|v| v.max(0.0)).collect();
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    Ok(Belief::from_normalized(probs))
}

/// Inverse-CDF draw from a probability row. `u` is uniform on `[0, 1)`.
pub(crate) fn sample_index(row: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, &p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // rounding left the cumulative sum just below 1: take the last positive entry
    row.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// A length-`horizon` path with `X₀ ~ π₀`, reproducible from `seed`.
pub fn sample_path(model: &MarkovModel, horizon: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut path = Vec::with_capacity(horizon);
    if horizon == 0 {
        return path;
    }
    let mut x = sample_index(model.initial.probs(), rng.gen::<f64>());
    path.push(x);
    for _ in 1..horizon {
        x = sample_index(model.row(x), rng.gen::<f64>());
        path.push(x);
    }
    path
}

fn random_simplex_point(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    // Dirichlet(1,..,1) via normalized exponentials, floored away from zero
    let raw: Vec<f64> = (0..n)
        .map(|_| -(1.0 - rng.gen::<f64>()).ln() + 0.05)
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// A chain with strictly positive transition entries (hence irreducible and
/// aperiodic) and a random initial belief, reproducible from `seed`.
pub fn random_chain(num_states: usize, seed: u64) -> Result<MarkovModel> {
    if num_states == 0 {
        return Err(Error::InvalidArgument("need at least one state".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..num_states)
        .map(|_| random_simplex_point(num_states, &mut rng))
        .collect();
    let initial = Belief::new(random_simplex_point(num_states, &mut rng))?;
    MarkovModel::new(rows, initial)
}
