//! Brute-force ground truth for tiny finite-horizon instances.
//!
//! Enumerates every encoder of the form `q_t = η_t(q_{[0,t-1]}, X_t)` and
//! pairs each with its optimal decoder, so the minimum is taken over the
//! whole zero-delay policy class without any belief-state reasoning.
//!
//! Histories `q_{[0,t-1]}` are indexed as base-`M` numbers with `q_0` most
//! significant; encoder tables are laid out history-major:
//! `η_t[h * |X| + x]`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantizer::DistortionSpec;
use crate::source::MarkovModel;

/// Default cap on the number of complete encoder policies enumerated.
pub const DEFAULT_SEARCH_CAP: f64 = 1e8;

/// Per-stage encoder and decoder lookup tables.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OraclePolicy {
    pub num_states: usize,
    pub num_symbols: usize,
    /// `encoders[t]` has `M^t · |X|` entries.
    pub encoders: Vec<Vec<usize>>,
    /// `decoders[t]` maps a history of length `t+1` to a reproduction; `M^{t+1}` entries.
    pub decoders: Vec<Vec<usize>>,
}

impl OraclePolicy {
    fn check(&self, horizon: usize) -> Result<()> {
        let (n, m) = (self.num_states, self.num_symbols);
        for t in 0..horizon {
            let enc = self.encoders.get(t).map_or(0, Vec::len);
            let expected = m.pow(t as u32) * n;
            if enc != expected {
                return Err(Error::IncompleteTable {
                    stage: t,
                    expected,
                    found: enc,
                });
            }
            let dec = self.decoders.get(t).map_or(0, Vec::len);
            let expected = m.pow(t as u32 + 1);
            if dec != expected {
                return Err(Error::IncompleteTable {
                    stage: t,
                    expected,
                    found: dec,
                });
            }
        }
        Ok(())
    }
}

/// Number of complete encoder policies `Π_t M^(M^t |X|)`.
pub fn search_space_size(num_states: usize, num_symbols: usize, horizon: usize) -> f64 {
    let exponent: f64 = (0..horizon)
        .map(|t| (num_symbols as f64).powi(t as i32) * num_states as f64)
        .sum();
    (num_symbols as f64).powf(exponent)
}

/// Minimum of `min_x̂ Σ_x w(x) d(x, x̂)` with ties to the smallest index.
fn cell_cost(weights: &[(usize, f64)], d: &DistortionSpec) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for xhat in 0..d.reproduction_size() {
        let mut acc = 0.0;
        for &(x, w) in weights {
            acc += w * d.get(x, xhat);
        }
        if acc < best.1 {
            best = (xhat, acc);
        }
    }
    if weights.is_empty() {
        (0, 0.0)
    } else {
        best
    }
}

struct Search<'a> {
    model: &'a MarkovModel,
    d: &'a DistortionSpec,
    m: usize,
    n: usize,
    horizon: usize,
}

/// Best (value, encoder tables) found below a node; ties keep the earlier
/// (lexicographically smaller) tables.
type Best = Option<(f64, Vec<Vec<usize>>)>;

impl Search<'_> {
    fn table_count(&self, t: usize) -> usize {
        self.m.pow((self.m.pow(t as u32) * self.n) as u32)
    }

    /// Table number `k` as digits, entry 0 most significant.
    fn decode_table(&self, t: usize, mut k: usize) -> Vec<usize> {
        let len = self.m.pow(t as u32) * self.n;
        let mut table = vec![0; len];
        for slot in table.iter_mut().rev() {
            *slot = k % self.m;
            k /= self.m;
        }
        table
    }

    /// Expected stage distortion of `table` given the joint law of
    /// (history, current state).
    fn stage_cost(&self, t: usize, joint: &[f64], table: &[usize]) -> f64 {
        let mut total = 0.0;
        let mut cell = Vec::with_capacity(self.n);
        for h in 0..self.m.pow(t as u32) {
            for q in 0..self.m {
                cell.clear();
                for x in 0..self.n {
                    if table[h * self.n + x] == q {
                        cell.push((x, joint[h * self.n + x]));
                    }
                }
                total += cell_cost(&cell, self.d).1;
            }
        }
        total
    }

    fn next_joint(&self, t: usize, joint: &[f64], table: &[usize]) -> Vec<f64> {
        let hist = self.m.pow(t as u32);
        let mut next = vec![0.0; hist * self.m * self.n];
        for h in 0..hist {
            for x in 0..self.n {
                let w = joint[h * self.n + x];
                let q = table[h * self.n + x];
                let base = (h * self.m + q) * self.n;
                for y in 0..self.n {
                    next[base + y] += w * self.model.prob(x, y);
                }
            }
        }
        next
    }

    fn descend(&self, t: usize, joint: &[f64], acc: f64, prefix: &mut Vec<Vec<usize>>, best: &mut Best) {
        for k in 0..self.table_count(t) {
            let table = self.decode_table(t, k);
            let value = acc + self.stage_cost(t, joint, &table);
            if t + 1 == self.horizon {
                if best.as_ref().is_none_or(|(b, _)| value < *b) {
                    let mut tables = prefix.clone();
                    tables.push(table);
                    *best = Some((value, tables));
                }
            } else {
                let next = self.next_joint(t, joint, &table);
                prefix.push(table);
                self.descend(t + 1, &next, value, prefix, best);
                prefix.pop();
            }
        }
    }

    fn decoders(&self, encoders: &[Vec<usize>]) -> Vec<Vec<usize>> {
        let mut joint = self.model.initial().probs().to_vec();
        let mut out = Vec::with_capacity(self.horizon);
        for (t, table) in encoders.iter().enumerate() {
            let hist = self.m.pow(t as u32);
            let mut dec = vec![0; hist * self.m];
            for h in 0..hist {
                for q in 0..self.m {
                    let cell: Vec<(usize, f64)> = (0..self.n)
                        .filter(|&x| table[h * self.n + x] == q)
                        .map(|x| (x, joint[h * self.n + x]))
                        .collect();
                    let mass: f64 = cell.iter().map(|c| c.1).sum();
                    dec[h * self.m + q] = if mass > 0.0 { cell_cost(&cell, self.d).0 } else { 0 };
                }
            }
            out.push(dec);
            joint = self.next_joint(t, &joint, table);
        }
        out
    }
}

/// Exact minimum of `(1/T) E[Σ_t d(X_t, X̂_t)]` over all zero-delay encoders
/// with `M` symbols, together with one minimizing policy.
pub fn exhaustive_min(
    model: &MarkovModel,
    d: &DistortionSpec,
    num_symbols: usize,
    horizon: usize,
    cap: f64,
) -> Result<(f64, OraclePolicy)> {
    if horizon == 0 || num_symbols == 0 {
        return Err(Error::InvalidArgument("need T >= 1 and M >= 1".into()));
    }
    if d.num_states() != model.num_states() {
        return Err(Error::DimensionMismatch {
            expected: model.num_states(),
            found: d.num_states(),
            context: "distortion rows vs source alphabet",
        });
    }
    let n = model.num_states();
    let size = search_space_size(n, num_symbols, horizon);
    if !(size <= cap) {
        return Err(Error::SearchSpaceTooLarge { size, cap });
    }
    let search = Search {
        model,
        d,
        m: num_symbols,
        n,
        horizon,
    };
    let joint0 = model.initial().probs().to_vec();
    // first-stage tables in parallel; reduction keeps the earliest minimum
    let best = (0..search.table_count(0))
        .into_par_iter()
        .map(|k| {
            let table = search.decode_table(0, k);
            let value = search.stage_cost(0, &joint0, &table);
            if horizon == 1 {
                return Some((value, vec![table]));
            }
            let next = search.next_joint(0, &joint0, &table);
            let mut prefix = vec![table];
            let mut best = None;
            search.descend(1, &next, value, &mut prefix, &mut best);
            best
        })
        .collect::<Vec<Best>>()
        .into_iter()
        .flatten()
        .fold(None::<(f64, Vec<Vec<usize>>)>, |acc, cand| match acc {
            Some(a) if a.0 <= cand.0 => Some(a),
            _ => Some(cand),
        })
        .expect("at least one encoder table");
    let (total, encoders) = best;
    let decoders = search.decoders(&encoders);
    Ok((
        total / horizon as f64,
        OraclePolicy {
            num_states: n,
            num_symbols,
            encoders,
            decoders,
        },
    ))
}

/// Exact average distortion of `policy` by enumerating all `|X|^T` source
/// paths.
pub fn evaluate_oracle_policy(
    policy: &OraclePolicy,
    model: &MarkovModel,
    d: &DistortionSpec,
    horizon: usize,
) -> Result<f64> {
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be >= 1".into()));
    }
    policy.check(horizon)?;
    let n = model.num_states();
    if policy.num_states != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: policy.num_states,
            context: "oracle policy alphabet",
        });
    }
    let m = policy.num_symbols;
    let mut total = 0.0;
    let paths = n.pow(horizon as u32);
    for code in 0..paths {
        // x_0 is the most significant digit
        let mut path = vec![0; horizon];
        let mut c = code;
        for slot in path.iter_mut().rev() {
            *slot = c % n;
            c /= n;
        }
        let mut prob = model.initial()[path[0]];
        for t in 1..horizon {
            prob *= model.prob(path[t - 1], path[t]);
        }
        if prob == 0.0 {
            continue;
        }
        let mut hist = 0;
        let mut dist = 0.0;
        for (t, &x) in path.iter().enumerate() {
            let q = policy.encoders[t][hist * n + x];
            if q >= m {
                return Err(Error::InvalidArgument(format!("encoder symbol {q} out of range")));
            }
            hist = hist * m + q;
            dist += d.get(x, policy.decoders[t][hist]);
        }
        total += prob * dist;
    }
    Ok(total / horizon as f64)
}
