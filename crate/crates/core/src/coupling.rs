//! Coupling constants for the Lipschitz bound on discounted values.
//!
//! Two independent copies of the chain are run until both sit in a reference
//! state `b` at the same time. `K₁` is the worst-case expected coupling time
//! over starting pairs and `K = 2 K₁ ‖d‖∞ |X|` bounds the finite-horizon gap.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::belief::{wasserstein1, BeliefGrid};
use crate::codec::derive_seed;
use crate::error::{Error, Result};
use crate::quantizer::DistortionSpec;
use crate::solver::{discounted_value_iteration, GridMdp};
use crate::source::{is_aperiodic, is_irreducible, sample_index, MarkovModel};

/// Residual bound required of the linear solve.
pub const SOLVE_RESIDUAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingReport {
    /// `E[τ | X₀ = x, Y₀ = y]` for the chosen reference state.
    pub expected_tau: Vec<Vec<f64>>,
    pub k1: f64,
    pub reference_state: usize,
    pub k: f64,
    /// `K₁` obtained with each candidate reference state.
    pub k1_per_reference: Vec<f64>,
    pub distortion_sup: f64,
    pub num_states: usize,
}

impl CouplingReport {
    /// `K₁ ‖d‖∞`, the Lipschitz constant of discounted values in ρ₁.
    pub fn lipschitz(&self) -> f64 {
        self.k1 * self.distortion_sup
    }

    /// Value error budget from projecting onto a grid of resolution `n`:
    /// `K₁ ‖d‖∞ |X| / (2n)`.
    pub fn grid_slack(&self, resolution: usize) -> f64 {
        self.lipschitz() * self.num_states as f64 / (2.0 * resolution as f64)
    }

    /// Matrix as CSV (header `x,y_1..y_n`, 1-based states).
    pub fn tau_csv(&self) -> String {
        let n = self.num_states;
        let mut out = String::from("x");
        for y in 1..=n {
            out.push_str(&format!(",y_{y}"));
        }
        out.push('\n');
        for (x, row) in self.expected_tau.iter().enumerate() {
            out.push_str(&(x + 1).to_string());
            for v in row {
                out.push_str(&format!(",{}", crate::fmt_sig(*v)));
            }
            out.push('\n');
        }
        out
    }
}

fn require_ergodic(model: &MarkovModel) -> Result<()> {
    if is_irreducible(model) && is_aperiodic(model) {
        Ok(())
    } else {
        Err(Error::NotIrreducibleAperiodic)
    }
}

/// Solves `k(b,b) = 0`, `k(s) = 1 + Σ_{s'} (P⊗P)(s'|s) k(s')` over the
/// `|X|² - 1` other product states.
pub fn expected_coupling_times(model: &MarkovModel, reference: usize) -> Result<Vec<Vec<f64>>> {
    require_ergodic(model)?;
    let n = model.num_states();
    if reference >= n {
        return Err(Error::InvalidArgument(format!("reference state {reference} out of range")));
    }
    let target = reference * n + reference;
    // unknown index for product state s = x*n + y, skipping the target
    let slot = |s: usize| if s < target { s } else { s - 1 };
    let m = n * n - 1;
    let mut a = DMatrix::<f64>::identity(m, m);
    let rhs = DVector::<f64>::from_element(m, 1.0);
    for s in (0..n * n).filter(|&s| s != target) {
        let (x, y) = (s / n, s % n);
        for x2 in 0..n {
            for y2 in 0..n {
                let s2 = x2 * n + y2;
                if s2 == target {
                    continue;
                }
                a[(slot(s), slot(s2))] -= model.prob(x, x2) * model.prob(y, y2);
            }
        }
    }
    let sol = a.clone().lu().solve(&rhs).ok_or(Error::NotIrreducibleAperiodic)?;
    let residual = (&a * &sol - &rhs).amax();
    if !residual.is_finite() || residual > SOLVE_RESIDUAL_TOL {
        return Err(Error::NotIrreducibleAperiodic);
    }
    let mut out = vec![vec![0.0; n]; n];
    for s in (0..n * n).filter(|&s| s != target) {
        out[s / n][s % n] = sol[slot(s)];
    }
    Ok(out)
}

fn matrix_max(m: &[Vec<f64>]) -> f64 {
    m.iter().flatten().fold(0.0, |a, &b| a.max(b))
}

/// Reference state with the smallest `K₁`; near-ties go to the lower index.
pub fn choose_reference_state(model: &MarkovModel) -> Result<(usize, f64)> {
    let per: Vec<f64> = (0..model.num_states())
        .map(|b| expected_coupling_times(model, b).map(|m| matrix_max(&m)))
        .collect::<Result<_>>()?;
    Ok(best_reference(&per))
}

fn best_reference(per: &[f64]) -> (usize, f64) {
    let mut best = (0, per[0]);
    for (b, &k1) in per.iter().enumerate().skip(1) {
        if k1 < best.1 * (1.0 - 1e-12) {
            best = (b, k1);
        }
    }
    best
}

/// Full coupling report for `model` and distortion `d`.
pub fn coupling_report(model: &MarkovModel, d: &DistortionSpec) -> Result<CouplingReport> {
    let n = model.num_states();
    let matrices: Vec<Vec<Vec<f64>>> = (0..n)
        .map(|b| expected_coupling_times(model, b))
        .collect::<Result<_>>()?;
    let per: Vec<f64> = matrices.iter().map(|m| matrix_max(m)).collect();
    let (b, k1) = best_reference(&per);
    Ok(CouplingReport {
        expected_tau: matrices[b].clone(),
        k1,
        reference_state: b,
        k: 2.0 * k1 * d.sup_norm() * n as f64,
        k1_per_reference: per,
        distortion_sup: d.sup_norm(),
        num_states: n,
    })
}

/// Largest excess `|J^β(μ) - J^β(ζ)| - K₁ ‖d‖∞ ρ₁(μ, ζ)` over grid pairs.
/// Non-positive means the Lipschitz bound holds on every pair.
pub fn verify_lipschitz(
    mdp: &GridMdp,
    beta: f64,
    tol: f64,
    k1: f64,
    pairs: &[(usize, usize)],
) -> Result<f64> {
    let sol = discounted_value_iteration(mdp, beta, tol, 100_000_000)?;
    let lip = k1 * mdp.problem().distortion().sup_norm();
    lipschitz_excess(mdp.grid(), &sol.values.values, lip, pairs)
}

pub(crate) fn lipschitz_excess(
    grid: &BeliefGrid,
    values: &[f64],
    lip: f64,
    pairs: &[(usize, usize)],
) -> Result<f64> {
    let mut worst = f64::NEG_INFINITY;
    for &(i, j) in pairs {
        let rho = wasserstein1(grid.point(i), grid.point(j))?;
        worst = worst.max((values[i] - values[j]).abs() - lip * rho);
    }
    Ok(worst)
}

/// Monte Carlo estimate of `E[τ]` from one starting pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauEstimate {
    pub x: usize,
    pub y: usize,
    pub mean: f64,
    pub std_error: f64,
}

/// Simulates the two independent copies from each pair in `pairs`.
///
/// The second copy is driven by its own i.i.d. uniforms through the inverse
/// CDF of its current row, `Y_t = F(Y_{t-1}, W_t)`.
pub fn monte_carlo_tau(
    model: &MarkovModel,
    reference: usize,
    pairs: &[(usize, usize)],
    runs: usize,
    seed: u64,
) -> Result<Vec<TauEstimate>> {
    if runs == 0 {
        return Err(Error::InvalidArgument("need at least one run".into()));
    }
    let n = model.num_states();
    if reference >= n || pairs.iter().any(|&(x, y)| x >= n || y >= n) {
        return Err(Error::InvalidArgument("state out of range".into()));
    }
    // guards against chains where (b, b) is unreachable
    const MAX_STEPS: u64 = 100_000_000;
    pairs
        .par_iter()
        .enumerate()
        .map(|(pi, &(x0, y0))| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, pi as u64));
            let (mut sum, mut sum_sq) = (0.0, 0.0);
            for _ in 0..runs {
                let (mut x, mut y) = (x0, y0);
                let mut tau = 0u64;
                while !(x == reference && y == reference) {
                    x = sample_index(model.row(x), rng.gen::<f64>());
                    y = sample_index(model.row(y), rng.gen::<f64>());
                    tau += 1;
                    if tau > MAX_STEPS {
                        return Err(Error::NotIrreducibleAperiodic);
                    }
                }
                let t = tau as f64;
                sum += t;
                sum_sq += t * t;
            }
            let r = runs as f64;
            let mean = sum / r;
            let var = if runs > 1 {
                ((sum_sq - r * mean * mean) / (r - 1.0)).max(0.0)
            } else {
                0.0
            };
            Ok(TauEstimate {
                x: x0,
                y: y0,
                mean,
                std_error: (var / r).sqrt(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source::Belief;

    fn model(p: Vec<Vec<f64>>) -> MarkovModel {
        let n = p.len();
        MarkovModel::new(p, Belief::uniform(n)).unwrap()
    }

    #[test]
    fn iid_uniform_is_geometric() {
        let m = model(vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
        let k = expected_coupling_times(&m, 0).unwrap();
        assert_eq!(k[0][0], 0.0);
        for (x, y) in [(0, 1), (1, 0), (1, 1)] {
            assert!((k[x][y] - 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn reference_diagonal_is_zero() {
        let m = model(vec![
            vec![0.6, 0.3, 0.1],
            vec![0.2, 0.5, 0.3],
            vec![0.3, 0.3, 0.4],
        ]);
        for b in 0..3 {
            let k = expected_coupling_times(&m, b).unwrap();
            assert_eq!(k[b][b], 0.0);
            assert!(k.iter().flatten().all(|v| v.is_finite() && *v >= 0.0));
        }
    }

    #[test]
    fn symmetric_chain_ties_to_first_state() {
        let m = model(vec![vec![0.8, 0.2], vec![0.2, 0.8]]);
        let (b, k1) = choose_reference_state(&m).unwrap();
        assert_eq!(b, 0);
        let other = matrix_max(&expected_coupling_times(&m, 1).unwrap());
        assert!((k1 - other).abs() < 1e-9);
    }

    #[test]
    fn periodic_chain_is_rejected() {
        let m = model(vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert_eq!(expected_coupling_times(&m, 0), Err(Error::NotIrreducibleAperiodic));
    }

    #[test]
    fn report_constants() {
        let m = model(vec![vec![0.9, 0.1], vec![0.2, 0.8]]);
        let d = DistortionSpec::new(vec![vec![0.0, 2.0], vec![1.5, 0.0]]).unwrap();
        let r = coupling_report(&m, &d).unwrap();
        assert_eq!(r.k, 2.0 * r.k1 * 2.0 * 2.0);
        assert_eq!(r.k1, matrix_max(&r.expected_tau));
        assert_eq!(r.k1, r.k1_per_reference[r.reference_state]);
        assert!(r.k1_per_reference.iter().all(|&k| k >= r.k1));
        let csv = r.tau_csv();
        assert!(csv.starts_with("x,y_1,y_2\n1,"));
    }

    #[test]
    fn mc_from_reference_pair_is_zero() {
        let m = model(vec![vec![0.9, 0.1], vec![0.2, 0.8]]);
        let est = monte_carlo_tau(&m, 1, &[(1, 1)], 100, 3).unwrap();
        assert_eq!(est[0].mean, 0.0);
        assert_eq!(est[0].std_error, 0.0);
    }
}
