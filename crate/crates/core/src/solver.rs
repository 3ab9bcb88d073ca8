//! Dynamic programming on the belief MDP.
//!
//! The state is the decoder's belief `π_t`, the action a quantizer `Q_t`, the
//! cost `c(π, Q)` and the transition the filter. Three solvers are provided:
//!
//! - [`finite_horizon_dp`]: exact backward recursion on the tree of beliefs
//!   reachable from `π₀` (no discretization).
//! - [`discounted_value_iteration`]: value iteration on a [`BeliefGrid`]
//!   with nearest-point projection of child beliefs.
//! - [`solve_average_cost`]: relative value iteration (or the vanishing
//!   discount limit) on the same grid, producing a [`CanonicalTriplet`].
//!
//! All grid sweeps are parallel over grid points and reduce in index order, so
//! results do not depend on the worker count.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::belief::{
    channel_likelihood_weights, filter_update, symbol_probability, BeliefGrid, Channel,
    ZERO_PROB_TOL,
};
use crate::error::{Error, Result};
use crate::policy::{CodingPolicy, StationaryPolicy};
use crate::quantizer::{
    enumerate_quantizers, noisy_stage_cost_unchecked, stage_cost_unchecked, DedupMode,
    DistortionSpec, Quantizer,
};
use crate::source::{is_aperiodic, is_irreducible, stationary_distribution, Belief, MarkovModel};

/// Source, distortion and channel of one coding problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    model: MarkovModel,
    distortion: DistortionSpec,
    num_symbols: usize,
    channel: Option<Channel>,
}

impl Problem {
    /// Noiseless channel with `num_symbols` symbols.
    pub fn noiseless(model: MarkovModel, distortion: DistortionSpec, num_symbols: usize) -> Result<Self> {
        Self::new(model, distortion, num_symbols, None)
    }

    /// Noisy channel with feedback; the channel input alphabet fixes `M`.
    pub fn noisy(model: MarkovModel, distortion: DistortionSpec, channel: Channel) -> Result<Self> {
        let m = channel.input_size();
        Self::new(model, distortion, m, Some(channel))
    }

    pub fn new(
        model: MarkovModel,
        distortion: DistortionSpec,
        num_symbols: usize,
        channel: Option<Channel>,
    ) -> Result<Self> {
        if num_symbols == 0 {
            return Err(Error::InvalidArgument("M must be >= 1".into()));
        }
        if distortion.num_states() != model.num_states() {
            return Err(Error::DimensionMismatch {
                expected: model.num_states(),
                found: distortion.num_states(),
                context: "distortion rows vs source alphabet",
            });
        }
        if let Some(ch) = &channel {
            if ch.input_size() != num_symbols {
                return Err(Error::DimensionMismatch {
                    expected: num_symbols,
                    found: ch.input_size(),
                    context: "channel inputs vs M",
                });
            }
        }
        Ok(Self {
            model,
            distortion,
            num_symbols,
            channel,
        })
    }

    pub fn model(&self) -> &MarkovModel {
        &self.model
    }

    pub fn distortion(&self) -> &DistortionSpec {
        &self.distortion
    }

    pub fn num_symbols(&self) -> usize {
        self.num_symbols
    }

    pub fn channel(&self) -> Option<&Channel> {
        self.channel.as_ref()
    }

    pub fn num_states(&self) -> usize {
        self.model.num_states()
    }

    /// Number of symbols the decoder can receive.
    pub fn num_outputs(&self) -> usize {
        self.channel
            .as_ref()
            .map_or(self.num_symbols, Channel::output_size)
    }

    pub fn with_model(&self, model: MarkovModel) -> Result<Self> {
        Self::new(model, self.distortion.clone(), self.num_symbols, self.channel.clone())
    }

    pub fn with_distortion(&self, distortion: DistortionSpec) -> Result<Self> {
        Self::new(self.model.clone(), distortion, self.num_symbols, self.channel.clone())
    }

    /// Labels only matter when the channel tells outputs apart unequally.
    pub fn action_mode(&self) -> DedupMode {
        match &self.channel {
            Some(ch) if !ch.is_identity() => DedupMode::Labeled,
            _ => DedupMode::Partition,
        }
    }

    pub fn actions(&self, cap: usize) -> Result<Vec<Quantizer>> {
        enumerate_quantizers(self.num_states(), self.num_symbols, self.action_mode(), cap)
    }

    /// Per-stage cost `c(π, Q)`.
    pub fn cost(&self, pi: &Belief, q: &Quantizer) -> f64 {
        match &self.channel {
            None => stage_cost_unchecked(pi, q, &self.distortion),
            Some(ch) => noisy_stage_cost_unchecked(pi, q, &self.distortion, ch),
        }
    }

    /// Observable outcomes of applying `q` at belief `pi`: `(symbol,
    /// probability, next belief)` for every symbol with positive probability.
    pub fn branches(&self, pi: &Belief, q: &Quantizer) -> Vec<(usize, f64, Belief)> {
        let mut out = Vec::new();
        match &self.channel {
            None => {
                for s in 0..self.num_symbols {
                    let p = symbol_probability(pi, q, s);
                    if p > ZERO_PROB_TOL {
                        let next = filter_update(pi, q, s, &self.model)
                            .expect("positive-probability symbol");
                        out.push((s, p, next));
                    }
                }
            }
            Some(ch) => {
                for s in 0..ch.output_size() {
                    let w = channel_likelihood_weights(pi, q, s, ch);
                    let p: f64 = w.iter().sum();
                    if p > ZERO_PROB_TOL {
                        let next = crate::belief::noisy_filter_update(pi, q, s, &self.model, ch)
                            .expect("positive-probability output");
                        out.push((s, p, next));
                    }
                }
            }
        }
        out
    }
}

/// Values on the points of a belief grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueFunction {
    pub resolution: usize,
    pub values: Vec<f64>,
}

impl ValueFunction {
    pub fn zeros(grid: &BeliefGrid) -> Self {
        Self {
            resolution: grid.resolution(),
            values: vec![0.0; grid.len()],
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn span(&self) -> f64 {
        span(&self.values)
    }
}

fn span(v: &[f64]) -> f64 {
    let (lo, hi) = min_max(v);
    hi - lo
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

/// Cost and projected successors of one (grid point, action) pair.
#[derive(Debug, Clone)]
struct Transition {
    cost: f64,
    children: Vec<(usize, f64)>,
}

/// The belief MDP restricted to a grid: child beliefs are projected onto the
/// nearest grid point. Transitions are computed once.
#[derive(Debug, Clone)]
pub struct GridMdp {
    problem: Problem,
    grid: BeliefGrid,
    actions: Vec<Quantizer>,
    table: Vec<Vec<Transition>>,
}

fn transition(problem: &Problem, grid: &BeliefGrid, pi: &Belief, q: &Quantizer) -> Transition {
    Transition {
        cost: problem.cost(pi, q),
        children: problem
            .branches(pi, q)
            .into_iter()
            .map(|(_, p, next)| (grid.project(&next), p))
            .collect(),
    }
}

/// `c + β Σ p h(child)`.
#[inline]
fn q_value(t: &Transition, h: &[f64], beta: f64) -> f64 {
    let mut acc = 0.0;
    for &(j, p) in &t.children {
        acc += p * h[j];
    }
    t.cost + beta * acc
}

fn best_action(row: &[Transition], h: &[f64], beta: f64) -> (f64, usize) {
    let mut best = (f64::INFINITY, 0);
    for (a, t) in row.iter().enumerate() {
        let v = q_value(t, h, beta);
        if v < best.0 {
            best = (v, a);
        }
    }
    best
}

impl GridMdp {
    pub fn build(problem: &Problem, resolution: usize, action_cap: usize) -> Result<Self> {
        let grid = BeliefGrid::new(problem.num_states(), resolution)?;
        let actions = problem.actions(action_cap)?;
        let table = grid
            .points()
            .par_iter()
            .map(|pi| {
                actions
                    .iter()
                    .map(|q| transition(problem, &grid, pi, q))
                    .collect()
            })
            .collect();
        Ok(Self {
            problem: problem.clone(),
            grid,
            actions,
            table,
        })
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    pub fn grid(&self) -> &BeliefGrid {
        &self.grid
    }

    pub fn actions(&self) -> &[Quantizer] {
        &self.actions
    }

    /// `(T h)(z)` and its minimizing action at every grid point.
    pub fn backup(&self, h: &[f64], beta: f64) -> (Vec<f64>, Vec<usize>) {
        self.table
            .par_iter()
            .map(|row| best_action(row, h, beta))
            .unzip()
    }

    /// Grid index of the reference point used to normalize `h`: the point
    /// nearest `π*`, or nearest `π₀` when the chain is reducible.
    pub fn reference_index(&self) -> usize {
        match stationary_distribution(self.problem.model()) {
            Ok(pi) => self.grid.project(&pi),
            Err(_) => self.grid.project(self.problem.model().initial()),
        }
    }

    /// Largest ρ₁ distance between a child belief and its projection, i.e. the
    /// realized covering radius over all transitions (at most `|X|/(2n)`).
    pub fn max_projection_error(&self) -> f64 {
        self.grid
            .points()
            .par_iter()
            .map(|pi| {
                let mut worst: f64 = 0.0;
                for q in &self.actions {
                    for (_, _, next) in self.problem.branches(pi, q) {
                        let idx = self.grid.project(&next);
                        let d = crate::belief::wasserstein1(&next, self.grid.point(idx))
                            .expect("same dimension");
                        worst = worst.max(d);
                    }
                }
                worst
            })
            .reduce(|| 0.0, f64::max)
    }
}

/// One Bellman backup at an arbitrary belief: children are filtered, then
/// projected onto the grid to look up `h`. Returns the value and the
/// smallest minimizing action index.
pub fn bellman_backup(
    problem: &Problem,
    grid: &BeliefGrid,
    actions: &[Quantizer],
    pi: &Belief,
    h: &ValueFunction,
    beta: f64,
) -> (f64, usize) {
    let row: Vec<Transition> = actions
        .iter()
        .map(|q| transition(problem, grid, pi, q))
        .collect();
    best_action(&row, &h.values, beta)
}

/// Result of discounted value iteration.
#[derive(Debug, Clone)]
pub struct DiscountedSolution {
    pub values: ValueFunction,
    /// Greedy action index per grid point with respect to `values`.
    pub policy: Vec<usize>,
    pub iterations: usize,
    /// `‖T J - J‖∞` of the returned values.
    pub bellman_residual: f64,
}

/// Value iteration `J_t = T_β J_{t-1}` from `J_0 ≡ 0`, stopped once the
/// sup-norm update is at most `tol (1-β) / (2β)`.
pub fn discounted_value_iteration(
    mdp: &GridMdp,
    beta: f64,
    tol: f64,
    max_iterations: usize,
) -> Result<DiscountedSolution> {
    discounted_value_iteration_from(mdp, beta, tol, max_iterations, None)
}

/// As [`discounted_value_iteration`] with an optional warm start.
pub fn discounted_value_iteration_from(
    mdp: &GridMdp,
    beta: f64,
    tol: f64,
    max_iterations: usize,
    init: Option<Vec<f64>>,
) -> Result<DiscountedSolution> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidDiscount(beta));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance {tol} must be > 0")));
    }
    let threshold = tol * (1.0 - beta) / (2.0 * beta);
    let mut j = init.unwrap_or_else(|| vec![0.0; mdp.grid.len()]);
    let mut last = f64::INFINITY;
    for it in 1..=max_iterations {
        let (next, _) = mdp.backup(&j, beta);
        last = sup_diff(&next, &j);
        j = next;
        if last <= threshold {
            let (tj, policy) = mdp.backup(&j, beta);
            return Ok(DiscountedSolution {
                bellman_residual: sup_diff(&tj, &j),
                values: ValueFunction {
                    resolution: mdp.grid.resolution(),
                    values: j,
                },
                policy,
                iterations: it,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iterations,
        residual: last,
    })
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Average-cost solution method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AverageCostMethod {
    /// Relative value iteration with span-seminorm stopping.
    Rvi,
    /// Discounted solutions along `β_k = 1 - 2^-k`.
    VanishingDiscount,
}

/// Tuning for [`solve_average_cost`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AverageCostOptions {
    pub method: AverageCostMethod,
    /// RVI stops when `span(T h - h) <= tol`; discounted solves use it as
    /// their Bellman-residual target.
    pub tol: f64,
    pub max_iterations: usize,
    /// Relaxation `h ← (1-α) h + α T h`; values below 1 guard against
    /// periodic grid dynamics.
    pub damping: f64,
    /// Largest `k` in `β_k = 1 - 2^-k` for the vanishing-discount method.
    pub max_discount_exponent: u32,
}

impl Default for AverageCostOptions {
    fn default() -> Self {
        Self {
            method: AverageCostMethod::Rvi,
            tol: 1e-9,
            max_iterations: 1_000_000,
            damping: 0.5,
            max_discount_exponent: 12,
        }
    }
}

/// `(g*, h, f*)` solving the average cost optimality equation on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalTriplet {
    pub gain: f64,
    pub h: ValueFunction,
    pub policy: Vec<usize>,
    pub actions: Vec<Quantizer>,
    pub num_states: usize,
    pub reference_index: usize,
    pub method: AverageCostMethod,
    pub tolerance: f64,
    pub iterations: usize,
}

/// Version tag written into serialized triplets.
pub const TRIPLET_FORMAT_VERSION: u32 = 1;

/// On-disk form of a [`CanonicalTriplet`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TripletFile {
    pub version: u32,
    pub triplet: CanonicalTriplet,
}

impl TripletFile {
    pub fn new(triplet: CanonicalTriplet) -> Self {
        Self {
            version: TRIPLET_FORMAT_VERSION,
            triplet,
        }
    }

    pub fn into_triplet(self) -> Result<CanonicalTriplet> {
        if self.version != TRIPLET_FORMAT_VERSION {
            return Err(Error::InvalidArgument(format!(
                "unsupported triplet format version {}",
                self.version
            )));
        }
        Ok(self.triplet)
    }
}

impl CanonicalTriplet {
    pub fn grid_resolution(&self) -> usize {
        self.h.resolution
    }

    /// The tabulated policy `f*` as a coding rule.
    pub fn stationary_policy(&self) -> Result<StationaryPolicy> {
        let grid = BeliefGrid::new(self.num_states, self.h.resolution)?;
        StationaryPolicy::new(grid, self.actions.clone(), self.policy.clone())
    }

    pub fn h_sup(&self) -> f64 {
        self.h.sup_norm()
    }
}

/// Solves the average-cost problem on the grid of `mdp`.
///
/// A reducible or periodic source is accepted with a warning; the gain may
/// then depend on `π₀`.
pub fn solve_average_cost(mdp: &GridMdp, opts: &AverageCostOptions) -> Result<CanonicalTriplet> {
    let model = mdp.problem.model();
    if !is_irreducible(model) || !is_aperiodic(model) {
        log::warn!("source is not irreducible and aperiodic; the optimal gain may depend on the initial belief");
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance {} must be > 0", opts.tol)));
    }
    let reference = mdp.reference_index();
    match opts.method {
        AverageCostMethod::Rvi => relative_value_iteration(mdp, reference, opts),
        AverageCostMethod::VanishingDiscount => vanishing_discount(mdp, reference, opts),
    }
}

fn relative_value_iteration(
    mdp: &GridMdp,
    reference: usize,
    opts: &AverageCostOptions,
) -> Result<CanonicalTriplet> {
    let alpha = opts.damping;
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidArgument(format!("damping {alpha} outside (0, 1]")));
    }
    const STALL_WINDOW: usize = 1000;
    let mut h = vec![0.0; mdp.grid.len()];
    let mut last = f64::INFINITY;
    let mut window_span = f64::INFINITY;
    for it in 1..=opts.max_iterations {
        let (th, policy) = mdp.backup(&h, 1.0);
        let diff: Vec<f64> = th.iter().zip(&h).map(|(a, b)| a - b).collect();
        let (lo, hi) = min_max(&diff);
        last = hi - lo;
        if it % STALL_WINDOW == 0 {
            // a span that no longer contracts signals a multichain grid MDP
            if it >= 10 * STALL_WINDOW && last > 0.999 * window_span {
                return Err(Error::NoConvergence {
                    iterations: it,
                    residual: last,
                });
            }
            window_span = last;
        }
        if last <= opts.tol {
            let offset = h[reference];
            h.iter_mut().for_each(|v| *v -= offset);
            return Ok(CanonicalTriplet {
                gain: 0.5 * (lo + hi),
                h: ValueFunction {
                    resolution: mdp.grid.resolution(),
                    values: h,
                },
                policy,
                actions: mdp.actions.clone(),
                num_states: mdp.grid.num_states(),
                reference_index: reference,
                method: AverageCostMethod::Rvi,
                tolerance: opts.tol,
                iterations: it,
            });
        }
        let shift = (1.0 - alpha) * h[reference] + alpha * th[reference];
        for (v, t) in h.iter_mut().zip(&th) {
            *v = (1.0 - alpha) * *v + alpha * t - shift;
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iterations,
        residual: last,
    })
}

fn vanishing_discount(
    mdp: &GridMdp,
    reference: usize,
    opts: &AverageCostOptions,
) -> Result<CanonicalTriplet> {
    if opts.max_discount_exponent < 2 {
        return Err(Error::InvalidArgument(
            "vanishing discount needs max_discount_exponent >= 2".into(),
        ));
    }
    let mut prev_gain = f64::NAN;
    let mut gain = f64::NAN;
    let mut warm: Option<(f64, Vec<f64>)> = None;
    let mut last = None;
    let mut total_iterations = 0;
    for k in 1..=opts.max_discount_exponent {
        let beta = 1.0 - 0.5f64.powi(k as i32);
        // J^β ≈ g/(1-β) + h, so rescale the previous solution's gain part
        let init = warm.take().map(|(prev_beta, j): (f64, Vec<f64>)| {
            let g = (1.0 - prev_beta) * j[reference];
            j.iter()
                .map(|v| v - g / (1.0 - prev_beta) + g / (1.0 - beta))
                .collect()
        });
        let sol = discounted_value_iteration_from(mdp, beta, opts.tol, opts.max_iterations, init)?;
        total_iterations += sol.iterations;
        prev_gain = gain;
        gain = (1.0 - beta) * sol.values.values[reference];
        warm = Some((beta, sol.values.values.clone()));
        last = Some(sol);
    }
    let sol = last.expect("at least one discount factor");
    let offset = sol.values.values[reference];
    let h: Vec<f64> = sol.values.values.iter().map(|v| v - offset).collect();
    // (1-β)J^β = g + (1-β)·bias + O((1-β)²); halving 1-β cancels the linear term
    let extrapolated = 2.0 * gain - prev_gain;
    Ok(CanonicalTriplet {
        gain: extrapolated,
        h: ValueFunction {
            resolution: mdp.grid.resolution(),
            values: h,
        },
        policy: sol.policy,
        actions: mdp.actions.clone(),
        num_states: mdp.grid.num_states(),
        reference_index: reference,
        method: AverageCostMethod::VanishingDiscount,
        tolerance: opts.tol,
        iterations: total_iterations,
    })
}

/// `max_z |g* + h(z) - min_Q (c(z, Q) + Σ_q p(q) h(proj(φ(z, Q, q))))|`.
pub fn acoe_residual(triplet: &CanonicalTriplet, mdp: &GridMdp) -> Result<f64> {
    if triplet.h.values.len() != mdp.grid.len() {
        return Err(Error::DimensionMismatch {
            expected: mdp.grid.len(),
            found: triplet.h.values.len(),
            context: "triplet h vs grid size",
        });
    }
    let (th, _) = mdp.backup(&triplet.h.values, 1.0);
    Ok(th
        .iter()
        .zip(&triplet.h.values)
        .fold(0.0, |m, (t, h)| m.max((triplet.gain + h - t).abs())))
}

/// Default cap on the number of distinct beliefs per stage in exact policy
/// evaluation.
pub const DEFAULT_BELIEF_CAP: usize = 1_000_000;

/// Exact expected average distortion `(1/T) E[Σ_{t<T} d(X_t, X̂_t)]` of
/// `policy` started from `start`.
///
/// The belief tree is expanded forward with branch weights given by the
/// symbol probabilities; identical beliefs are merged, so the work per stage
/// is bounded by the number of distinct reachable beliefs.
pub fn evaluate_policy_exact(
    problem: &Problem,
    policy: &dyn CodingPolicy,
    horizon: usize,
    start: &Belief,
    belief_cap: usize,
) -> Result<f64> {
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be >= 1".into()));
    }
    if start.len() != problem.num_states() {
        return Err(Error::DimensionMismatch {
            expected: problem.num_states(),
            found: start.len(),
            context: "start belief vs source alphabet",
        });
    }
    let mut layer: BTreeMap<Vec<u64>, (Belief, f64)> = BTreeMap::new();
    layer.insert(start.bit_key(), (start.clone(), 1.0));
    let mut total = 0.0;
    for t in 0..horizon {
        if let Some(reset) = policy.reset(t) {
            let mass: f64 = layer.values().map(|(_, w)| w).sum();
            layer.clear();
            layer.insert(reset.bit_key(), (reset.clone(), mass));
        }
        let mut next: BTreeMap<Vec<u64>, (Belief, f64)> = BTreeMap::new();
        for (pi, w) in layer.values() {
            let q = policy.select(pi, t);
            total += w * problem.cost(pi, q);
            if t + 1 == horizon {
                continue;
            }
            for (_, p, child) in problem.branches(pi, q) {
                next.entry(child.bit_key())
                    .or_insert_with(|| (child, 0.0))
                    .1 += w * p;
            }
            if next.len() > belief_cap {
                return Err(Error::TreeTooLarge {
                    size: next.len() as f64,
                    cap: belief_cap,
                });
            }
        }
        layer = next;
    }
    Ok(total / horizon as f64)
}

/// One node of the reachable belief tree.
#[derive(Debug, Clone)]
pub struct PlanNode {
    pub belief: Belief,
    /// Optimal cost-to-go `Σ_{s≥t} E[c]` (that is, `T · J^T_t`).
    pub cost_to_go: f64,
    pub action: usize,
    /// For each action, `(symbol, probability, child index in next stage)`.
    pub children: Vec<Vec<(usize, f64, usize)>>,
}

/// Exact finite-horizon solution on the reachable belief tree.
#[derive(Debug, Clone)]
pub struct FiniteHorizonPlan {
    pub horizon: usize,
    pub actions: Vec<Quantizer>,
    /// `stages[t]` holds the nodes reachable at time `t`; the terminal stage
    /// `T` has value 0 and is not stored.
    pub stages: Vec<Vec<PlanNode>>,
}

impl FiniteHorizonPlan {
    /// `J^T_0(π₀)`.
    pub fn value(&self) -> f64 {
        self.stages[0][0].cost_to_go / self.horizon as f64
    }

    /// `J^T_t` at node `i` of stage `t`.
    pub fn stage_value(&self, t: usize, i: usize) -> f64 {
        self.stages[t][i].cost_to_go / self.horizon as f64
    }

    /// Quantizer the plan applies at the root.
    pub fn first_action(&self) -> &Quantizer {
        &self.actions[self.stages[0][0].action]
    }
}

/// Default cap on `Σ_{t<T} (|actions| · outputs)^t`.
pub const DEFAULT_TREE_CAP: usize = 5_000_000;

/// Backward recursion `T J^T_t(π) = min_Q (c(π,Q) + T E[J^T_{t+1}])` with
/// `J^T_T ≡ 0`, on exactly the beliefs reachable from `π₀`.
pub fn finite_horizon_dp(problem: &Problem, horizon: usize, tree_cap: usize) -> Result<FiniteHorizonPlan> {
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be >= 1".into()));
    }
    let actions = problem.actions(usize::MAX)?;
    let fanout = (actions.len() * problem.num_outputs()) as f64;
    let size: f64 = (0..horizon).map(|t| fanout.powi(t as i32)).sum();
    if size > tree_cap as f64 {
        return Err(Error::TreeTooLarge { size, cap: tree_cap });
    }
    let mut stages: Vec<Vec<PlanNode>> = vec![vec![PlanNode {
        belief: problem.model().initial().clone(),
        cost_to_go: 0.0,
        action: 0,
        children: Vec::new(),
    }]];
    for t in 0..horizon - 1 {
        let mut next = Vec::new();
        for node in stages[t].iter_mut() {
            node.children = actions
                .iter()
                .map(|q| {
                    problem
                        .branches(&node.belief, q)
                        .into_iter()
                        .map(|(s, p, child)| {
                            next.push(PlanNode {
                                belief: child,
                                cost_to_go: 0.0,
                                action: 0,
                                children: Vec::new(),
                            });
                            (s, p, next.len() - 1)
                        })
                        .collect()
                })
                .collect();
        }
        stages.push(next);
    }
    for t in (0..horizon).rev() {
        let (head, tail) = stages.split_at_mut(t + 1);
        let later = tail.first();
        for node in head[t].iter_mut() {
            let mut best = (f64::INFINITY, 0);
            for (a, q) in actions.iter().enumerate() {
                let mut future = 0.0;
                if let Some(later) = later {
                    for &(_, p, c) in &node.children[a] {
                        future += p * later[c].cost_to_go;
                    }
                }
                let v = problem.cost(&node.belief, q) + future;
                if v < best.0 {
                    best = (v, a);
                }
            }
            node.cost_to_go = best.0;
            node.action = best.1;
        }
    }
    Ok(FiniteHorizonPlan {
        horizon,
        actions,
        stages,
    })
}

/// Mean and standard error of the per-run average distortion over
/// `num_runs` independent codec sessions of length `horizon`.
pub fn simulate_policy(
    problem: &Problem,
    policy: &dyn CodingPolicy,
    horizon: usize,
    num_runs: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if num_runs == 0 {
        return Err(Error::InvalidArgument("need at least one run".into()));
    }
    let runs: Vec<f64> = (0..num_runs)
        .into_par_iter()
        .map(|r| {
            crate::codec::run_session(problem, policy, horizon, crate::codec::derive_seed(seed, r as u64))
                .map(|trace| trace.average_distortion())
        })
        .collect::<Result<_>>()?;
    let n = runs.len() as f64;
    let mean = runs.iter().sum::<f64>() / n;
    let se = if runs.len() > 1 {
        let var = runs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    Ok((mean, se))
}
