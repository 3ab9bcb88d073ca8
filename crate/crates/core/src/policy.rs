//! Rules mapping the current belief (and clock) to a quantizer.

use crate::belief::BeliefGrid;
use crate::error::{Error, Result};
use crate::quantizer::Quantizer;
use crate::source::Belief;

/// A Walrand–Varaiya type coding policy, possibly time-varying.
pub trait CodingPolicy: Sync {
    /// Quantizer applied at time `t` when the shared belief is `belief`.
    fn select(&self, belief: &Belief, t: usize) -> &Quantizer;

    /// Belief both ends restart from at time `t`, if the policy resets there.
    fn reset(&self, _t: usize) -> Option<&Belief> {
        None
    }
}

/// A stationary policy tabulated on a belief grid; off-grid beliefs use the
/// entry of their nearest grid point.
#[derive(Debug, Clone)]
pub struct StationaryPolicy {
    grid: BeliefGrid,
    actions: Vec<Quantizer>,
    choice: Vec<usize>,
}

impl StationaryPolicy {
    pub fn new(grid: BeliefGrid, actions: Vec<Quantizer>, choice: Vec<usize>) -> Result<Self> {
        if choice.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                found: choice.len(),
                context: "policy table vs grid size",
            });
        }
        if let Some(&bad) = choice.iter().find(|&&a| a >= actions.len()) {
            return Err(Error::InvalidArgument(format!(
                "policy refers to action {bad} but only {} exist",
                actions.len()
            )));
        }
        Ok(Self {
            grid,
            actions,
            choice,
        })
    }

    pub fn grid(&self) -> &BeliefGrid {
        &self.grid
    }

    pub fn actions(&self) -> &[Quantizer] {
        &self.actions
    }

    pub fn choices(&self) -> &[usize] {
        &self.choice
    }

    /// Index into [`Self::actions`] used at `belief`.
    pub fn action_index(&self, belief: &Belief) -> usize {
        self.choice[self.grid.project(belief)]
    }
}

impl CodingPolicy for StationaryPolicy {
    fn select(&self, belief: &Belief, _t: usize) -> &Quantizer {
        &self.actions[self.action_index(belief)]
    }
}

/// A stationary policy restarted from a fixed belief every `period` steps.
#[derive(Debug, Clone)]
pub struct PeriodicPolicy {
    inner: StationaryPolicy,
    period: usize,
    reset_belief: Belief,
}

impl PeriodicPolicy {
    pub fn new(inner: StationaryPolicy, period: usize, reset_belief: Belief) -> Result<Self> {
        if period == 0 {
            return Err(Error::InvalidArgument("period must be >= 1".into()));
        }
        if reset_belief.len() != inner.grid.num_states() {
            return Err(Error::DimensionMismatch {
                expected: inner.grid.num_states(),
                found: reset_belief.len(),
                context: "reset belief vs policy alphabet",
            });
        }
        Ok(Self {
            inner,
            period,
            reset_belief,
        })
    }

    pub fn period(&self) -> usize {
        self.period
    }

    pub fn reset_belief(&self) -> &Belief {
        &self.reset_belief
    }

    pub fn inner(&self) -> &StationaryPolicy {
        &self.inner
    }
}

impl CodingPolicy for PeriodicPolicy {
    fn select(&self, belief: &Belief, t: usize) -> &Quantizer {
        self.inner.select(belief, t)
    }

    fn reset(&self, t: usize) -> Option<&Belief> {
        t.is_multiple_of(self.period).then_some(&self.reset_belief)
    }
}

/// A fixed open-loop sequence of quantizers; the last one repeats.
#[derive(Debug, Clone)]
pub struct QuantizerSchedule {
    steps: Vec<Quantizer>,
}

impl QuantizerSchedule {
    pub fn new(steps: Vec<Quantizer>) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::InvalidArgument("empty quantizer schedule".into()));
        }
        Ok(Self { steps })
    }

    pub fn constant(q: Quantizer) -> Self {
        Self { steps: vec![q] }
    }
}

impl CodingPolicy for QuantizerSchedule {
    fn select(&self, _belief: &Belief, t: usize) -> &Quantizer {
        &self.steps[t.min(self.steps.len() - 1)]
    }
}
