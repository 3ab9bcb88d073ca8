//! Online zero-delay encoder/decoder pair driven by a solved policy.
//!
//! Both ends start from the same `π₀` and apply the same filter to the same
//! symbols, so their beliefs agree after every step. Over a noisy channel the
//! encoder learns the received symbol through feedback before updating.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::belief::{channel_likelihood_weights, filter_update, noisy_filter_update, ZERO_PROB_TOL};
use crate::error::{Error, Result};
use crate::policy::{CodingPolicy, PeriodicPolicy, StationaryPolicy};
use crate::quantizer::{optimal_reproduction, Quantizer};
use crate::solver::Problem;
use crate::source::{sample_index, Belief};

/// Encoder side: belief, clock and the quantizer awaiting feedback.
pub struct Encoder<'a> {
    problem: &'a Problem,
    policy: &'a dyn CodingPolicy,
    belief: Belief,
    t: usize,
    pending: Option<Quantizer>,
}

impl<'a> Encoder<'a> {
    pub fn new(problem: &'a Problem, policy: &'a dyn CodingPolicy) -> Self {
        Self {
            problem,
            policy,
            belief: problem.model().initial().clone(),
            t: 0,
            pending: None,
        }
    }

    pub fn belief(&self) -> &Belief {
        &self.belief
    }

    pub fn clock(&self) -> usize {
        self.t
    }

    /// Emits the channel input for source symbol `x`. Over a noiseless
    /// channel the belief advances immediately; otherwise it waits for
    /// [`Encoder::receive_feedback`].
    pub fn encode_step(&mut self, x: usize) -> Result<usize> {
        if x >= self.problem.num_states() {
            return Err(Error::InvalidArgument(format!("source symbol {x} out of range")));
        }
        if self.pending.is_some() {
            return Err(Error::InvalidArgument(
                "encode_step called while feedback is pending".into(),
            ));
        }
        if let Some(reset) = self.policy.reset(self.t) {
            self.belief = reset.clone();
        }
        let q = self.policy.select(&self.belief, self.t).clone();
        let symbol = q.apply(x);
        if self.problem.channel().is_none() {
            self.belief = filter_update(&self.belief, &q, symbol, self.problem.model())?;
            self.t += 1;
        } else {
            self.pending = Some(q);
        }
        Ok(symbol)
    }

    /// Feeds back the channel output the decoder received.
    pub fn receive_feedback(&mut self, output: usize) -> Result<()> {
        let channel = self
            .problem
            .channel()
            .ok_or_else(|| Error::InvalidArgument("feedback on a noiseless channel".into()))?;
        let q = self
            .pending
            .take()
            .ok_or_else(|| Error::InvalidArgument("no symbol awaiting feedback".into()))?;
        self.belief = noisy_filter_update(&self.belief, &q, output, self.problem.model(), channel)?;
        self.t += 1;
        Ok(())
    }
}

/// Decoder side.
pub struct Decoder<'a> {
    problem: &'a Problem,
    policy: &'a dyn CodingPolicy,
    belief: Belief,
    t: usize,
}

impl<'a> Decoder<'a> {
    pub fn new(problem: &'a Problem, policy: &'a dyn CodingPolicy) -> Self {
        Self {
            problem,
            policy,
            belief: problem.model().initial().clone(),
            t: 0,
        }
    }

    pub fn belief(&self) -> &Belief {
        &self.belief
    }

    pub fn clock(&self) -> usize {
        self.t
    }

    /// Reproduces `X_t` from the received symbol and advances the belief.
    ///
    /// Over a noisy channel the reproduction minimizes expected distortion
    /// under the posterior `∝ π(x) T(q' | Q(x))` that includes the current
    /// output.
    pub fn decode_step(&mut self, received: usize) -> Result<usize> {
        if received >= self.problem.num_outputs() {
            return Err(Error::InvalidArgument(format!("channel symbol {received} out of range")));
        }
        if let Some(reset) = self.policy.reset(self.t) {
            self.belief = reset.clone();
        }
        let q = self.policy.select(&self.belief, self.t);
        let d = self.problem.distortion();
        let model = self.problem.model();
        let xhat = match self.problem.channel() {
            None => {
                let next = filter_update(&self.belief, q, received, model)?;
                let xhat = optimal_reproduction(&self.belief, q, d, received);
                self.belief = next;
                xhat
            }
            Some(ch) => {
                let w = channel_likelihood_weights(&self.belief, q, received, ch);
                if w.iter().sum::<f64>() <= ZERO_PROB_TOL {
                    return Err(Error::ZeroProbabilitySymbol { symbol: received });
                }
                let xhat = d.best_reproduction(w.iter().copied().enumerate()).0;
                self.belief = noisy_filter_update(&self.belief, q, received, model, ch)?;
                xhat
            }
        };
        self.t += 1;
        Ok(xhat)
    }
}

/// Wraps a stationary policy so both ends restart from `reset` every
/// `period` steps.
pub fn make_periodic(policy: StationaryPolicy, period: usize, reset: Belief) -> Result<PeriodicPolicy> {
    PeriodicPolicy::new(policy, period, reset)
}

/// One step of a recorded session.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: usize,
    pub x: usize,
    pub q: usize,
    pub received: usize,
    pub xhat: usize,
    pub distortion: f64,
    /// Shared belief `π_t` used to pick the quantizer.
    pub belief: Belief,
}

/// Full record of a codec session.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub seed: u64,
    pub rows: Vec<TraceRow>,
}

impl Trace {
    pub fn average_distortion(&self) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        self.rows.iter().map(|r| r.distortion).sum::<f64>() / self.rows.len() as f64
    }

    /// CSV with 1-based symbols and 12-decimal floats. `comment` becomes a
    /// leading `# ...` line.
    pub fn write_csv<W: Write>(&self, mut w: W, comment: &str) -> io::Result<()> {
        writeln!(w, "# {comment}")?;
        let k = self.rows.first().map_or(0, |r| r.belief.len());
        let mut header = String::from("t,x,q,q_received,x_hat,d");
        for i in 1..=k {
            header.push_str(&format!(",pi_{i}"));
        }
        writeln!(w, "{header}")?;
        for r in &self.rows {
            write!(
                w,
                "{},{},{},{},{},{:.12}",
                r.t,
                r.x + 1,
                r.q + 1,
                r.received + 1,
                r.xhat + 1,
                r.distortion
            )?;
            for p in r.belief.probs() {
                write!(w, ",{p:.12}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// SplitMix64 mixing of a base seed and a run index.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs source, encoder, channel and decoder for `horizon` steps.
///
/// The source and the channel draw from separate random streams, so a run
/// over the identity channel sees the same source path as a noiseless run.
/// Fails with [`Error::BeliefDesync`] if the two beliefs ever differ.
pub fn run_session(problem: &Problem, policy: &dyn CodingPolicy, horizon: usize, seed: u64) -> Result<Trace> {
    let mut source_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut channel_rng = ChaCha8Rng::seed_from_u64(seed);
    channel_rng.set_stream(1);
    let model = problem.model();
    let d = problem.distortion();
    let mut enc = Encoder::new(problem, policy);
    let mut dec = Decoder::new(problem, policy);
    let mut rows = Vec::with_capacity(horizon);
    let mut x = sample_index(model.initial().probs(), source_rng.gen::<f64>());
    for t in 0..horizon {
        if t > 0 {
            x = sample_index(model.row(x), source_rng.gen::<f64>());
        }
        let q = enc.encode_step(x)?;
        let received = match problem.channel() {
            None => q,
            Some(ch) => sample_index(ch.row(q), channel_rng.gen::<f64>()),
        };
        // belief used for this step, after any periodic reset
        let belief = match policy.reset(t) {
            Some(b) => b.clone(),
            None => dec.belief().clone(),
        };
        let xhat = dec.decode_step(received)?;
        if problem.channel().is_some() {
            enc.receive_feedback(received)?;
        }
        if enc.belief() != dec.belief() {
            return Err(Error::BeliefDesync { step: t });
        }
        rows.push(TraceRow {
            t,
            x,
            q,
            received,
            xhat,
            distortion: d.get(x, xhat),
            belief,
        });
    }
    Ok(Trace { seed, rows })
}
