//! One function per subcommand. Each writes its files under the output
//! directory and returns the text printed on stdout.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use zdq::codec::{derive_seed, make_periodic};
use zdq::coupling::{coupling_report, monte_carlo_tau, CouplingReport};
use zdq::oracle::exhaustive_min;
use zdq::solver::{
    acoe_residual, evaluate_policy_exact, finite_horizon_dp, simulate_policy, TripletFile,
};
use zdq::{fmt_sig, run_session, solve_average_cost, CanonicalTriplet, GridMdp, Problem};

use crate::config::{ChannelConfig, ExperimentConfig};
use crate::error::CliError;

/// Resolved inputs shared by all subcommands.
#[derive(Debug, Clone)]
pub struct Context {
    pub config: ExperimentConfig,
    pub out: PathBuf,
    pub seed: u64,
    /// Previously written triplet to reuse instead of re-solving.
    pub triplet: Option<PathBuf>,
}

impl Context {
    pub fn new(config: ExperimentConfig, out: Option<&Path>, seed: Option<u64>) -> Self {
        let out = config.output_dir(out);
        let seed = seed.unwrap_or(config.seed);
        Self {
            config,
            out,
            seed,
            triplet: None,
        }
    }

    fn write(&self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        fs::create_dir_all(&self.out).map_err(|source| CliError::Io {
            path: self.out.clone(),
            source,
        })?;
        let path = self.out.join(name);
        fs::write(&path, contents).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        log::info!("wrote {}", path.display());
        Ok(path)
    }
}

fn channel_label(cfg: &ExperimentConfig) -> String {
    match &cfg.channel {
        ChannelConfig::Named(_) => "noiseless".into(),
        ChannelConfig::Bsc(b) => format!("bsc({})", fmt_sig(b.bsc)),
        ChannelConfig::Matrix(_) => "matrix".into(),
    }
}

struct Solved {
    problem: Problem,
    mdp: GridMdp,
    triplet: CanonicalTriplet,
}

fn build_mdp(ctx: &Context) -> Result<(Problem, GridMdp), CliError> {
    let problem = ctx.config.problem()?;
    let mdp = GridMdp::build(&problem, ctx.config.grid_resolution, ctx.config.solver.action_cap)?;
    Ok((problem, mdp))
}

fn load_triplet(path: &Path, mdp: &GridMdp) -> Result<CanonicalTriplet, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read triplet {}: {e}", path.display())))?;
    let file: TripletFile = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: line {}: {e}", path.display(), e.line())))?;
    let t = file
        .into_triplet()
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if t.num_states != mdp.grid().num_states()
        || t.grid_resolution() != mdp.grid().resolution()
        || t.actions != mdp.actions()
        || t.h.values.len() != mdp.grid().len()
    {
        return Err(CliError::Config(format!(
            "triplet {} was solved for a different problem or grid",
            path.display()
        )));
    }
    Ok(t)
}

fn solved(ctx: &Context) -> Result<Solved, CliError> {
    let (problem, mdp) = build_mdp(ctx)?;
    let triplet = match &ctx.triplet {
        Some(path) => load_triplet(path, &mdp)?,
        None => solve_average_cost(&mdp, &ctx.config.solver.options())?,
    };
    Ok(Solved {
        problem,
        mdp,
        triplet,
    })
}

fn coupling(problem: &Problem) -> Result<CouplingReport, CliError> {
    Ok(coupling_report(problem.model(), problem.distortion())?)
}

fn key_values(rows: &[(&str, String)]) -> String {
    let mut out = String::from("key,value\n");
    for (k, v) in rows {
        let _ = writeln!(out, "{k},{v}");
    }
    out
}

fn stdout_lines(rows: &[(&str, String)]) -> String {
    rows.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
}

/// `solve`: triplet, coupling report and summary.
pub fn solve(ctx: &Context) -> Result<String, CliError> {
    let s = solved(ctx)?;
    let residual = acoe_residual(&s.triplet, &s.mdp)?;
    let n = ctx.config.grid_resolution;
    let mut rows = vec![
        ("gain", fmt_sig(s.triplet.gain)),
        ("acoe_residual", fmt_sig(residual)),
        ("grid_resolution", n.to_string()),
        ("grid_points", s.mdp.grid().len().to_string()),
        ("num_actions", s.mdp.actions().len().to_string()),
        ("iterations", s.triplet.iterations.to_string()),
        ("h_sup", fmt_sig(s.triplet.h_sup())),
    ];
    match coupling(&s.problem) {
        Ok(report) => {
            rows.extend([
                ("k1", fmt_sig(report.k1)),
                ("k", fmt_sig(report.k)),
                ("reference_state", (report.reference_state + 1).to_string()),
                ("grid_slack", fmt_sig(report.grid_slack(n))),
            ]);
            ctx.write("coupling.json", &serde_json::to_string_pretty(&report).expect("serializable"))?;
            ctx.write("tau.csv", &report.tau_csv())?;
        }
        Err(e) => log::warn!("no coupling constants: {e}"),
    }
    let file = TripletFile::new(s.triplet);
    ctx.write("triplet.json", &serde_json::to_string_pretty(&file).expect("serializable"))?;
    ctx.write("summary.csv", &key_values(&rows))?;
    Ok(stdout_lines(&rows))
}

/// `converge`: `T, J_T, T (J_T - g*), K` for each configured horizon.
pub fn converge(ctx: &Context) -> Result<String, CliError> {
    let s = solved(ctx)?;
    let report = coupling(&s.problem)?;
    let policy = s.triplet.stationary_policy()?;
    let horizons: Vec<usize> = if ctx.config.horizons.is_empty() {
        (1..=40).collect()
    } else {
        ctx.config.horizons.clone()
    };
    let start = s.problem.model().initial();
    let mut csv = String::from("T,J_T,scaled_gap,K,evaluation\n");
    for &t in &horizons {
        let (j, how) = match evaluate_policy_exact(&s.problem, &policy, t, start, ctx.config.solver.belief_cap) {
            Ok(j) => (j, "exact"),
            Err(zdq::Error::TreeTooLarge { .. }) => {
                log::warn!("T={t}: exact evaluation over the cap, simulating instead");
                let sim = &ctx.config.simulation;
                let (mean, _) = simulate_policy(&s.problem, &policy, t, sim.runs, derive_seed(ctx.seed, t as u64))?;
                (mean, "simulated")
            }
            Err(e) => return Err(e.into()),
        };
        let gap = t as f64 * (j - s.triplet.gain);
        let _ = writeln!(csv, "{t},{},{},{},{how}", fmt_sig(j), fmt_sig(gap), fmt_sig(report.k));
    }
    ctx.write("converge.csv", &csv)?;
    Ok(stdout_lines(&[
        ("gain", fmt_sig(s.triplet.gain)),
        ("k", fmt_sig(report.k)),
        ("grid_slack", fmt_sig(report.grid_slack(ctx.config.grid_resolution))),
        ("rows", horizons.len().to_string()),
    ]))
}

/// Period `ceil(K / ε)`, at least 1.
pub fn period_for(k: f64, epsilon: f64) -> usize {
    ((k / epsilon).ceil() as usize).max(1)
}

/// `periodic`: exact per-period cost of the restarted policy from `π*`.
pub fn periodic(ctx: &Context) -> Result<String, CliError> {
    let s = solved(ctx)?;
    let report = coupling(&s.problem)?;
    let pi_star = ctx.config.stationary_belief()?;
    if s.problem.model().initial() != &pi_star {
        log::info!("periodic policies start from the invariant belief; ignoring the configured π₀");
    }
    let problem = s.problem.with_model(s.problem.model().with_initial(pi_star.clone())?)?;
    let stationary = s.triplet.stationary_policy()?;
    let slack = report.grid_slack(ctx.config.grid_resolution);
    let mut csv = String::from("epsilon,period,per_period_cost,gain,margin,grid_slack\n");
    let mut worst = f64::INFINITY;
    for &eps in &ctx.config.periodic.epsilons {
        let period = period_for(report.k, eps);
        let policy = make_periodic(stationary.clone(), period, pi_star.clone())?;
        let cost = evaluate_policy_exact(&problem, &policy, period, &pi_star, ctx.config.solver.belief_cap)?;
        let margin = s.triplet.gain + eps - cost;
        worst = worst.min(margin + slack);
        let _ = writeln!(
            csv,
            "{},{period},{},{},{},{}",
            fmt_sig(eps),
            fmt_sig(cost),
            fmt_sig(s.triplet.gain),
            fmt_sig(margin),
            fmt_sig(slack)
        );
    }
    ctx.write("periodic.csv", &csv)?;
    Ok(stdout_lines(&[
        ("gain", fmt_sig(s.triplet.gain)),
        ("k", fmt_sig(report.k)),
        ("min_margin_plus_slack", fmt_sig(worst)),
    ]))
}

/// `oracle-check`: finite-horizon DP against exhaustive search.
pub fn oracle_check(ctx: &Context) -> Result<String, CliError> {
    let problem = ctx.config.problem()?;
    if problem.channel().is_some_and(|c| !c.is_identity()) {
        return Err(CliError::Config("oracle-check supports noiseless channels only".into()));
    }
    let horizons: Vec<usize> = if ctx.config.horizons.is_empty() {
        vec![1, 2, 3]
    } else {
        ctx.config.horizons.clone()
    };
    let tol = ctx.config.oracle.tolerance;
    let mut csv = String::from("T,dp,oracle,gap,pass\n");
    let mut text = String::new();
    let mut max_gap = 0.0f64;
    for &t in &horizons {
        let dp = finite_horizon_dp(&problem, t, ctx.config.solver.tree_cap)?.value();
        let (oracle, _) = exhaustive_min(
            problem.model(),
            problem.distortion(),
            problem.num_symbols(),
            t,
            ctx.config.oracle.search_cap,
        )?;
        let gap = (dp - oracle).abs();
        max_gap = max_gap.max(gap);
        let pass = gap <= tol;
        let _ = writeln!(csv, "{t},{},{},{},{pass}", fmt_sig(dp), fmt_sig(oracle), fmt_sig(gap));
        let _ = writeln!(
            text,
            "[{}] T={t} dp={} oracle={} gap={}",
            if pass { "PASS" } else { "FAIL" },
            fmt_sig(dp),
            fmt_sig(oracle),
            fmt_sig(gap)
        );
    }
    ctx.write("oracle_check.csv", &csv)?;
    let _ = writeln!(text, "max_gap={}", fmt_sig(max_gap));
    if max_gap > tol {
        print!("{text}");
        return Err(CliError::CheckFailed(format!(
            "DP and exhaustive search differ by {}",
            fmt_sig(max_gap)
        )));
    }
    Ok(text)
}

/// `simulate`: Monte Carlo average distortion and one recorded trace.
pub fn simulate(ctx: &Context) -> Result<String, CliError> {
    let s = solved(ctx)?;
    let policy = s.triplet.stationary_policy()?;
    let sim = &ctx.config.simulation;
    let (mean, se) = simulate_policy(&s.problem, &policy, sim.horizon, sim.runs, ctx.seed)?;
    // run 0 of the batch, replayable from the echoed seed
    let trace_seed = derive_seed(ctx.seed, 0);
    let trace = run_session(&s.problem, &policy, sim.horizon, trace_seed)?;
    let comment = format!(
        "seed={} session_seed={trace_seed} horizon={} runs={} channel={} grid_resolution={} gain={}",
        ctx.seed,
        sim.horizon,
        sim.runs,
        channel_label(&ctx.config),
        ctx.config.grid_resolution,
        fmt_sig(s.triplet.gain)
    );
    let mut buf = Vec::new();
    trace
        .write_csv(&mut buf, &comment)
        .expect("writing to memory cannot fail");
    ctx.write("trace.csv", &String::from_utf8(buf).expect("ascii output"))?;
    let rows = [
        ("horizon", sim.horizon.to_string()),
        ("runs", sim.runs.to_string()),
        ("mean_distortion", fmt_sig(mean)),
        ("std_error", fmt_sig(se)),
        ("gain", fmt_sig(s.triplet.gain)),
        ("trace_distortion", fmt_sig(trace.average_distortion())),
    ];
    ctx.write("simulation.csv", &key_values(&rows))?;
    Ok(stdout_lines(&rows))
}

/// `couple`: the coupling report on its own, with optional Monte Carlo check.
pub fn couple(ctx: &Context) -> Result<String, CliError> {
    let problem = ctx.config.problem()?;
    let report = coupling(&problem)?;
    ctx.write("coupling.json", &serde_json::to_string_pretty(&report).expect("serializable"))?;
    ctx.write("tau.csv", &report.tau_csv())?;
    let mut rows = vec![
        ("k1", fmt_sig(report.k1)),
        ("k", fmt_sig(report.k)),
        ("reference_state", (report.reference_state + 1).to_string()),
        ("lipschitz", fmt_sig(report.lipschitz())),
    ];
    let runs = ctx.config.coupling.monte_carlo_runs;
    if runs > 0 {
        let n = problem.num_states();
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|x| (0..n).map(move |y| (x, y))).collect();
        let est = monte_carlo_tau(problem.model(), report.reference_state, &pairs, runs, ctx.seed)?;
        let mut csv = String::from("x,y,exact,mean,std_error\n");
        let mut worst_z = 0.0f64;
        for e in &est {
            let exact = report.expected_tau[e.x][e.y];
            if e.std_error > 0.0 {
                worst_z = worst_z.max((e.mean - exact).abs() / e.std_error);
            }
            let _ = writeln!(
                csv,
                "{},{},{},{},{}",
                e.x + 1,
                e.y + 1,
                fmt_sig(exact),
                fmt_sig(e.mean),
                fmt_sig(e.std_error)
            );
        }
        ctx.write("tau_monte_carlo.csv", &csv)?;
        rows.push(("max_abs_z", fmt_sig(worst_z)));
    }
    Ok(stdout_lines(&rows))
}
