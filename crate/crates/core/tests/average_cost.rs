//! Grid solutions of the infinite-horizon problems, checked against coupling
//! bounds and exact finite-horizon evaluation.

use zdq::coupling::{coupling_report, verify_lipschitz};
use zdq::quantizer::{enumerate_quantizers, stage_cost, DedupMode, DEFAULT_ACTION_CAP};
use zdq::solver::{
    acoe_residual, discounted_value_iteration, evaluate_policy_exact, finite_horizon_dp,
    DEFAULT_BELIEF_CAP, DEFAULT_TREE_CAP,
};
use zdq::source::stationary_distribution;
use zdq::{
    solve_average_cost, AverageCostMethod, AverageCostOptions, Belief, DistortionSpec, GridMdp,
    MarkovModel, Problem,
};

fn companion() -> MarkovModel {
    MarkovModel::stationary(vec![
        vec![0.8, 0.15, 0.05],
        vec![0.1, 0.8, 0.1],
        vec![0.05, 0.15, 0.8],
    ])
    .unwrap()
}

fn companion_problem() -> Problem {
    Problem::noiseless(companion(), DistortionSpec::hamming(3), 2).unwrap()
}

#[test]
fn iid_gain_is_best_memoryless_quantizer() {
    let p = vec![0.5, 0.3, 0.2];
    let model = MarkovModel::new(vec![p.clone(); 3], Belief::new(p.clone()).unwrap()).unwrap();
    let d = DistortionSpec::new(vec![vec![0.0, 1.0, 4.0], vec![1.0, 0.0, 1.0], vec![4.0, 1.0, 0.0]]).unwrap();
    let problem = Problem::noiseless(model.clone(), d.clone(), 2).unwrap();
    let mdp = GridMdp::build(&problem, 30, DEFAULT_ACTION_CAP).unwrap();
    let t = solve_average_cost(&mdp, &AverageCostOptions::default()).unwrap();
    let pi = Belief::new(p).unwrap();
    let best = enumerate_quantizers(3, 2, DedupMode::Labeled, 100)
        .unwrap()
        .iter()
        .map(|q| stage_cost(&pi, q, &d).unwrap())
        .fold(f64::INFINITY, f64::min);
    let report = coupling_report(&model, &d).unwrap();
    assert!((t.gain - best).abs() <= 1e-6 + report.grid_slack(30), "{} vs {best}", t.gain);
}

#[test]
fn acoe_certificate_and_method_agreement() {
    let problem = companion_problem();
    let mdp = GridMdp::build(&problem, 20, DEFAULT_ACTION_CAP).unwrap();
    let report = coupling_report(problem.model(), problem.distortion()).unwrap();
    let slack = report.grid_slack(20);
    let rvi = solve_average_cost(&mdp, &AverageCostOptions::default()).unwrap();
    let vd = solve_average_cost(
        &mdp,
        &AverageCostOptions {
            method: AverageCostMethod::VanishingDiscount,
            ..Default::default()
        },
    )
    .unwrap();
    assert!(acoe_residual(&rvi, &mdp).unwrap() <= rvi.tolerance + slack);
    assert!(acoe_residual(&vd, &mdp).unwrap() <= vd.tolerance + slack);
    assert!((rvi.gain - vd.gain).abs() <= 2e-3, "rvi {} vd {}", rvi.gain, vd.gain);
    assert!(rvi.gain > 0.05, "companion should not be degenerate");
    // |h_β| <= K/2 structure, up to the grid budget
    assert!(vd.h_sup() <= report.k / 2.0 + slack);
}

#[test]
fn convergence_rate_from_several_starts() {
    let problem = companion_problem();
    let n = 20;
    let mdp = GridMdp::build(&problem, n, DEFAULT_ACTION_CAP).unwrap();
    let t = solve_average_cost(&mdp, &AverageCostOptions::default()).unwrap();
    let report = coupling_report(problem.model(), problem.distortion()).unwrap();
    let slack = report.grid_slack(n);
    let policy = t.stationary_policy().unwrap();
    let starts = [
        stationary_distribution(problem.model()).unwrap(),
        Belief::point_mass(3, 0),
        Belief::point_mass(3, 1),
        Belief::point_mass(3, 2),
    ];
    for start in &starts {
        for horizon in 1..=12 {
            let j = evaluate_policy_exact(&problem, &policy, horizon, start, DEFAULT_BELIEF_CAP).unwrap();
            let tf = horizon as f64;
            assert!(
                tf * (j - t.gain) <= report.k + tf * slack,
                "T={horizon} start={:?}: J={j} g={}",
                start.probs(),
                t.gain
            );
            assert!(j - t.gain <= 2.0 * t.h_sup() / tf + slack);
        }
    }
}

#[test]
fn optimal_finite_horizon_cost_approaches_gain_from_every_start() {
    let problem = companion_problem();
    let n = 20;
    let mdp = GridMdp::build(&problem, n, DEFAULT_ACTION_CAP).unwrap();
    let t = solve_average_cost(&mdp, &AverageCostOptions::default()).unwrap();
    let report = coupling_report(problem.model(), problem.distortion()).unwrap();
    // the reachable tree grows like (actions × symbols)^T
    let horizon = 6;
    for x in 0..3 {
        let p = problem.with_model(problem.model().with_initial(Belief::point_mass(3, x)).unwrap()).unwrap();
        let jt = finite_horizon_dp(&p, horizon, DEFAULT_TREE_CAP).unwrap().value();
        let gap = (jt - t.gain).abs();
        assert!(gap * horizon as f64 <= report.k + horizon as f64 * report.grid_slack(n), "x={x} gap {gap}");
    }
}

#[test]
fn discounted_values_are_lipschitz_in_rho1() {
    let problem = companion_problem();
    let n = 12;
    let mdp = GridMdp::build(&problem, n, DEFAULT_ACTION_CAP).unwrap();
    let report = coupling_report(problem.model(), problem.distortion()).unwrap();
    let len = mdp.grid().len();
    let pairs: Vec<(usize, usize)> = (0..len).flat_map(|i| (0..len).map(move |j| (i, j))).collect();
    for beta in [0.5, 0.9, 0.95] {
        let excess = verify_lipschitz(&mdp, beta, 1e-10, report.k1, &pairs).unwrap();
        assert!(excess <= 2.0 * report.grid_slack(n), "beta {beta}: excess {excess}");
    }
}

#[test]
fn scaling_distortion_scales_gain() {
    let problem = companion_problem();
    let scaled = problem.with_distortion(problem.distortion().scaled(2.5)).unwrap();
    let a = GridMdp::build(&problem, 12, DEFAULT_ACTION_CAP).unwrap();
    let b = GridMdp::build(&scaled, 12, DEFAULT_ACTION_CAP).unwrap();
    let ta = solve_average_cost(&a, &AverageCostOptions::default()).unwrap();
    let tb = solve_average_cost(&b, &AverageCostOptions::default()).unwrap();
    assert!((tb.gain - 2.5 * ta.gain).abs() <= 1e-8);
    let da = discounted_value_iteration(&a, 0.9, 1e-10, 100_000).unwrap();
    let db = discounted_value_iteration(&b, 0.9, 1e-10, 100_000).unwrap();
    for (x, y) in da.values.values.iter().zip(&db.values.values) {
        assert!((y - 2.5 * x).abs() <= 1e-8);
    }
}

#[test]
fn blind_iid_discounted_value() {
    let model = MarkovModel::new(vec![vec![0.5, 0.5]; 2], Belief::uniform(2)).unwrap();
    let problem = Problem::noiseless(model, DistortionSpec::hamming(2), 1).unwrap();
    let mdp = GridMdp::build(&problem, 10, DEFAULT_ACTION_CAP).unwrap();
    let sol = discounted_value_iteration(&mdp, 0.5, 1e-12, 10_000).unwrap();
    let centre = mdp.grid().project(&Belief::uniform(2));
    assert!((sol.values.values[centre] - 1.0).abs() <= 1e-11);
    for (i, p) in mdp.grid().points().iter().enumerate() {
        let c = 1.0 - p[0].max(p[1]);
        assert!((sol.values.values[i] - (c + 0.5)).abs() <= 1e-11);
    }
}

#[test]
fn gain_is_stable_under_grid_refinement() {
    let problem = companion_problem();
    let gains: Vec<f64> = [20, 40]
        .iter()
        .map(|&n| {
            let mdp = GridMdp::build(&problem, n, DEFAULT_ACTION_CAP).unwrap();
            solve_average_cost(&mdp, &AverageCostOptions::default()).unwrap().gain
        })
        .collect();
    assert!((gains[0] - gains[1]).abs() <= 2e-3, "{gains:?}");
}
