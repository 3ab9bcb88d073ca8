use proptest::prelude::*;
use zdq::belief::{
    filter_update, noisy_filter_update, output_probability, symbol_probability, wasserstein1,
    BeliefGrid, Channel,
};
use zdq::quantizer::{noisy_stage_cost, stage_cost};
use zdq::source::{is_aperiodic, is_irreducible};
use zdq::{Belief, DistortionSpec, MarkovModel, Quantizer};

fn normalize(raw: Vec<f64>) -> Vec<f64> {
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

fn belief(n: usize) -> impl Strategy<Value = Belief> {
    prop::collection::vec(0.0f64..1.0, n)
        .prop_filter("nonzero", |v| v.iter().sum::<f64>() > 1e-3)
        .prop_map(|v| Belief::new(normalize(v)).unwrap())
}

fn stochastic(rows: usize, cols: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(0.01f64..1.0, cols), rows)
        .prop_map(|m| m.into_iter().map(normalize).collect())
}

fn chain(n: usize) -> impl Strategy<Value = MarkovModel> {
    stochastic(n, n).prop_map(move |p| MarkovModel::new(p, Belief::uniform(n)).unwrap())
}

fn quantizer(n: usize, m: usize) -> impl Strategy<Value = Quantizer> {
    prop::collection::vec(0..m, n).prop_map(move |l| Quantizer::new(l, m).unwrap())
}

fn distortion(n: usize) -> impl Strategy<Value = DistortionSpec> {
    prop::collection::vec(prop::collection::vec(0.0f64..3.0, n), n)
        .prop_map(|m| DistortionSpec::new(m).unwrap())
}

fn instance() -> impl Strategy<Value = (MarkovModel, Belief, Quantizer, DistortionSpec)> {
    (2usize..=4, 1usize..=3).prop_flat_map(|(n, m)| (chain(n), belief(n), quantizer(n, m), distortion(n)))
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn filter_averages_to_prediction((model, pi, q, _d) in instance()) {
        let mut mix = vec![0.0; pi.len()];
        for s in 0..q.num_symbols() {
            let p = symbol_probability(&pi, &q, s);
            if p > 1e-15 {
                let post = filter_update(&pi, &q, s, &model).unwrap();
                prop_assert!((post.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
                for (m, v) in mix.iter_mut().zip(post.probs()) {
                    *m += p * v;
                }
            }
        }
        prop_assert!(close(&mix, pi.propagate(&model).probs(), 1e-12));
    }

    #[test]
    fn noisy_filter_averages_to_prediction(
        (model, pi, q, _d) in instance(),
        eps in 0.0f64..0.5,
    ) {
        let m = q.num_symbols();
        // symmetric channel on M symbols
        let channel = Channel::new(
            (0..m)
                .map(|i| {
                    (0..m)
                        .map(|j| if m == 1 { 1.0 } else if i == j { 1.0 - eps } else { eps / (m - 1) as f64 })
                        .collect()
                })
                .collect(),
        )
        .unwrap();
        let mut mix = vec![0.0; pi.len()];
        for out in 0..m {
            let p = output_probability(&pi, &q, out, &channel);
            if p > 1e-15 {
                let post = noisy_filter_update(&pi, &q, out, &model, &channel).unwrap();
                for (a, v) in mix.iter_mut().zip(post.probs()) {
                    *a += p * v;
                }
            }
        }
        prop_assert!(close(&mix, pi.propagate(&model).probs(), 1e-12));
    }

    #[test]
    fn identity_channel_matches_noiseless((model, pi, q, d) in instance()) {
        let id = Channel::noiseless(q.num_symbols());
        prop_assert_eq!(
            noisy_stage_cost(&pi, &q, &d, &id).unwrap().to_bits(),
            stage_cost(&pi, &q, &d).unwrap().to_bits()
        );
        for s in 0..q.num_symbols() {
            if symbol_probability(&pi, &q, s) > 1e-15 {
                prop_assert_eq!(
                    noisy_filter_update(&pi, &q, s, &model, &id).unwrap(),
                    filter_update(&pi, &q, s, &model).unwrap()
                );
            }
        }
    }

    #[test]
    fn stage_cost_is_concave(
        (mu, zeta, q, d) in (2usize..=4, 1usize..=3)
            .prop_flat_map(|(n, m)| (belief(n), belief(n), quantizer(n, m), distortion(n))),
        lambda in 0.0f64..=1.0,
    ) {
        let mix = Belief::new(
            mu.probs().iter().zip(zeta.probs()).map(|(a, b)| lambda * a + (1.0 - lambda) * b).collect(),
        )
        .unwrap();
        let lhs = stage_cost(&mix, &q, &d).unwrap();
        let rhs = lambda * stage_cost(&mu, &q, &d).unwrap() + (1.0 - lambda) * stage_cost(&zeta, &q, &d).unwrap();
        prop_assert!(lhs >= rhs - 1e-12);
    }

    #[test]
    fn stage_cost_ignores_symbol_names((_model, pi, q, d) in instance(), shift in 0usize..3) {
        let m = q.num_symbols();
        let relabeled = Quantizer::new(q.labels().iter().map(|&l| (l + shift) % m).collect(), m).unwrap();
        let a = stage_cost(&pi, &q, &d).unwrap();
        let b = stage_cost(&pi, &relabeled, &d).unwrap();
        prop_assert!((a - b).abs() <= 1e-12);
        prop_assert!((stage_cost(&pi, &q.canonical(), &d).unwrap() - a).abs() <= 1e-12);
    }

    #[test]
    fn wasserstein_is_a_metric(
        (a, b, c) in (2usize..=5).prop_flat_map(|n| (belief(n), belief(n), belief(n))),
    ) {
        let ab = wasserstein1(&a, &b).unwrap();
        prop_assert_eq!(ab, wasserstein1(&b, &a).unwrap());
        prop_assert_eq!(wasserstein1(&a, &a).unwrap(), 0.0);
        prop_assert!(ab >= 0.0);
        prop_assert!(ab <= wasserstein1(&a, &c).unwrap() + wasserstein1(&c, &b).unwrap() + 1e-12);
        // ρ₁ dominates total variation on an integer-spaced alphabet
        let tv: f64 = a.probs().iter().zip(b.probs()).map(|(x, y)| (x - y).abs()).sum::<f64>() / 2.0;
        prop_assert!(tv <= ab + 1e-12);
    }

    #[test]
    fn projection_is_a_nearest_point(
        (pi, res) in (2usize..=4).prop_flat_map(|n| (belief(n), 1usize..=8)),
    ) {
        let n = pi.len();
        let grid = BeliefGrid::new(n, res).unwrap();
        let idx = grid.project(&pi);
        let got = wasserstein1(&pi, grid.point(idx)).unwrap();
        let best = grid
            .points()
            .iter()
            .map(|p| wasserstein1(&pi, p).unwrap())
            .fold(f64::INFINITY, f64::min);
        prop_assert!(got <= best + 1e-12, "projection {got} vs nearest {best}");
        prop_assert!(got <= n as f64 / (2.0 * res as f64) + 1e-12);
    }
}

fn bool_mul(a: &[Vec<bool>], b: &[Vec<bool>]) -> Vec<Vec<bool>> {
    let n = a.len();
    (0..n)
        .map(|i| (0..n).map(|j| (0..n).any(|k| a[i][k] && b[k][j])).collect())
        .collect()
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 { a } else { gcd(b, a % b) }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn graph_tests_match_matrix_powers(
        pattern in (1usize..=4).prop_flat_map(|n| prop::collection::vec(prop::collection::vec(any::<bool>(), n), n)),
    ) {
        let n = pattern.len();
        let mut pattern = pattern;
        // every row needs some mass
        for (i, row) in pattern.iter_mut().enumerate() {
            if !row.iter().any(|&b| b) {
                row[(i + 1) % n] = true;
            }
        }
        let p: Vec<Vec<f64>> = pattern
            .iter()
            .map(|row| {
                let k = row.iter().filter(|&&b| b).count() as f64;
                row.iter().map(|&b| if b { 1.0 / k } else { 0.0 }).collect()
            })
            .collect();
        let model = MarkovModel::new(p, Belief::uniform(n)).unwrap();

        // reachability in 1..=n steps and return times up to n²
        let mut power = pattern.clone();
        let mut reach = pattern.clone();
        let mut returns = vec![0usize; n];
        for k in 1..=n * n {
            if k > 1 {
                power = bool_mul(&power, &pattern);
            }
            for i in 0..n {
                if power[i][i] {
                    returns[i] = gcd(returns[i], k);
                }
                for j in 0..n {
                    if k <= n {
                        reach[i][j] |= power[i][j];
                    }
                }
            }
        }
        let irreducible = (0..n).all(|i| (0..n).all(|j| i == j || reach[i][j]));
        let aperiodic = returns.iter().all(|&g| g == 1);
        prop_assert_eq!(is_irreducible(&model), irreducible);
        prop_assert_eq!(is_aperiodic(&model), aperiodic);
    }
}
