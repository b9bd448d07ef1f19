mod common;

use approx::assert_abs_diff_eq;
use chain_ipf::sbn::{
    fit_cg, fit_ipf, fit_sd, generate_patterns, graph_to_weights, sbn_gradient, sbn_log_likelihood,
    weights_to_graph, SigmoidNet,
};
use chain_ipf::{component_conditional, log_likelihood, rescale_potential, FitConfig};
use common::*;
use proptest::prelude::*;
use rand::Rng;

fn conditional_table(net: &SigmoidNet) -> Vec<f64> {
    let g = weights_to_graph(net).unwrap();
    let cards = vec![2; net.n_vars()];
    let mut out = Vec::new();
    for x in all_configs(&cards) {
        for a in 0..g.components().len() {
            out.push(component_conditional(&g, a, &x).unwrap());
        }
    }
    out
}

#[test]
fn graph_conditionals_follow_the_logistic_law() {
    let mut r = rng(51);
    for _ in 0..50 {
        let net = random_net(&mut r, 3, 3);
        let g = weights_to_graph(&net).unwrap();
        for x in all_configs(&vec![2; net.n_vars()]) {
            let s = |v: usize| if x[v] == 1 { 1.0 } else { -1.0 };
            for i in 0..net.n_bottom {
                let field: f64 = net.biases[i]
                    + net.parents[i].iter().zip(&net.weights[i]).map(|(&j, w)| w * s(j)).sum::<f64>();
                let p_plus = 1.0 / (1.0 + (-2.0 * field).exp());
                let y = net.n_top + i;
                let want = if x[y] == 1 { p_plus } else { 1.0 - p_plus };
                let a = g.component_index(&format!("y{}", i + 1)).unwrap();
                assert_abs_diff_eq!(component_conditional(&g, a, &x).unwrap(), want, epsilon = 1e-12);
            }
            for j in 0..net.n_top {
                let p = net.top_marginals[j];
                let want = if x[j] == 1 { p } else { 1.0 - p };
                assert_abs_diff_eq!(component_conditional(&g, j, &x).unwrap(), want, epsilon = 1e-12);
            }
        }
    }
}

#[test]
fn transform_round_trip_recovers_parameters() {
    let mut r = rng(52);
    for _ in 0..50 {
        let net = random_net(&mut r, 4, 4);
        let back = graph_to_weights(&weights_to_graph(&net).unwrap(), net.n_top).unwrap();
        assert_eq!(back.parents, net.parents);
        for (a, b) in back.params().iter().zip(net.params()) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
        for (a, b) in back.top_marginals.iter().zip(&net.top_marginals) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }
}

#[test]
fn gauge_rescaled_potentials_keep_conditionals_through_the_round_trip() {
    let mut r = rng(53);
    for _ in 0..30 {
        let net = random_net(&mut r, 3, 3);
        let mut g = weights_to_graph(&net).unwrap();
        for id in 0..g.potentials().len() {
            g = rescale_potential(&g, id, r.random_range(-3.0..3.0f64).exp()).unwrap();
        }
        let back = graph_to_weights(&g, net.n_top).unwrap();
        for (a, b) in conditional_table(&back).iter().zip(conditional_table(&net)) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-10);
        }
    }
}

#[test]
fn direct_and_graph_likelihoods_agree() {
    let mut r = rng(54);
    for _ in 0..30 {
        let net = random_net(&mut r, 3, 3);
        let data = random_patterns(&mut r, &net, 10);
        let direct = sbn_log_likelihood(&net, &data).unwrap();
        assert_abs_diff_eq!(direct, oracle_sbn_log_likelihood(&net, &data), epsilon = 1e-12);
        let g = weights_to_graph(&net).unwrap();
        assert_abs_diff_eq!(direct, log_likelihood(&g, &data).unwrap(), epsilon = 1e-12);
    }
}

#[test]
fn gradient_vanishes_at_the_fitted_optimum() {
    let mut r = rng(55);
    let mut truth = random_net(&mut r, 2, 2);
    truth.top_marginals = vec![0.5; truth.n_top];
    let data = random_patterns(&mut r, &truth, 400);
    let start = SigmoidNet {
        weights: truth.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
        biases: vec![0.0; truth.n_bottom],
        ..truth.clone()
    };
    let trace = fit_cg(&start, &data, 500).unwrap();
    let fitted = graph_to_weights(&trace.graph, start.n_top).unwrap();
    let grad = sbn_gradient(&fitted, &data).unwrap().flatten();
    assert!(grad.iter().all(|g| g.abs() < 1e-6), "{grad:?}");
}

#[test]
fn patterns_are_unbiased_coin_flips() {
    let data = generate_patterns(5, 5, 10_000, 2024);
    let n = data.len() as f64;
    let mut within = 0;
    for v in 0..10 {
        let mean: f64 = data
            .records()
            .iter()
            .map(|r| if r.evidence.state(v).unwrap() == 1 { 1.0 } else { -1.0 })
            .sum::<f64>()
            / n;
        if mean.abs() < 3.0 / n.sqrt() {
            within += 1;
        }
    }
    assert!(within >= 10 * 95 / 100);
    assert_eq!(generate_patterns(5, 5, 10, 7), generate_patterns(5, 5, 10, 7));
    assert_ne!(generate_patterns(5, 5, 10, 7), generate_patterns(5, 5, 10, 8));
}

#[test]
fn top_marginals_stay_fixed_under_every_optimizer() {
    let net = SigmoidNet::fully_connected(5, 5);
    let data = generate_patterns(5, 5, 10, 3);
    let config = FitConfig { max_cycles: 40, potential_floor: 1e-12, ..FitConfig::default() };
    for trace in [fit_ipf(&net, &data, &config).unwrap(), fit_cg(&net, &data, 40).unwrap(), fit_sd(&net, &data, 40).unwrap()] {
        let fitted = graph_to_weights(&trace.graph, 5).unwrap();
        for p in fitted.top_marginals {
            assert_abs_diff_eq!(p, 0.5, epsilon = 1e-12);
        }
    }
}

#[test]
fn steepest_ascent_trails_conjugate_gradient() {
    let mut behind = 0;
    for seed in 0..100 {
        let net = SigmoidNet::fully_connected(5, 5);
        let data = generate_patterns(5, 5, 10, seed);
        let cg = fit_cg(&net, &data, 50).unwrap().final_objective();
        let sd = fit_sd(&net, &data, 50).unwrap().final_objective();
        if sd <= cg + 1e-6 {
            behind += 1;
        }
    }
    assert!(behind >= 80, "sd <= cg on {behind}/100");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn gradient_matches_central_differences(seed in any::<u64>()) {
        let mut r = rng(seed);
        let net = random_net(&mut r, 4, 4);
        let data = random_patterns(&mut r, &net, 10);
        let grad = sbn_gradient(&net, &data).unwrap().flatten();
        let scale = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        let x0 = net.params();
        let step = 1e-5;
        for k in 0..x0.len() {
            let at = |t: f64| {
                let mut n = net.clone();
                let mut x = x0.clone();
                x[k] += t;
                n.set_params(&x);
                oracle_sbn_log_likelihood(&n, &data)
            };
            let fd = (at(step) - at(-step)) / (2.0 * step);
            prop_assert!((grad[k] - fd).abs() <= 1e-6 * fd.abs().max(scale).max(1e-3), "param {k}: {} vs {fd}", grad[k]);
        }
    }

    #[test]
    fn gradient_fits_are_monotone(seed in any::<u64>()) {
        let mut r = rng(seed);
        let net = random_net(&mut r, 3, 3);
        let data = random_patterns(&mut r, &net, 8);
        for trace in [fit_cg(&net, &data, 25).unwrap(), fit_sd(&net, &data, 25).unwrap()] {
            for w in trace.objectives().windows(2) {
                prop_assert!(w[1] >= w[0] - 1e-10);
            }
        }
    }
}
