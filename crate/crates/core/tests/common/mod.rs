//! Random model generators and brute-force oracles shared by the integration
//! and acceptance suites. The oracles index tables with their own arithmetic
//! so they do not share code with the library under test.

#![allow(dead_code)]

use chain_ipf::cml_ipf::LagrangeProblem;
use chain_ipf::sbn::SigmoidNet;
use chain_ipf::{
    ChainFactorGraph, Cluster, ComponentSet, Dataset, Evidence, Potential, PotentialTable,
    VariableSpace,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn space(rng: &mut ChaCha8Rng, n: usize, max_card: usize) -> VariableSpace {
    let cards: Vec<usize> = (0..n).map(|_| rng.random_range(2..=max_card)).collect();
    let names: Vec<String> = (0..n).map(|i| format!("v{i}")).collect();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    VariableSpace::with_cardinalities(&refs, &cards).unwrap()
}

/// Entries drawn log-uniformly from `[e^-2, e^2]`.
pub fn positive_values(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-2.0..2.0f64).exp()).collect()
}

pub fn randomize(rng: &mut ChaCha8Rng, graph: &mut ChainFactorGraph) {
    for id in 0..graph.potentials().len() {
        let len = graph.table(id).values.len();
        graph.set_values(id, positive_values(rng, len));
    }
}

fn random_subset(rng: &mut ChaCha8Rng, pool: &[usize], max: usize) -> Vec<usize> {
    let k = rng.random_range(0..=max.min(pool.len()));
    let mut pool = pool.to_vec();
    let mut out = Vec::with_capacity(k);
    for _ in 0..k {
        out.push(pool.swap_remove(rng.random_range(0..pool.len())));
    }
    out.sort_unstable();
    out
}

/// Random DAG over at most `max_vars` variables with at most two parents
/// each and random positive potentials.
pub fn random_bn(rng: &mut ChaCha8Rng, max_vars: usize, max_card: usize) -> ChainFactorGraph {
    let n = rng.random_range(2..=max_vars);
    let space = space(rng, n, max_card);
    let parents: Vec<Vec<usize>> = (0..n)
        .map(|i| random_subset(rng, &(0..i).collect::<Vec<_>>(), 2))
        .collect();
    let mut g = ChainFactorGraph::bayesian_network(space, &parents).unwrap();
    randomize(rng, &mut g);
    g
}

/// Single-component model whose clusters cover every variable.
pub fn random_undirected(rng: &mut ChaCha8Rng, max_vars: usize, max_card: usize) -> ChainFactorGraph {
    let n = rng.random_range(2..=max_vars);
    let space = space(rng, n, max_card);
    let all: Vec<usize> = (0..n).collect();
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for _ in 0..rng.random_range(1..=3) {
        let c = random_subset(rng, &all, 3);
        if !c.is_empty() && !clusters.contains(&c) {
            clusters.push(c);
        }
    }
    for v in 0..n {
        if !clusters.iter().any(|c| c.contains(&v)) {
            clusters.push(vec![v]);
        }
    }
    let mut g = ChainFactorGraph::undirected(space, &clusters).unwrap();
    randomize(rng, &mut g);
    g
}

/// Options for [`random_chain_graph`].
#[derive(Clone, Copy)]
pub struct ChainShape {
    pub max_vars: usize,
    pub max_card: usize,
    /// Every member cluster contains the component's parents.
    pub joint_parents: bool,
    /// Parents drawn only from the first component's chain variables.
    pub parents_from_first: bool,
}

/// Random chain graph: variables are split into consecutive chain
/// components, each with parents among earlier variables and one to three
/// member clusters.
pub fn random_chain_graph(rng: &mut ChaCha8Rng, shape: ChainShape) -> ChainFactorGraph {
    let n = rng.random_range(3..=shape.max_vars);
    let space = space(rng, n, shape.max_card);
    let cards = space.cardinalities().to_vec();
    let mut bounds = vec![0];
    while *bounds.last().unwrap() < n {
        let start = *bounds.last().unwrap();
        let size = rng.random_range(1..=2).min(n - start);
        bounds.push(start + size);
    }
    let mut components = Vec::new();
    let mut potentials: Vec<Potential> = Vec::new();
    for w in bounds.windows(2) {
        let chain: Vec<usize> = (w[0]..w[1]).collect();
        let pool: Vec<usize> = if shape.parents_from_first {
            if w[0] == 0 {
                Vec::new()
            } else {
                (0..bounds[1]).collect()
            }
        } else {
            (0..w[0]).collect()
        };
        let parents = random_subset(rng, &pool, 2);
        let mut members_vars: Vec<Vec<usize>> = Vec::new();
        for _ in 0..rng.random_range(1..=3) {
            let mut vars = random_subset(rng, &chain, chain.len());
            if vars.is_empty() {
                vars.push(chain[rng.random_range(0..chain.len())]);
            }
            let extra = if shape.joint_parents {
                parents.clone()
            } else {
                random_subset(rng, &parents, parents.len())
            };
            let mut all: Vec<usize> = extra.into_iter().chain(vars).collect();
            all.sort_unstable();
            if !members_vars.contains(&all) {
                members_vars.push(all);
            }
        }
        let covered = |v: usize, m: &[Vec<usize>]| m.iter().any(|c| c.contains(&v));
        let missing: Vec<usize> = chain
            .iter()
            .chain(&parents)
            .copied()
            .filter(|&v| !covered(v, &members_vars))
            .collect();
        if !missing.is_empty() {
            let mut all: Vec<usize> = parents.iter().copied().chain(chain.iter().copied()).collect();
            all.sort_unstable();
            all.dedup();
            if !members_vars.contains(&all) {
                members_vars.push(all);
            }
        }
        let mut members = Vec::new();
        for vars in members_vars {
            members.push(potentials.len());
            let len: usize = vars.iter().map(|&v| cards[v]).product();
            potentials.push(Potential {
                id: format!("psi_{}", potentials.len()),
                table: PotentialTable::new(Cluster::new(vars).unwrap(), positive_values(rng, len)),
            });
        }
        components.push(ComponentSet {
            id: format!("A{}", components.len()),
            chain: Cluster::new(chain).unwrap(),
            parents: Cluster::new(parents).unwrap(),
            members,
        });
    }
    ChainFactorGraph::new(space, components, potentials).unwrap()
}

pub fn cards_of(graph: &ChainFactorGraph) -> Vec<usize> {
    graph.space().variables().iter().map(|v| v.cardinality()).collect()
}

/// Every joint configuration in lexicographic order, last variable fastest.
pub fn all_configs(cards: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for &c in cards {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..c).map(move |s| {
                    let mut q = p.clone();
                    q.push(s);
                    q
                })
            })
            .collect();
    }
    out
}

fn entry(graph: &ChainFactorGraph, cards: &[usize], id: usize, x: &[usize]) -> f64 {
    let t = graph.table(id);
    let mut idx = 0;
    for &v in t.cluster.vars() {
        idx = idx * cards[v] + x[v];
    }
    t.values[idx]
}

/// Joint distribution by direct evaluation of the component factorization:
/// each component's product of member potentials divided by its sum over
/// the chain variables at the same parent configuration.
pub fn oracle_joint(graph: &ChainFactorGraph) -> Vec<f64> {
    let cards = cards_of(graph);
    let configs = all_configs(&cards);
    configs
        .iter()
        .map(|x| {
            graph
                .components()
                .iter()
                .map(|c| {
                    let num = |y: &[usize]| c.members.iter().map(|&m| entry(graph, &cards, m, y)).product::<f64>();
                    let z: f64 = configs
                        .iter()
                        .filter(|y| (0..cards.len()).all(|v| c.chain.contains(v) || y[v] == x[v]))
                        .map(|y| num(y))
                        .sum();
                    num(x) / z
                })
                .product()
        })
        .collect()
}

/// Sum of `joint` over configurations consistent with `states`.
pub fn oracle_mass(cards: &[usize], joint: &[f64], states: &[Option<usize>]) -> f64 {
    all_configs(cards)
        .iter()
        .zip(joint)
        .filter(|(x, _)| states.iter().zip(x.iter()).all(|(s, &v)| s.is_none_or(|s| s == v)))
        .map(|(_, p)| p)
        .sum()
}

/// Average log-likelihood from the oracle joint.
pub fn oracle_log_likelihood(graph: &ChainFactorGraph, data: &Dataset) -> f64 {
    let cards = cards_of(graph);
    let joint = oracle_joint(graph);
    let n: f64 = data.records().iter().map(|r| r.weight).sum();
    data.records()
        .iter()
        .map(|r| r.weight * oracle_mass(&cards, &joint, &r.evidence.states()).ln())
        .sum::<f64>()
        / n
}

/// Average conditional log-likelihood from the oracle joint.
pub fn oracle_conditional_log_likelihood(graph: &ChainFactorGraph, data: &Dataset) -> f64 {
    let cards = cards_of(graph);
    let joint = oracle_joint(graph);
    let n: f64 = data.records().iter().map(|r| r.weight).sum();
    data.records()
        .iter()
        .map(|r| {
            let all = oracle_mass(&cards, &joint, &r.evidence.states());
            let clamped = oracle_mass(&cards, &joint, &r.evidence.clamped_states());
            r.weight * (all / clamped).ln()
        })
        .sum::<f64>()
        / n
}

/// Marginal of `joint` over `vars`, in the table layout of `vars`.
pub fn oracle_marginal(cards: &[usize], joint: &[f64], vars: &[usize]) -> Vec<f64> {
    let len: usize = vars.iter().map(|&v| cards[v]).product();
    let mut out = vec![0.0; len];
    for (x, p) in all_configs(cards).iter().zip(joint) {
        let mut idx = 0;
        for &v in vars {
            idx = idx * cards[v] + x[v];
        }
        out[idx] += p;
    }
    out
}

/// Configurations sampled from `joint` by inverse CDF.
pub fn sample_configs(rng: &mut ChaCha8Rng, cards: &[usize], joint: &[f64], count: usize) -> Vec<Vec<usize>> {
    let configs = all_configs(cards);
    (0..count)
        .map(|_| {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for (x, p) in configs.iter().zip(joint) {
                acc += p;
                if u < acc {
                    return x.clone();
                }
            }
            configs.last().unwrap().clone()
        })
        .collect()
}

/// Complete records with random positive weights.
pub fn complete_dataset(rng: &mut ChaCha8Rng, graph: &ChainFactorGraph, count: usize) -> Dataset {
    let cards = cards_of(graph);
    let joint = oracle_joint(graph);
    let mut d = Dataset::new(cards.len());
    for x in sample_configs(rng, &cards, &joint, count) {
        d.push(Evidence::complete(&x), rng.random_range(0.5..2.0)).unwrap();
    }
    d
}

/// Records sampled from the model with each cell hidden with probability
/// `p_missing`; at least one cell stays observed.
pub fn incomplete_dataset(rng: &mut ChaCha8Rng, graph: &ChainFactorGraph, count: usize, p_missing: f64) -> Dataset {
    let cards = cards_of(graph);
    let joint = oracle_joint(graph);
    let mut d = Dataset::new(cards.len());
    for x in sample_configs(rng, &cards, &joint, count) {
        let keep = rng.random_range(0..cards.len());
        let mut ev = Evidence::empty(cards.len());
        for (v, &s) in x.iter().enumerate() {
            if v == keep || !rng.random_bool(p_missing) {
                ev = ev.observe(v, s);
            }
        }
        d.push(ev, 1.0).unwrap();
    }
    d
}

/// Records in which `clamped` variables are clamped, the others observed or
/// (with probability `p_missing`) hidden; at least one variable is observed.
pub fn conditional_dataset(
    rng: &mut ChaCha8Rng,
    graph: &ChainFactorGraph,
    clamped: &[usize],
    count: usize,
    p_missing: f64,
) -> Dataset {
    let cards = cards_of(graph);
    let joint = oracle_joint(graph);
    let free: Vec<usize> = (0..cards.len()).filter(|v| !clamped.contains(v)).collect();
    let mut d = Dataset::new(cards.len());
    for x in sample_configs(rng, &cards, &joint, count) {
        let keep = free[rng.random_range(0..free.len())];
        let mut ev = Evidence::empty(cards.len());
        for (v, &s) in x.iter().enumerate() {
            if clamped.contains(&v) {
                ev = ev.clamp(v, s);
            } else if v == keep || !rng.random_bool(p_missing) {
                ev = ev.observe(v, s);
            }
        }
        d.push(ev, 1.0).unwrap();
    }
    d
}

/// Sigmoid net with random sparse connectivity, weights, biases and top
/// marginals.
pub fn random_net(rng: &mut ChaCha8Rng, max_top: usize, max_bottom: usize) -> SigmoidNet {
    let n_top = rng.random_range(1..=max_top);
    let n_bottom = rng.random_range(1..=max_bottom);
    let tops: Vec<usize> = (0..n_top).collect();
    let parents: Vec<Vec<usize>> = (0..n_bottom).map(|_| random_subset(rng, &tops, n_top)).collect();
    let weights = parents
        .iter()
        .map(|p| p.iter().map(|_| rng.random_range(-1.5..1.5)).collect())
        .collect();
    SigmoidNet {
        n_top,
        n_bottom,
        parents,
        weights,
        biases: (0..n_bottom).map(|_| rng.random_range(-1.0..1.0)).collect(),
        top_marginals: (0..n_top).map(|_| rng.random_range(0.1..0.9)).collect(),
    }
}

/// Average log-likelihood of complete ±1 data under the sigmoid
/// parameterization, by direct evaluation of `P(y=+1|x) = σ(2(h + w·x))`.
pub fn oracle_sbn_log_likelihood(net: &SigmoidNet, data: &Dataset) -> f64 {
    let s = |state: usize| if state == 1 { 1.0 } else { -1.0 };
    let mut acc = 0.0;
    let mut n = 0.0;
    for r in data.records() {
        let x: Vec<usize> = r.evidence.states().into_iter().map(Option::unwrap).collect();
        let mut l = 0.0;
        for j in 0..net.n_top {
            let p = net.top_marginals[j];
            l += if x[j] == 1 { p } else { 1.0 - p }.ln();
        }
        for i in 0..net.n_bottom {
            let field = net.biases[i]
                + net.parents[i]
                    .iter()
                    .zip(&net.weights[i])
                    .map(|(&j, w)| w * s(x[j]))
                    .sum::<f64>();
            let p_plus = 1.0 / (1.0 + (-2.0 * field).exp());
            l += if x[net.n_top + i] == 1 { p_plus } else { 1.0 - p_plus }.ln();
        }
        acc += r.weight * l;
        n += r.weight;
    }
    acc / n
}

/// Random complete ±1 patterns for a net, uniform over configurations.
pub fn random_patterns(rng: &mut ChaCha8Rng, net: &SigmoidNet, count: usize) -> Dataset {
    let n = net.n_top + net.n_bottom;
    let mut d = Dataset::new(n);
    for _ in 0..count {
        let x: Vec<usize> = (0..n).map(|_| rng.random_range(0..2)).collect();
        d.push(Evidence::complete(&x), 1.0).unwrap();
    }
    d
}

/// Random multiplier problem with some zero-mass entries; every slice keeps
/// positive mass.
pub fn random_problem(r: &mut ChaCha8Rng) -> LagrangeProblem {
    let n_slices = r.random_range(1..=4);
    let mut slices = Vec::new();
    let mut len = 0;
    for _ in 0..n_slices {
        let k = r.random_range(1..=6);
        slices.push((len..len + k).collect::<Vec<_>>());
        len += k;
    }
    let scale = 10f64.powf(r.random_range(-3.0..3.0));
    let mut p_hat: Vec<f64> = (0..len).map(|_| if r.random_bool(0.15) { 0.0 } else { r.random::<f64>() }).collect();
    for s in &slices {
        if s.iter().all(|&e| p_hat[e] == 0.0) {
            p_hat[s[0]] = 0.5;
        }
    }
    let total: f64 = p_hat.iter().sum();
    p_hat.iter_mut().for_each(|p| *p /= total);
    let g = (0..len).map(|_| scale * r.random_range(-3.0..3.0f64).exp()).collect();
    let h = (0..len).map(|_| r.random_range(-3.0..3.0f64).exp()).collect();
    LagrangeProblem { p_hat, g, h, slices }
}
