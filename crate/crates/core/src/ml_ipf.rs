//! Generalized IPF for maximum likelihood.
//!
//! Each coordinate step maximizes the auxiliary function
//! `F_α(ψ) = Σ P̃^D(x_α) log ψ(x_α) − Σ g̃_α(x_α) ψ(x_α)` in closed form,
//! `ψ* = P̃^D / g̃_α`, where `P̃^D` is the EM-completed data distribution under
//! the current parameters. Steps never decrease the likelihood.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::inference::{completed_marginal_with, log_likelihood_with, Dataset, MarginalTable};
use crate::model::{validate_graph, ChainFactorGraph, ClusterId, Evaluator, PotentialTable};
use crate::table::{flat_index, for_each_config, table_len};

/// Order in which clusters are visited within a cycle.
#[derive(Debug, Clone, PartialEq)]
pub enum Schedule {
    /// Every potential, in declaration order.
    Declaration,
    Explicit(Vec<ClusterId>),
    /// Declaration order permuted once per fit with ChaCha8 seeded by `seed`.
    Shuffled { seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub max_cycles: usize,
    /// Stop when the largest `|Δ log ψ|` over a cycle falls below this.
    pub tol: f64,
    /// Entries below the floor are lifted to it after each update.
    pub potential_floor: f64,
    /// Renormalize every updated table to max entry 1 after each cycle.
    pub rescale_each_cycle: bool,
    /// Record the objective after every single cluster update.
    pub record_steps: bool,
    pub schedule: Schedule,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            max_cycles: 500,
            tol: 1e-7,
            potential_floor: 0.0,
            rescale_each_cycle: true,
            record_steps: false,
            schedule: Schedule::Declaration,
        }
    }
}

impl FitConfig {
    pub(crate) fn check(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument("tol must be positive".into()));
        }
        if self.max_cycles == 0 {
            return Err(Error::InvalidArgument("max_cycles must be positive".into()));
        }
        if !(self.potential_floor >= 0.0 && self.potential_floor.is_finite()) {
            return Err(Error::InvalidArgument(
                "potential_floor must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxCycles,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleRecord {
    pub cycle: usize,
    pub objective: f64,
    /// Elapsed wall time since the start of the fit, in milliseconds.
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub cycle: usize,
    pub cluster: ClusterId,
    pub objective: f64,
    /// Largest `|Z_A − 1|` after the step; recorded by joint-parents fits.
    pub normalizer_deviation: Option<f64>,
}

/// Objective per cycle (cycle 0 is the initial model) plus the final model.
#[derive(Debug, Clone, PartialEq)]
pub struct FitTrace {
    pub optimizer: String,
    pub seed: Option<u64>,
    pub cycles: Vec<CycleRecord>,
    pub steps: Vec<StepRecord>,
    pub graph: ChainFactorGraph,
    pub termination: Termination,
}

impl FitTrace {
    pub fn objectives(&self) -> Vec<f64> {
        self.cycles.iter().map(|c| c.objective).collect()
    }

    pub fn final_objective(&self) -> f64 {
        self.cycles.last().map_or(f64::NAN, |c| c.objective)
    }
}

pub(crate) fn resolve_schedule(graph: &ChainFactorGraph, schedule: &Schedule) -> Result<Vec<ClusterId>> {
    let n = graph.potentials().len();
    match schedule {
        Schedule::Declaration => Ok((0..n).collect()),
        Schedule::Explicit(ids) => {
            if let Some(&bad) = ids.iter().find(|&&i| i >= n) {
                return Err(Error::InvalidArgument(format!("unknown cluster {bad} in schedule")));
            }
            Ok(ids.clone())
        }
        Schedule::Shuffled { seed } => {
            let mut ids: Vec<ClusterId> = (0..n).collect();
            ids.shuffle(&mut ChaCha8Rng::seed_from_u64(*seed));
            Ok(ids)
        }
    }
}

/// `g̃_α(x_α) = Σ_{x'_A} P̃^D(x'_π) Ψ̃_{A∖α}(x'_A) I_{x_α}(x'_α) / Z̃_A(x'_π)`.
///
/// `parent_marginal` is the completed marginal over the owning component's
/// parent set, in the component's parent order.
pub fn g_alpha(
    graph: &ChainFactorGraph,
    parent_marginal: &MarginalTable,
    cluster: ClusterId,
) -> Result<Vec<f64>> {
    let ev = Evaluator::new(graph);
    g_alpha_with(&ev, parent_marginal, cluster)
}

pub(crate) fn g_alpha_with(
    ev: &Evaluator<'_>,
    parent_marginal: &MarginalTable,
    cluster: ClusterId,
) -> Result<Vec<f64>> {
    let graph = ev.graph();
    let a = graph.owner(cluster);
    let comp = graph.component(a);
    let cards = graph.cardinalities();
    if parent_marginal.vars != comp.parents.vars() {
        return Err(Error::InvalidArgument(format!(
            "parent marginal over {:?}, component `{}` has parents {:?}",
            parent_marginal.vars,
            comp.id,
            comp.parents.vars()
        )));
    }
    let alpha = graph.table(cluster).cluster.vars();
    let others: Vec<&PotentialTable> = comp
        .members
        .iter()
        .filter(|&&m| m != cluster)
        .map(|&m| graph.table(m))
        .collect();
    let z = ev.normalizers(a);
    let mut out = vec![0.0; table_len(alpha, cards)];
    let mut config = vec![0; cards.len()];
    let mut err = None;
    for_each_config(&comp.scope(), cards, &mut config, |x| {
        let pi = flat_index(comp.parents.vars(), cards, x);
        let p = parent_marginal.probabilities[pi];
        if p == 0.0 || err.is_some() {
            return;
        }
        if z[pi] <= 0.0 {
            err = Some(Error::ZeroNormalizer {
                component: comp.id.clone(),
                parent_config: comp.parents.vars().iter().map(|&v| x[v]).collect(),
            });
            return;
        }
        let rest: f64 = others.iter().map(|t| t.at(cards, x)).product();
        out[flat_index(alpha, cards, x)] += p * rest / z[pi];
    });
    match err {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

/// Closed-form coordinate update `ψ*(x_α) = P̃^D(x_α) / g̃_α(x_α)`.
/// Entries with zero target mass, and entries below `floor`, become `floor`.
pub fn ipf_update(
    graph: &ChainFactorGraph,
    cluster: ClusterId,
    p_hat: &MarginalTable,
    g: &[f64],
    floor: f64,
) -> Result<PotentialTable> {
    let table = graph.table(cluster);
    if p_hat.vars != table.cluster.vars() || g.len() != table.values.len() {
        return Err(Error::InvalidArgument(format!(
            "update inputs do not match cluster `{}`",
            graph.potential(cluster).id
        )));
    }
    let values = divide_or_floor(&p_hat.probabilities, g, floor, &graph.potential(cluster).id)?;
    Ok(PotentialTable::new(table.cluster.clone(), values))
}

pub(crate) fn divide_or_floor(p: &[f64], g: &[f64], floor: f64, name: &str) -> Result<Vec<f64>> {
    p.iter()
        .zip(g)
        .enumerate()
        .map(|(entry, (&p, &g))| {
            if p == 0.0 {
                Ok(floor)
            } else if g <= 0.0 {
                Err(Error::ZeroDenominator {
                    cluster: name.to_string(),
                    entry,
                })
            } else {
                Ok((p / g).max(floor))
            }
        })
        .collect()
}

/// Largest `|log new − log old|`; zero-to-zero entries count as unchanged.
pub(crate) fn max_log_change(old: &[f64], new: &[f64]) -> f64 {
    old.iter()
        .zip(new)
        .map(|(&a, &b)| {
            if a == b {
                0.0
            } else if a <= 0.0 || b <= 0.0 {
                f64::INFINITY
            } else {
                (b.ln() - a.ln()).abs()
            }
        })
        .fold(0.0, f64::max)
}

pub(crate) fn rescale_to_unit_max(values: &mut [f64]) {
    let m = values.iter().copied().fold(0.0, f64::max);
    if m > 0.0 && m.is_finite() {
        values.iter_mut().for_each(|v| *v /= m);
    }
}

/// Union of the cluster's variables and the owning component's parents,
/// cluster variables first.
pub(crate) fn cluster_with_parents(graph: &ChainFactorGraph, cluster: ClusterId) -> Vec<usize> {
    let comp = graph.component(graph.owner(cluster));
    let mut vars = graph.table(cluster).cluster.vars().to_vec();
    for &p in comp.parents.vars() {
        if !vars.contains(&p) {
            vars.push(p);
        }
    }
    vars
}

/// One ML coordinate step on `cluster`, with a fresh E-step under the
/// current graph. Returns the largest log change of the table.
pub(crate) fn ml_step(
    graph: &mut ChainFactorGraph,
    dataset: &Dataset,
    cluster: ClusterId,
    floor: f64,
) -> Result<f64> {
    let cards = graph.cardinalities().to_vec();
    let new = {
        let ev = Evaluator::new(graph);
        let union = cluster_with_parents(graph, cluster);
        let completed = completed_marginal_with(&ev, dataset, &union)?;
        let p_alpha = completed.project(graph.table(cluster).cluster.vars(), &cards);
        let parents = graph.component(graph.owner(cluster)).parents.vars().to_vec();
        let p_pi = completed.project(&parents, &cards);
        let g = g_alpha_with(&ev, &p_pi, cluster)?;
        ipf_update(graph, cluster, &p_alpha, &g, floor)?
    };
    let delta = max_log_change(&graph.table(cluster).values, &new.values);
    graph.set_values(cluster, new.values);
    Ok(delta)
}

/// Maximum-likelihood fit by generalized IPF.
pub fn fit_ml(graph: &ChainFactorGraph, dataset: &Dataset, config: &FitConfig) -> Result<FitTrace> {
    config.check()?;
    let report = validate_graph(graph);
    if !report.is_valid() {
        return Err(Error::Validation(report));
    }
    dataset.check_against(graph)?;
    let schedule = resolve_schedule(graph, &config.schedule)?;

    let start = Instant::now();
    let mut g = graph.clone();
    let objective = |g: &ChainFactorGraph| log_likelihood_with(&Evaluator::new(g), dataset);
    let mut cycles = vec![CycleRecord {
        cycle: 0,
        objective: objective(&g)?,
        wall_ms: 0.0,
    }];
    let mut steps = Vec::new();
    let mut termination = Termination::MaxCycles;

    for cycle in 1..=config.max_cycles {
        let mut max_delta: f64 = 0.0;
        for &alpha in &schedule {
            let delta = ml_step(&mut g, dataset, alpha, config.potential_floor)
                .map_err(|e| e.at_step(cycle, &g.potential(alpha).id))?;
            max_delta = max_delta.max(delta);
            if config.record_steps {
                steps.push(StepRecord {
                    cycle,
                    cluster: alpha,
                    objective: objective(&g).map_err(|e| e.at_step(cycle, &g.potential(alpha).id))?,
                    normalizer_deviation: None,
                });
            }
        }
        if config.rescale_each_cycle {
            for &alpha in &schedule {
                rescale_to_unit_max(g.values_mut(alpha));
            }
        }
        cycles.push(CycleRecord {
            cycle,
            objective: objective(&g)?,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        });
        if max_delta < config.tol {
            termination = Termination::Converged;
            break;
        }
    }

    Ok(FitTrace {
        optimizer: "ipf-ml".into(),
        seed: None,
        cycles,
        steps,
        graph: g,
        termination,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::{completed_marginal, posterior_marginal, Evidence};
    use crate::model::VariableSpace;
    use approx::assert_abs_diff_eq;

    fn single_cluster_binary() -> ChainFactorGraph {
        let space = VariableSpace::with_cardinalities(&["x"], &[2]).unwrap();
        ChainFactorGraph::undirected(space, &[vec![0]]).unwrap()
    }

    #[test]
    fn single_cluster_matches_empirical() {
        let g = single_cluster_binary();
        let d = Dataset::from_configs(1, &[vec![0], vec![1], vec![1], vec![1]]).unwrap();
        let p_hat = completed_marginal(&g, &d, &[0]).unwrap();
        let empty = MarginalTable { vars: vec![], probabilities: vec![1.0] };
        let gt = g_alpha(&g, &empty, 0).unwrap();
        assert_eq!(gt, vec![0.5, 0.5]);
        let t = ipf_update(&g, 0, &p_hat, &gt, 0.0).unwrap();
        let mut g2 = g.clone();
        g2.set_values(0, t.values);
        let m = posterior_marginal(&g2, &Evidence::empty(1), &[0]).unwrap();
        assert_abs_diff_eq!(m.probabilities[0], 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(m.probabilities[1], 0.75, epsilon = 1e-15);
    }

    #[test]
    fn zero_denominator_detected() {
        let g = single_cluster_binary();
        let p = MarginalTable { vars: vec![0], probabilities: vec![0.5, 0.5] };
        assert!(matches!(
            ipf_update(&g, 0, &p, &[1.0, 0.0], 0.0),
            Err(Error::ZeroDenominator { entry: 1, .. })
        ));
        let p0 = MarginalTable { vars: vec![0], probabilities: vec![0.0, 1.0] };
        let t = ipf_update(&g, 0, &p0, &[0.0, 2.0], 1e-12).unwrap();
        assert_eq!(t.values, vec![1e-12, 0.5]);
    }

    #[test]
    fn bn_single_member_g_is_scaled_parent_marginal() {
        let space = VariableSpace::with_cardinalities(&["p", "c"], &[2, 3]).unwrap();
        let mut g = ChainFactorGraph::bayesian_network(space, &[vec![], vec![0]]).unwrap();
        g.set_values(1, vec![1.0, 2.0, 3.0, 0.5, 0.5, 1.0]);
        let pm = MarginalTable { vars: vec![0], probabilities: vec![0.4, 0.6] };
        let gt = g_alpha(&g, &pm, 1).unwrap();
        for k in 0..3 {
            assert_abs_diff_eq!(gt[k], 0.4 / 6.0, epsilon = 1e-15);
            assert_abs_diff_eq!(gt[3 + k], 0.6 / 2.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn undirected_single_cluster_g_is_inverse_normalizer() {
        let space = VariableSpace::with_cardinalities(&["x", "y"], &[2, 2]).unwrap();
        let mut g = ChainFactorGraph::undirected(space, &[vec![0, 1]]).unwrap();
        g.set_values(0, vec![1.0, 2.0, 3.0, 4.0]);
        let empty = MarginalTable { vars: vec![], probabilities: vec![1.0] };
        for v in g_alpha(&g, &empty, 0).unwrap() {
            assert_abs_diff_eq!(v, 0.1, epsilon = 1e-15);
        }
    }

    #[test]
    fn wrong_parent_marginal_rejected() {
        let space = VariableSpace::with_cardinalities(&["p", "c"], &[2, 2]).unwrap();
        let g = ChainFactorGraph::bayesian_network(space, &[vec![], vec![0]]).unwrap();
        let pm = MarginalTable { vars: vec![], probabilities: vec![1.0] };
        assert!(matches!(g_alpha(&g, &pm, 1), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn saturated_model_fits_empirical_joint() {
        let space = VariableSpace::with_cardinalities(&["x", "y"], &[2, 2]).unwrap();
        let g = ChainFactorGraph::undirected(space, &[vec![0, 1]]).unwrap();
        let d = Dataset::from_configs(2, &[vec![0, 0], vec![0, 1], vec![1, 1], vec![1, 1], vec![1, 0]]).unwrap();
        let trace = fit_ml(&g, &d, &FitConfig::default()).unwrap();
        assert_eq!(trace.termination, Termination::Converged);
        let m = posterior_marginal(&trace.graph, &Evidence::empty(2), &[0, 1]).unwrap();
        for (p, e) in m.probabilities.iter().zip([0.2, 0.2, 0.2, 0.4]) {
            assert_abs_diff_eq!(*p, e, epsilon = 1e-14);
        }
    }

    #[test]
    fn bn_complete_data_converges_after_one_cycle() {
        let space = VariableSpace::with_cardinalities(&["a", "b"], &[2, 2]).unwrap();
        let g = ChainFactorGraph::bayesian_network(space, &[vec![], vec![0]]).unwrap();
        let d = Dataset::from_configs(2, &[vec![0, 0], vec![0, 1], vec![1, 1], vec![1, 1], vec![1, 0]]).unwrap();
        let trace = fit_ml(&g, &d, &FitConfig::default()).unwrap();
        assert_eq!(trace.termination, Termination::Converged);
        // One cycle to get there, one more to see nothing move.
        assert_eq!(trace.cycles.len(), 3);
        assert_eq!(trace.cycles[1].objective, trace.cycles[2].objective);
    }

    #[test]
    fn shuffled_schedule_is_a_seeded_permutation() {
        let space = VariableSpace::with_cardinalities(&["a", "b", "c"], &[2, 2, 2]).unwrap();
        let g = ChainFactorGraph::undirected(space, &[vec![0, 1], vec![1, 2], vec![0, 2]]).unwrap();
        let s1 = resolve_schedule(&g, &Schedule::Shuffled { seed: 7 }).unwrap();
        let s2 = resolve_schedule(&g, &Schedule::Shuffled { seed: 7 }).unwrap();
        assert_eq!(s1, s2);
        let mut sorted = s1.clone();
        sorted.sort();
        assert_eq!(sorted, vec![0, 1, 2]);
    }

    #[test]
    fn config_validation() {
        let g = single_cluster_binary();
        let d = Dataset::from_configs(1, &[vec![0]]).unwrap();
        let cfg = FitConfig { tol: 0.0, ..FitConfig::default() };
        assert!(fit_ml(&g, &d, &cfg).is_err());
    }
}
