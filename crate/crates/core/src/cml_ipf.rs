//! IPF for maximum conditional likelihood.
//!
//! Two regimes admit closed-form coordinate steps:
//!
//! * **clamped parents**: every component's parents are clamped in every
//!   record, so all normalizers cancel from the conditional likelihood and
//!   the step is `ψ* = P̃^D / g̃^c`;
//! * **joint parents**: every member cluster contains its component's parent
//!   set. Normalizers are pinned to one and each step solves
//!   `ψ^λ = P̃^D / (g̃^c + λ(x_π) h̃)` with one multiplier per parent
//!   configuration, found by bisection on the decreasing constraint sum.

use std::collections::HashMap;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::inference::{completed_marginal_with, conditional_log_likelihood_with, Dataset};
use crate::ml_ipf::{
    divide_or_floor, max_log_change, rescale_to_unit_max, resolve_schedule, CycleRecord,
    FitConfig, FitTrace, StepRecord, Termination,
};
use crate::model::{validate_graph, ChainFactorGraph, ClusterId, Evaluator, PotentialTable};
use crate::table::{flat_index, for_each_config, table_len, unflatten};

pub const DEFAULT_CONSTRAINT_EPSILON: f64 = 1e-10;
const MAX_BISECTION_STEPS: usize = 200;
const MAX_BRACKET_EXPANSIONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    ClampedParents,
    JointParents,
    Unsupported,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComponentRegime {
    /// Parents clamped in every record.
    pub clamped_parents: bool,
    /// Every member cluster contains the parent set.
    pub joint_parents: bool,
    /// Every variable of the component is clamped in every record.
    pub always_clamped: bool,
}

impl ComponentRegime {
    pub fn tag(&self) -> Regime {
        if self.clamped_parents {
            Regime::ClampedParents
        } else if self.joint_parents {
            Regime::JointParents
        } else {
            Regime::Unsupported
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeClassification {
    pub components: Vec<ComponentRegime>,
    pub overall: Regime,
}

impl RegimeClassification {
    pub fn admits(&self, regime: Regime) -> bool {
        match regime {
            Regime::ClampedParents => self.components.iter().all(|c| c.clamped_parents),
            Regime::JointParents => self.components.iter().all(|c| c.joint_parents),
            Regime::Unsupported => false,
        }
    }
}

/// Tags each component and picks the whole-fit regime. Mixed regimes are
/// reported as unsupported.
pub fn classify_regime(graph: &ChainFactorGraph, dataset: &Dataset) -> RegimeClassification {
    let components: Vec<ComponentRegime> = graph
        .components()
        .iter()
        .map(|c| {
            let all_clamped = |vars: &[usize]| {
                dataset
                    .records()
                    .iter()
                    .all(|r| vars.iter().all(|&v| r.evidence.is_clamped(v)))
            };
            ComponentRegime {
                clamped_parents: all_clamped(c.parents.vars()),
                joint_parents: c.members.iter().all(|&m| {
                    c.parents
                        .vars()
                        .iter()
                        .all(|&p| graph.table(m).cluster.contains(p))
                }),
                always_clamped: all_clamped(&c.scope()),
            }
        })
        .collect();
    let mut cls = RegimeClassification {
        components,
        overall: Regime::Unsupported,
    };
    cls.overall = if cls.admits(Regime::ClampedParents) {
        Regime::ClampedParents
    } else if cls.admits(Regime::JointParents) {
        Regime::JointParents
    } else {
        Regime::Unsupported
    };
    cls
}

/// Conditional counterpart of `g̃_α`, averaged over records:
/// `(1/N) Σ_μ w_μ [Σ_{x|c(μ)} Ψ̃_{−α}(x) I_{x_α}] / [Σ_{x|c(μ)} Ψ̃(x)]`.
pub fn g_alpha_conditional(
    graph: &ChainFactorGraph,
    dataset: &Dataset,
    cluster: ClusterId,
) -> Result<Vec<f64>> {
    dataset.check_against(graph)?;
    let cards = graph.cardinalities();
    let alpha = graph.table(cluster).cluster.vars();
    let name = &graph.potential(cluster).id;
    let mut groups: Vec<(Vec<Option<usize>>, f64)> = Vec::new();
    let mut index: HashMap<Vec<Option<usize>>, usize> = HashMap::new();
    for r in dataset.records() {
        let key = r.evidence.clamped_states();
        match index.get(&key) {
            Some(&k) => groups[k].1 += r.weight,
            None => {
                index.insert(key.clone(), groups.len());
                groups.push((key, r.weight));
            }
        }
    }
    let others: Vec<&PotentialTable> = graph
        .potentials()
        .iter()
        .enumerate()
        .filter(|(k, _)| *k != cluster)
        .map(|(_, p)| &p.table)
        .collect();
    let own = graph.table(cluster);
    let mut out = vec![0.0; table_len(alpha, cards)];
    let mut num = vec![0.0; out.len()];
    for (states, weight) in groups {
        let mut config: Vec<usize> = states.iter().map(|s| s.unwrap_or(0)).collect();
        let free: Vec<usize> = (0..states.len()).filter(|&v| states[v].is_none()).collect();
        num.iter_mut().for_each(|v| *v = 0.0);
        let mut den = 0.0;
        for_each_config(&free, cards, &mut config, |x| {
            let rest: f64 = others.iter().map(|t| t.at(cards, x)).product();
            let k = flat_index(alpha, cards, x);
            num[k] += rest;
            den += rest * own.values[k];
        });
        if !(den > 0.0) {
            return Err(Error::ZeroDenominator {
                cluster: name.clone(),
                entry: 0,
            });
        }
        for (o, n) in out.iter_mut().zip(&num) {
            *o += weight * n / den;
        }
    }
    let n = dataset.total_weight();
    out.iter_mut().for_each(|v| *v /= n);
    Ok(out)
}

/// Single coordinate step in the clamped-parents regime:
/// `ψ* = P̃^D / g̃^c`, clamped cells counted as observations in `P̃^D`.
pub fn update_clamped_parents(
    graph: &ChainFactorGraph,
    dataset: &Dataset,
    cluster: ClusterId,
) -> Result<PotentialTable> {
    clamped_update(graph, dataset, cluster, 0.0)
}

fn clamped_update(
    graph: &ChainFactorGraph,
    dataset: &Dataset,
    cluster: ClusterId,
    floor: f64,
) -> Result<PotentialTable> {
    let cls = classify_regime(graph, dataset);
    let owner = graph.owner(cluster);
    if !cls.components[owner].clamped_parents {
        return Err(Error::UnsupportedRegime(format!(
            "parents of component `{}` are not clamped in every record",
            graph.component(owner).id
        )));
    }
    let table = graph.table(cluster);
    let p_hat = completed_marginal_with(&Evaluator::new(graph), dataset, table.cluster.vars())?;
    let g = g_alpha_conditional(graph, dataset, cluster)?;
    let values = divide_or_floor(&p_hat.probabilities, &g, floor, &graph.potential(cluster).id)?;
    Ok(PotentialTable::new(table.cluster.clone(), values))
}

/// `h̃_α(x_α) = Σ_{x'_A} Ψ̃_{A∖α}(x'_A) I_{x_α}(x'_α)`.
pub fn h_alpha(graph: &ChainFactorGraph, cluster: ClusterId) -> Result<Vec<f64>> {
    let owner = graph.owner(cluster);
    let comp = graph.component(owner);
    let alpha = graph.table(cluster).cluster.vars();
    if !comp.parents.is_subset_of(alpha) {
        return Err(Error::UnsupportedRegime(format!(
            "cluster `{}` does not contain all parents of component `{}`",
            graph.potential(cluster).id,
            comp.id
        )));
    }
    let cards = graph.cardinalities();
    let others: Vec<&PotentialTable> = comp
        .members
        .iter()
        .filter(|&&m| m != cluster)
        .map(|&m| graph.table(m))
        .collect();
    let mut out = vec![0.0; table_len(alpha, cards)];
    let mut config = vec![0; cards.len()];
    for_each_config(&comp.scope(), cards, &mut config, |x| {
        out[flat_index(alpha, cards, x)] += others.iter().map(|t| t.at(cards, x)).product::<f64>();
    });
    Ok(out)
}

/// Inner constrained problem for one joint-parents cluster update. The
/// inputs are fixed during the multiplier search.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangeProblem {
    pub p_hat: Vec<f64>,
    pub g: Vec<f64>,
    pub h: Vec<f64>,
    /// Entries of the cluster table grouped by parent configuration.
    pub slices: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LagrangeState {
    pub lambda: f64,
    pub bracket: (f64, f64),
    /// `|Z(λ) − 1|` at the returned multiplier.
    pub residual: f64,
}

impl LagrangeProblem {
    /// Groups entries of `cluster` by the owning component's parent
    /// configuration.
    pub fn new(
        graph: &ChainFactorGraph,
        cluster: ClusterId,
        p_hat: Vec<f64>,
        g: Vec<f64>,
        h: Vec<f64>,
    ) -> Self {
        let cards = graph.cardinalities();
        let alpha = graph.table(cluster).cluster.vars();
        let parents = graph.component(graph.owner(cluster)).parents.vars();
        let mut slices = vec![Vec::new(); table_len(parents, cards)];
        let mut config = vec![0; cards.len()];
        for e in 0..table_len(alpha, cards) {
            unflatten(alpha, cards, e, &mut config);
            slices[flat_index(parents, cards, &config)].push(e);
        }
        LagrangeProblem { p_hat, g, h, slices }
    }

    /// Constraint sum `Z(λ) = Σ_{e ∈ slice} P̃_e h_e / (g_e + λ h_e)`.
    pub fn z(&self, parent_config: usize, lambda: f64) -> f64 {
        self.slices[parent_config]
            .iter()
            .filter(|&&e| self.p_hat[e] > 0.0)
            .map(|&e| self.p_hat[e] * self.h[e] / (self.g[e] + lambda * self.h[e]))
            .sum()
    }

    pub fn slice_mass(&self, parent_config: usize) -> f64 {
        self.slices[parent_config].iter().map(|&e| self.p_hat[e]).sum()
    }

    /// Multipliers below this make some denominator non-positive.
    fn pole(&self, parent_config: usize) -> f64 {
        self.slices[parent_config]
            .iter()
            .filter(|&&e| self.p_hat[e] > 0.0)
            .map(|&e| -self.g[e] / self.h[e])
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `ψ^λ(x_α) = P̃^D(x_α) / (g̃^c(x_α) + λ(x_π) h̃(x_α))`; zero where `P̃^D` is.
pub fn psi_lambda(problem: &LagrangeProblem, lambdas: &[f64]) -> Result<Vec<f64>> {
    let mut out = vec![0.0; problem.p_hat.len()];
    for (pc, slice) in problem.slices.iter().enumerate() {
        for &e in slice {
            let p = problem.p_hat[e];
            if p == 0.0 {
                continue;
            }
            let den = problem.g[e] + lambdas[pc] * problem.h[e];
            if !(den > 0.0) {
                return Err(Error::NonPositiveDenominator {
                    entry: e,
                    lambda: lambdas[pc],
                });
            }
            out[e] = p / den;
        }
    }
    Ok(out)
}

/// Initial bracket `(λ_lo, λ_hi)` with `Z(λ_lo) ≥ 1 ≥ Z(λ_hi)`.
///
/// `λ_lo = max_e (P̃_e − g_e / h_e)` makes a single term of the constraint
/// sum reach one; `λ_hi = Σ P̃_e` bounds the sum by one from above. If
/// rounding breaks either inequality the offending end is pushed outward:
/// `λ_hi` by doubling its distance from `λ_lo`, `λ_lo` by halving its
/// distance to the pole.
pub fn lambda_bracket(problem: &LagrangeProblem, parent_config: usize) -> Result<(f64, f64)> {
    let slice = &problem.slices[parent_config];
    let positive: Vec<usize> = slice.iter().copied().filter(|&e| problem.p_hat[e] > 0.0).collect();
    if positive.is_empty() || positive.iter().any(|&e| !(problem.h[e] > 0.0) || problem.g[e] < 0.0) {
        return Err(Error::BracketFailure { parent_config });
    }
    let pole = problem.pole(parent_config);
    let mut lo = positive
        .iter()
        .map(|&e| problem.p_hat[e] - problem.g[e] / problem.h[e])
        .fold(f64::NEG_INFINITY, f64::max);
    let mut hi = problem.slice_mass(parent_config);
    let mut expansions = 0;
    while problem.z(parent_config, lo) < 1.0 {
        lo = pole + (lo - pole) / 2.0;
        expansions += 1;
        if expansions > MAX_BRACKET_EXPANSIONS || !(lo > pole) {
            return Err(Error::BracketFailure { parent_config });
        }
    }
    while problem.z(parent_config, hi) > 1.0 {
        hi += (hi - lo).abs().max(f64::MIN_POSITIVE) * 2.0;
        expansions += 1;
        if expansions > MAX_BRACKET_EXPANSIONS {
            return Err(Error::BracketFailure { parent_config });
        }
    }
    Ok((lo, hi))
}

/// Bisection for `Z(λ) = 1` within `epsilon`. When rounding makes `epsilon`
/// unreachable the search stops once the bracket cannot be split further
/// and reports the achieved residual.
pub fn solve_lambda(
    problem: &LagrangeProblem,
    parent_config: usize,
    epsilon: f64,
) -> Result<LagrangeState> {
    let bracket = lambda_bracket(problem, parent_config)?;
    let (mut lo, mut hi) = bracket;
    #[cfg(debug_assertions)]
    {
        let mut prev = f64::INFINITY;
        for k in 1..=10 {
            let z = problem.z(parent_config, lo + (hi - lo) * k as f64 / 11.0);
            debug_assert!(z <= prev, "constraint sum not decreasing in lambda");
            prev = z;
        }
    }
    for end in [lo, hi] {
        let r = (problem.z(parent_config, end) - 1.0).abs();
        if r < epsilon {
            return Ok(LagrangeState {
                lambda: end,
                bracket,
                residual: r,
            });
        }
    }
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        let z = problem.z(parent_config, mid);
        residual = (z - 1.0).abs();
        if residual < epsilon {
            return Ok(LagrangeState {
                lambda: mid,
                bracket,
                residual,
            });
        }
        if mid <= lo || mid >= hi {
            // The bracket spans adjacent floats, so no multiplier does
            // better. This happens when a slice carries very little mass
            // and the root sits next to the pole.
            let (r_lo, r_hi) = (
                (problem.z(parent_config, lo) - 1.0).abs(),
                (problem.z(parent_config, hi) - 1.0).abs(),
            );
            let (lambda, residual) = if r_lo <= r_hi { (lo, r_lo) } else { (hi, r_hi) };
            return Ok(LagrangeState {
                lambda,
                bracket,
                residual,
            });
        }
        if z > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::NonConvergence {
        parent_config,
        epsilon,
        residual,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CmlOptions {
    /// Force a regime; rejected if the model/data do not admit it.
    pub regime: Option<Regime>,
    /// Required `|Z(λ) − 1|` for the multiplier search.
    pub epsilon: f64,
}

impl Default for CmlOptions {
    fn default() -> Self {
        CmlOptions {
            regime: None,
            epsilon: DEFAULT_CONSTRAINT_EPSILON,
        }
    }
}

/// Largest `|Z_A(x_π) − 1|` over all components and parent configurations.
pub fn max_normalizer_deviation(graph: &ChainFactorGraph) -> f64 {
    let ev = Evaluator::new(graph);
    (0..graph.components().len())
        .flat_map(|a| ev.normalizers(a).to_vec())
        .map(|z| (z - 1.0).abs())
        .fold(0.0, f64::max)
}

/// Divides the lexicographically first member of every component by `Z_A`,
/// so that every normalizer equals one. Requires joint parents.
pub fn normalize_components(graph: &mut ChainFactorGraph) {
    let cards = graph.cardinalities().to_vec();
    for a in 0..graph.components().len() {
        let z = Evaluator::new(graph).normalizers(a).to_vec();
        let comp = graph.component(a).clone();
        let first = *comp
            .members
            .iter()
            .min_by(|&&x, &&y| graph.potential(x).id.cmp(&graph.potential(y).id))
            .expect("components have members");
        let vars = graph.table(first).cluster.vars().to_vec();
        let mut config = vec![0; cards.len()];
        let values = graph.values_mut(first);
        for (e, v) in values.iter_mut().enumerate() {
            unflatten(&vars, &cards, e, &mut config);
            let zz = z[flat_index(comp.parents.vars(), &cards, &config)];
            if zz > 0.0 {
                *v /= zz;
            }
        }
    }
}

/// Entries with no completed mass are zero in `ψ^λ` only while
/// `g_e + λ h_e ≥ 0` for them. If the root of `Z(λ) = 1` lies below
/// `λ_0 = max_e (−g_e / h_e)` over such entries, the constrained maximizer
/// sits at `λ_0` instead and the entry attaining it takes the mass
/// `1 − Z(λ_0)` left over by the others. Returns `(λ_0, entry, deficit)` in
/// that case.
fn boundary_multiplier(problem: &LagrangeProblem, parent_config: usize) -> Option<(f64, usize, f64)> {
    let slice = &problem.slices[parent_config];
    let (cap, entry) = slice
        .iter()
        .filter(|&&e| problem.p_hat[e] == 0.0 && problem.h[e] > 0.0)
        .map(|&e| (-problem.g[e] / problem.h[e], e))
        .fold(None, |best: Option<(f64, usize)>, c| match best {
            Some(b) if b.0 >= c.0 => Some(b),
            _ => Some(c),
        })?;
    let admissible = slice
        .iter()
        .filter(|&&e| problem.p_hat[e] > 0.0)
        .all(|&e| problem.g[e] + cap * problem.h[e] > 0.0);
    if !admissible {
        return None;
    }
    let z = problem.z(parent_config, cap);
    (z < 1.0).then_some((cap, entry, 1.0 - z))
}

fn joint_update(
    graph: &ChainFactorGraph,
    dataset: &Dataset,
    cluster: ClusterId,
    floor: f64,
    epsilon: f64,
) -> Result<Vec<f64>> {
    let vars = graph.table(cluster).cluster.vars();
    let p_hat = completed_marginal_with(&Evaluator::new(graph), dataset, vars)?.probabilities;
    let g = g_alpha_conditional(graph, dataset, cluster)?;
    let h = h_alpha(graph, cluster)?;
    let problem = LagrangeProblem::new(graph, cluster, p_hat, g, h);
    let old = &graph.table(cluster).values;
    let mut lambdas = vec![0.0; problem.slices.len()];
    let mut solved = vec![false; problem.slices.len()];
    let mut boundary = Vec::new();
    for pc in 0..problem.slices.len() {
        if problem.slice_mass(pc) > 0.0 {
            match boundary_multiplier(&problem, pc) {
                Some((lambda, entry, deficit)) => {
                    lambdas[pc] = lambda;
                    boundary.push((entry, deficit));
                }
                None => lambdas[pc] = solve_lambda(&problem, pc, epsilon)?.lambda,
            }
            solved[pc] = true;
        }
    }
    let mut values = psi_lambda(&problem, &lambdas)?;
    for (e, deficit) in boundary {
        values[e] = deficit / problem.h[e];
    }
    for (pc, slice) in problem.slices.iter().enumerate() {
        if !solved[pc] {
            // No completed mass on this parent configuration: keep the
            // current (normalized) slice.
            for &e in slice {
                values[e] = old[e];
            }
            continue;
        }
        for &e in slice {
            values[e] = values[e].max(floor);
        }
        // Exact renormalization removes the bisection residual.
        let z: f64 = slice.iter().map(|&e| values[e] * problem.h[e]).sum();
        for &e in slice {
            values[e] /= z;
        }
    }
    Ok(values)
}

/// Maximum conditional likelihood fit. Components whose variables are all
/// clamped in every record are not updated.
pub fn fit_cml(
    graph: &ChainFactorGraph,
    dataset: &Dataset,
    config: &FitConfig,
    options: &CmlOptions,
) -> Result<FitTrace> {
    config.check()?;
    if !(options.epsilon > 0.0) {
        return Err(Error::InvalidArgument("epsilon must be positive".into()));
    }
    let report = validate_graph(graph);
    if !report.is_valid() {
        return Err(Error::Validation(report));
    }
    dataset.check_against(graph)?;
    for (i, r) in dataset.records().iter().enumerate() {
        if !r.evidence.has_observed() {
            return Err(Error::InvalidArgument(format!(
                "record {i} has no observed variable"
            )));
        }
    }
    let cls = classify_regime(graph, dataset);
    let regime = match options.regime {
        Some(forced) if cls.admits(forced) => forced,
        Some(forced) => {
            return Err(Error::UnsupportedRegime(format!(
                "requested {forced:?} but the model and data admit {:?}",
                cls.overall
            )))
        }
        None => cls.overall,
    };
    if regime == Regime::Unsupported {
        return Err(Error::UnsupportedRegime(
            "components are neither all clamped-parents nor all joint-parents".into(),
        ));
    }
    let schedule: Vec<ClusterId> = resolve_schedule(graph, &config.schedule)?
        .into_iter()
        .filter(|&c| !cls.components[graph.owner(c)].always_clamped)
        .collect();

    let start = Instant::now();
    let mut g = graph.clone();
    if regime == Regime::JointParents {
        normalize_components(&mut g);
    }
    let objective = |g: &ChainFactorGraph| conditional_log_likelihood_with(&Evaluator::new(g), dataset);
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
            let name = g.potential(alpha).id.clone();
            let values = match regime {
                Regime::ClampedParents => {
                    clamped_update(&g, dataset, alpha, config.potential_floor).map(|t| t.values)
                }
                _ => joint_update(&g, dataset, alpha, config.potential_floor, options.epsilon),
            }
            .map_err(|e| e.at_step(cycle, &name))?;
            max_delta = max_delta.max(max_log_change(&g.table(alpha).values, &values));
            g.set_values(alpha, values);
            if config.record_steps {
                steps.push(StepRecord {
                    cycle,
                    cluster: alpha,
                    objective: objective(&g).map_err(|e| e.at_step(cycle, &name))?,
                    normalizer_deviation: (regime == Regime::JointParents)
                        .then(|| max_normalizer_deviation(&g)),
                });
            }
        }
        // Rescaling would break the unit normalizers of the joint regime.
        if config.rescale_each_cycle && regime == Regime::ClampedParents {
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
        optimizer: "ipf-cml".into(),
        seed: None,
        cycles,
        steps,
        graph: g,
        termination,
    })
}
