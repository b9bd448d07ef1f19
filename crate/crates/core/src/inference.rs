//! Exact inference by enumeration: posteriors, EM-completed marginals and the
//! likelihood-type objectives.
//!
//! Datasets typically contain few distinct evidence patterns, so every
//! function here groups records by pattern and enumerates the hidden
//! variables once per pattern.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::model::{ChainFactorGraph, Evaluator};
use crate::table::{flat_index, for_each_config, table_len};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EvidenceKind {
    Observed,
    Clamped,
}

/// Partial assignment of a variable space.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Evidence {
    cells: Vec<Option<(usize, EvidenceKind)>>,
}

impl Evidence {
    pub fn empty(n_vars: usize) -> Self {
        Evidence {
            cells: vec![None; n_vars],
        }
    }

    /// Every variable observed at `config`.
    pub fn complete(config: &[usize]) -> Self {
        Evidence {
            cells: config
                .iter()
                .map(|&s| Some((s, EvidenceKind::Observed)))
                .collect(),
        }
    }

    pub fn with(mut self, var: usize, state: usize, kind: EvidenceKind) -> Self {
        self.set(var, state, kind);
        self
    }

    pub fn observe(mut self, var: usize, state: usize) -> Self {
        self.set(var, state, EvidenceKind::Observed);
        self
    }

    pub fn clamp(mut self, var: usize, state: usize) -> Self {
        self.set(var, state, EvidenceKind::Clamped);
        self
    }

    pub fn set(&mut self, var: usize, state: usize, kind: EvidenceKind) {
        self.cells[var] = Some((state, kind));
    }

    pub fn clear(&mut self, var: usize) {
        self.cells[var] = None;
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.iter().all(Option::is_none)
    }

    pub fn get(&self, var: usize) -> Option<(usize, EvidenceKind)> {
        self.cells[var]
    }

    pub fn state(&self, var: usize) -> Option<usize> {
        self.cells[var].map(|(s, _)| s)
    }

    pub fn is_clamped(&self, var: usize) -> bool {
        matches!(self.cells[var], Some((_, EvidenceKind::Clamped)))
    }

    pub fn has_clamped(&self) -> bool {
        self.cells
            .iter()
            .any(|c| matches!(c, Some((_, EvidenceKind::Clamped))))
    }

    pub fn has_observed(&self) -> bool {
        self.cells
            .iter()
            .any(|c| matches!(c, Some((_, EvidenceKind::Observed))))
    }

    pub fn is_complete(&self) -> bool {
        self.cells.iter().all(Option::is_some)
    }

    /// States with the observed/clamped distinction dropped.
    pub fn states(&self) -> Vec<Option<usize>> {
        self.cells.iter().map(|c| c.map(|(s, _)| s)).collect()
    }

    /// States of the clamped cells only.
    pub fn clamped_states(&self) -> Vec<Option<usize>> {
        self.cells
            .iter()
            .map(|c| match c {
                Some((s, EvidenceKind::Clamped)) => Some(*s),
                _ => None,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub evidence: Evidence,
    pub weight: f64,
}

/// Weighted records over a fixed variable space.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    n_vars: usize,
    records: Vec<Record>,
}

impl Dataset {
    pub fn new(n_vars: usize) -> Self {
        Dataset {
            n_vars,
            records: Vec::new(),
        }
    }

    pub fn push(&mut self, evidence: Evidence, weight: f64) -> Result<()> {
        if evidence.len() != self.n_vars {
            return Err(Error::InvalidArgument(format!(
                "evidence covers {} variables, dataset has {}",
                evidence.len(),
                self.n_vars
            )));
        }
        if !(weight > 0.0 && weight.is_finite()) {
            return Err(Error::NonPositiveWeight {
                row: self.records.len(),
                value: weight.to_string(),
            });
        }
        self.records.push(Record { evidence, weight });
        Ok(())
    }

    /// Complete, unit-weight records.
    pub fn from_configs(n_vars: usize, configs: &[Vec<usize>]) -> Result<Self> {
        let mut d = Dataset::new(n_vars);
        for c in configs {
            d.push(Evidence::complete(c), 1.0)?;
        }
        Ok(d)
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// `N`, the total weight.
    pub fn total_weight(&self) -> f64 {
        self.records.iter().map(|r| r.weight).sum()
    }

    pub fn has_clamped(&self) -> bool {
        self.records.iter().any(|r| r.evidence.has_clamped())
    }

    /// Checks that every record fits the graph's variable space.
    pub fn check_against(&self, graph: &ChainFactorGraph) -> Result<()> {
        let cards = graph.cardinalities();
        if self.n_vars != cards.len() {
            return Err(Error::InvalidArgument(format!(
                "dataset has {} variables, model has {}",
                self.n_vars,
                cards.len()
            )));
        }
        for (i, r) in self.records.iter().enumerate() {
            for (v, s) in r.evidence.states().into_iter().enumerate() {
                if let Some(s) = s {
                    if s >= cards[v] {
                        return Err(Error::InvalidArgument(format!(
                            "record {i}: state {s} out of range for variable `{}`",
                            graph.space().variable(v).name
                        )));
                    }
                }
            }
        }
        if self.records.is_empty() {
            return Err(Error::InvalidArgument("dataset is empty".into()));
        }
        Ok(())
    }
}

/// Probability table over an ordered variable list (possibly empty).
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalTable {
    pub vars: Vec<usize>,
    pub probabilities: Vec<f64>,
}

impl MarginalTable {
    /// Marginal over `sub`, which must be a subset of `self.vars`.
    pub fn project(&self, sub: &[usize], cards: &[usize]) -> MarginalTable {
        assert!(sub.iter().all(|v| self.vars.contains(v)));
        let mut out = vec![0.0; table_len(sub, cards)];
        let mut config = vec![0; cards.len()];
        let mut k = 0;
        for_each_config(&self.vars, cards, &mut config, |x| {
            out[flat_index(sub, cards, x)] += self.probabilities[k];
            k += 1;
        });
        MarginalTable {
            vars: sub.to_vec(),
            probabilities: out,
        }
    }

    pub fn total(&self) -> f64 {
        self.probabilities.iter().sum()
    }
}

/// Sum of the joint over completions of `states`, accumulated into a table
/// over `target`. Returns the unnormalized table and the total mass.
fn enumerate_pattern(
    ev: &Evaluator<'_>,
    states: &[Option<usize>],
    target: &[usize],
) -> Result<(Vec<f64>, f64)> {
    let cards = ev.graph().cardinalities();
    let mut config: Vec<usize> = states.iter().map(|s| s.unwrap_or(0)).collect();
    let hidden: Vec<usize> = (0..states.len()).filter(|&v| states[v].is_none()).collect();
    let mut table = vec![0.0; table_len(target, cards)];
    let mut total = 0.0;
    let mut err = None;
    for_each_config(&hidden, cards, &mut config, |x| {
        if err.is_some() {
            return;
        }
        match ev.joint(x) {
            Ok(p) => {
                total += p;
                table[flat_index(target, cards, x)] += p;
            }
            Err(e) => err = Some(e),
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok((table, total)),
    }
}

/// Probability of a partial assignment (hidden variables summed out).
fn pattern_mass(ev: &Evaluator<'_>, states: &[Option<usize>]) -> Result<f64> {
    if states.iter().all(Option::is_some) {
        let config: Vec<usize> = states.iter().map(|s| s.unwrap()).collect();
        return ev.joint(&config);
    }
    Ok(enumerate_pattern(ev, states, &[])?.1)
}

fn check_states(graph: &ChainFactorGraph, states: &[Option<usize>]) -> Result<()> {
    let cards = graph.cardinalities();
    if states.len() != cards.len() {
        return Err(Error::InvalidArgument(format!(
            "evidence covers {} variables, model has {}",
            states.len(),
            cards.len()
        )));
    }
    for (v, s) in states.iter().enumerate() {
        if let Some(s) = s {
            if *s >= cards[v] {
                return Err(Error::InvalidArgument(format!(
                    "state {s} out of range for variable {v}"
                )));
            }
        }
    }
    Ok(())
}

fn check_target(graph: &ChainFactorGraph, target: &[usize]) -> Result<()> {
    let n = graph.space().len();
    for (k, &v) in target.iter().enumerate() {
        if v >= n || target[..k].contains(&v) {
            return Err(Error::InvalidArgument(format!("invalid target cluster {target:?}")));
        }
    }
    Ok(())
}

fn posterior_with(
    ev: &Evaluator<'_>,
    states: &[Option<usize>],
    target: &[usize],
) -> Result<Vec<f64>> {
    let cards = ev.graph().cardinalities();
    if target.iter().all(|&v| states[v].is_some()) {
        // Target fully determined; still reject impossible evidence.
        if pattern_mass(ev, states)? <= 0.0 {
            return Err(Error::ImpossibleEvidence { record: None });
        }
        let mut table = vec![0.0; table_len(target, cards)];
        let config: Vec<usize> = states.iter().map(|s| s.unwrap_or(0)).collect();
        table[flat_index(target, cards, &config)] = 1.0;
        return Ok(table);
    }
    let (mut table, total) = enumerate_pattern(ev, states, target)?;
    if total <= 0.0 {
        return Err(Error::ImpossibleEvidence { record: None });
    }
    table.iter_mut().for_each(|p| *p /= total);
    Ok(table)
}

/// Exact `P(x_target | evidence)`. Observed and clamped cells both condition.
pub fn posterior_marginal(
    graph: &ChainFactorGraph,
    evidence: &Evidence,
    target: &[usize],
) -> Result<MarginalTable> {
    let states = evidence.states();
    check_states(graph, &states)?;
    check_target(graph, target)?;
    let ev = Evaluator::new(graph);
    Ok(MarginalTable {
        vars: target.to_vec(),
        probabilities: posterior_with(&ev, &states, target)?,
    })
}

/// Groups records by their (kind-agnostic) evidence pattern, keeping the
/// total weight and the first record index of each pattern.
fn group_patterns<F>(dataset: &Dataset, key: F) -> Vec<(Vec<Option<usize>>, f64, usize)>
where
    F: Fn(&Evidence) -> Vec<Option<usize>>,
{
    let mut index: HashMap<Vec<Option<usize>>, usize> = HashMap::new();
    let mut out: Vec<(Vec<Option<usize>>, f64, usize)> = Vec::new();
    for (i, r) in dataset.records().iter().enumerate() {
        let k = key(&r.evidence);
        match index.get(&k) {
            Some(&slot) => out[slot].1 += r.weight,
            None => {
                index.insert(k.clone(), out.len());
                out.push((k, r.weight, i));
            }
        }
    }
    out
}

/// Completed data distribution `P̃^D` on `target`: records' evidenced
/// variables contribute indicator mass, hidden ones are filled in by the
/// model posterior.
pub fn completed_marginal(
    graph: &ChainFactorGraph,
    dataset: &Dataset,
    target: &[usize],
) -> Result<MarginalTable> {
    dataset.check_against(graph)?;
    check_target(graph, target)?;
    let ev = Evaluator::new(graph);
    completed_marginal_with(&ev, dataset, target)
}

pub(crate) fn completed_marginal_with(
    ev: &Evaluator<'_>,
    dataset: &Dataset,
    target: &[usize],
) -> Result<MarginalTable> {
    let cards = ev.graph().cardinalities();
    let n = dataset.total_weight();
    let mut out = vec![0.0; table_len(target, cards)];
    let mut config = vec![0; cards.len()];
    for (states, weight, first) in group_patterns(dataset, |e| e.states()) {
        if target.iter().all(|&v| states[v].is_some()) {
            for &v in target {
                config[v] = states[v].unwrap();
            }
            out[flat_index(target, cards, &config)] += weight;
        } else {
            let post = posterior_with(ev, &states, target).map_err(|e| e.with_record(first))?;
            for (o, p) in out.iter_mut().zip(post) {
                *o += weight * p;
            }
        }
    }
    out.iter_mut().for_each(|p| *p /= n);
    Ok(MarginalTable {
        vars: target.to_vec(),
        probabilities: out,
    })
}

/// Average log-likelihood `(1/N) Σ_μ w_μ log P(x_v(μ))`.
pub fn log_likelihood(graph: &ChainFactorGraph, dataset: &Dataset) -> Result<f64> {
    dataset.check_against(graph)?;
    let ev = Evaluator::new(graph);
    log_likelihood_with(&ev, dataset)
}

pub(crate) fn log_likelihood_with(ev: &Evaluator<'_>, dataset: &Dataset) -> Result<f64> {
    let n = dataset.total_weight();
    let mut acc = 0.0;
    for (states, weight, first) in group_patterns(dataset, |e| e.states()) {
        let p = pattern_mass(ev, &states)?;
        if p <= 0.0 {
            return Err(Error::ImpossibleEvidence {
                record: Some(first),
            });
        }
        acc += weight * p.ln();
    }
    Ok(acc / n)
}

/// Average conditional log-likelihood
/// `(1/N) Σ_μ w_μ [log P(observed, clamped) − log P(clamped)]`.
pub fn conditional_log_likelihood(graph: &ChainFactorGraph, dataset: &Dataset) -> Result<f64> {
    dataset.check_against(graph)?;
    for (i, r) in dataset.records().iter().enumerate() {
        if !r.evidence.has_observed() {
            return Err(Error::InvalidArgument(format!(
                "record {i} has no observed variable"
            )));
        }
    }
    let ev = Evaluator::new(graph);
    conditional_log_likelihood_with(&ev, dataset)
}

pub(crate) fn conditional_log_likelihood_with(
    ev: &Evaluator<'_>,
    dataset: &Dataset,
) -> Result<f64> {
    let n = dataset.total_weight();
    let mut acc = 0.0;
    let mut clamp_cache: HashMap<Vec<Option<usize>>, f64> = HashMap::new();
    for r in dataset.records() {
        let clamps = r.evidence.clamped_states();
        if !clamp_cache.contains_key(&clamps) {
            let m = if clamps.iter().all(Option::is_none) {
                1.0
            } else {
                pattern_mass(ev, &clamps)?
            };
            clamp_cache.insert(clamps, m);
        }
    }
    for (i, r) in dataset.records().iter().enumerate() {
        let clamps = r.evidence.clamped_states();
        let pc = clamp_cache[&clamps];
        let pj = pattern_mass(ev, &r.evidence.states())?;
        if pc <= 0.0 || pj <= 0.0 {
            return Err(Error::ImpossibleEvidence { record: Some(i) });
        }
        acc += r.weight * (pj.ln() - pc.ln());
    }
    Ok(acc / n)
}

/// Target conditional table `Q(response | context)`, flattened over
/// `context_vars` followed by `response_vars` (last variable fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalTarget {
    pub context_vars: Vec<usize>,
    pub response_vars: Vec<usize>,
    pub values: Vec<f64>,
}

impl ConditionalTarget {
    pub fn all_vars(&self) -> Vec<usize> {
        self.context_vars
            .iter()
            .chain(&self.response_vars)
            .copied()
            .collect()
    }
}

/// Model conditional `P(response | context)` laid out like `target.values`.
pub fn model_conditional_table(
    graph: &ChainFactorGraph,
    target: &ConditionalTarget,
) -> Result<Vec<f64>> {
    let cards = graph.cardinalities();
    let vars = target.all_vars();
    check_target(graph, &vars)?;
    let joint = posterior_marginal(graph, &Evidence::empty(cards.len()), &vars)?;
    let r = table_len(&target.response_vars, cards);
    let mut out = joint.probabilities;
    for row in out.chunks_mut(r) {
        let pc: f64 = row.iter().sum();
        if pc > 0.0 {
            row.iter_mut().for_each(|p| *p /= pc);
        }
    }
    Ok(out)
}

/// Conditional divergence `Σ_ctx Σ_resp Q log(Q / P)` with contexts weighted
/// uniformly. Terms with `Q = 0` contribute nothing.
pub fn divergence_to_target(graph: &ChainFactorGraph, target: &ConditionalTarget) -> Result<f64> {
    let cards = graph.cardinalities();
    let vars = target.all_vars();
    check_target(graph, &vars)?;
    if target.values.len() != table_len(&vars, cards) {
        return Err(Error::InvalidArgument(format!(
            "target has {} entries, expected {}",
            target.values.len(),
            table_len(&vars, cards)
        )));
    }
    let r = table_len(&target.response_vars, cards);
    for (k, row) in target.values.chunks(r).enumerate() {
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > 1e-9 || row.iter().any(|&q| !(q >= 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "target row {k} is not a distribution (sums to {s})"
            )));
        }
    }
    let p = model_conditional_table(graph, target)?;
    let mut d = 0.0;
    for (k, (&q, &pm)) in target.values.iter().zip(&p).enumerate() {
        if q == 0.0 {
            continue;
        }
        if pm <= 0.0 {
            let mut config = vec![0; cards.len()];
            crate::table::unflatten(&vars, cards, k, &mut config);
            return Err(Error::ZeroModelProbability {
                context: target.context_vars.iter().map(|&v| config[v]).collect(),
                response: target.response_vars.iter().map(|&v| config[v]).collect(),
            });
        }
        d += q * (q / pm).ln();
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::VariableSpace;
    use approx::assert_abs_diff_eq;

    fn binary_chain(n: usize) -> ChainFactorGraph {
        let names: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let space = VariableSpace::with_cardinalities(&refs, &vec![2; n]).unwrap();
        let parents: Vec<Vec<usize>> = (0..n).map(|i| if i == 0 { vec![] } else { vec![i - 1] }).collect();
        ChainFactorGraph::bayesian_network(space, &parents).unwrap()
    }

    #[test]
    fn uniform_posterior_without_evidence() {
        let g = binary_chain(3);
        let m = posterior_marginal(&g, &Evidence::empty(3), &[0, 1, 2]).unwrap();
        for p in m.probabilities {
            assert_abs_diff_eq!(p, 0.125, epsilon = 1e-15);
        }
    }

    #[test]
    fn full_evidence_gives_point_mass() {
        let g = binary_chain(3);
        let e = Evidence::complete(&[1, 0, 1]);
        let m = posterior_marginal(&g, &e, &[2, 0]).unwrap();
        assert_eq!(m.probabilities, vec![0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn impossible_evidence_is_an_error() {
        let mut g = binary_chain(2);
        g.set_values(1, vec![1.0, 0.0, 1.0, 1.0]);
        let e = Evidence::empty(2).observe(0, 0).observe(1, 1);
        assert!(matches!(
            posterior_marginal(&g, &e, &[0]),
            Err(Error::ImpossibleEvidence { .. })
        ));
        let mut d = Dataset::new(2);
        d.push(Evidence::empty(2).observe(0, 1), 1.0).unwrap();
        d.push(e, 1.0).unwrap();
        assert_eq!(
            log_likelihood(&g, &d),
            Err(Error::ImpossibleEvidence { record: Some(1) })
        );
    }

    #[test]
    fn complete_data_counts() {
        let g = binary_chain(2);
        let d = Dataset::from_configs(2, &[vec![0, 1], vec![0, 1], vec![1, 0], vec![1, 1]]).unwrap();
        let m = completed_marginal(&g, &d, &[0, 1]).unwrap();
        assert_eq!(m.probabilities, vec![0.0, 0.5, 0.25, 0.25]);
    }

    #[test]
    fn all_hidden_gives_model_marginal() {
        let mut g = binary_chain(2);
        g.set_values(0, vec![0.3, 0.7]);
        let mut d = Dataset::new(2);
        d.push(Evidence::empty(2), 2.0).unwrap();
        let m = completed_marginal(&g, &d, &[0]).unwrap();
        assert_abs_diff_eq!(m.probabilities[1], 0.7, epsilon = 1e-15);
    }

    #[test]
    fn uniform_log_likelihood() {
        let g = binary_chain(4);
        let d = Dataset::from_configs(4, &[vec![0, 1, 1, 0]]).unwrap();
        assert_abs_diff_eq!(log_likelihood(&g, &d).unwrap(), -4.0 * 2f64.ln(), epsilon = 1e-14);
    }

    #[test]
    fn conditional_without_clamps_equals_likelihood() {
        let mut g = binary_chain(3);
        g.set_values(1, vec![0.2, 0.8, 0.6, 0.4]);
        let mut d = Dataset::new(3);
        d.push(Evidence::empty(3).observe(0, 1).observe(2, 0), 1.0).unwrap();
        d.push(Evidence::complete(&[0, 0, 1]), 0.5).unwrap();
        assert_eq!(
            conditional_log_likelihood(&g, &d).unwrap(),
            log_likelihood(&g, &d).unwrap()
        );
    }

    #[test]
    fn conditional_requires_observed_cell() {
        let g = binary_chain(2);
        let mut d = Dataset::new(2);
        d.push(Evidence::empty(2).clamp(0, 1), 1.0).unwrap();
        assert!(matches!(
            conditional_log_likelihood(&g, &d),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn divergence_identity_is_zero() {
        let mut g = binary_chain(2);
        g.set_values(1, vec![0.2, 0.8, 0.6, 0.4]);
        let target = ConditionalTarget {
            context_vars: vec![0],
            response_vars: vec![1],
            values: vec![0.2, 0.8, 0.6, 0.4],
        };
        assert_abs_diff_eq!(divergence_to_target(&g, &target).unwrap(), 0.0, epsilon = 1e-15);
        let mut zero = g.clone();
        zero.set_values(1, vec![0.0, 1.0, 0.6, 0.4]);
        assert!(matches!(
            divergence_to_target(&zero, &target),
            Err(Error::ZeroModelProbability { .. })
        ));
    }

    #[test]
    fn projection_of_marginal() {
        let m = MarginalTable {
            vars: vec![0, 1],
            probabilities: vec![0.1, 0.2, 0.3, 0.4],
        };
        let p = m.project(&[1], &[2, 2]);
        assert_abs_diff_eq!(p.probabilities[0], 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(p.probabilities[1], 0.6, epsilon = 1e-15);
    }
}
