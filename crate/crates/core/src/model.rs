//! Chain factor graphs: a product of locally normalized conditional factor
//! graphs, one per component set.
//!
//! A component set `A` splits into a chain component `C(A)` and a parent set
//! `π(A)`. Its conditional is the normalized product of the member potentials:
//!
//! ```text
//! P(x_C | x_π) = Π_{α→A} ψ_α(x_α) / Z_A(x_π)
//! ```
//!
//! and the joint distribution is the product of these conditionals over all
//! components, taken in an order where parents precede their children.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::table::{flat_index, for_each_config, table_len};

/// Upper bound on the joint state space handled by exact enumeration.
pub const MAX_JOINT_CONFIGURATIONS: u128 = 1 << 22;

/// Index of a potential (member cluster) within a graph.
pub type ClusterId = usize;

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub states: Vec<String>,
}

impl Variable {
    pub fn new(name: impl Into<String>, states: Vec<String>) -> Self {
        Variable {
            name: name.into(),
            states,
        }
    }

    pub fn with_cardinality(name: impl Into<String>, cardinality: usize) -> Self {
        Variable::new(name, (0..cardinality).map(|s| s.to_string()).collect())
    }

    pub fn cardinality(&self) -> usize {
        self.states.len()
    }

    pub fn state_index(&self, label: &str) -> Option<usize> {
        self.states.iter().position(|s| s == label)
    }
}

/// Ordered set of named categorical variables.
#[derive(Debug, Clone, PartialEq)]
pub struct VariableSpace {
    variables: Vec<Variable>,
    cards: Vec<usize>,
}

impl VariableSpace {
    pub fn new(variables: Vec<Variable>) -> Result<Self> {
        let mut names = BTreeSet::new();
        for v in &variables {
            if !names.insert(v.name.as_str()) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate variable name `{}`",
                    v.name
                )));
            }
            if v.states.is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "variable `{}` has no states",
                    v.name
                )));
            }
            let labels: BTreeSet<_> = v.states.iter().collect();
            if labels.len() != v.states.len() {
                return Err(Error::InvalidArgument(format!(
                    "variable `{}` has duplicate state labels",
                    v.name
                )));
            }
        }
        let cards = variables.iter().map(Variable::cardinality).collect();
        Ok(VariableSpace { variables, cards })
    }

    /// Variables named `names` with numeric state labels.
    pub fn with_cardinalities(names: &[&str], cards: &[usize]) -> Result<Self> {
        assert_eq!(names.len(), cards.len());
        VariableSpace::new(
            names
                .iter()
                .zip(cards)
                .map(|(n, &c)| Variable::with_cardinality(*n, c))
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, id: usize) -> &Variable {
        &self.variables[id]
    }

    pub fn cardinalities(&self) -> &[usize] {
        &self.cards
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    /// Size of the joint state space, saturating at `u128::MAX`.
    pub fn joint_size(&self) -> u128 {
        self.cards
            .iter()
            .fold(1u128, |acc, &c| acc.saturating_mul(c as u128))
    }
}

/// Ordered set of variable ids.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Cluster(Vec<usize>);

impl Cluster {
    pub fn new(ids: Vec<usize>) -> Result<Self> {
        let set: BTreeSet<_> = ids.iter().collect();
        if set.len() != ids.len() {
            return Err(Error::InvalidArgument(format!(
                "cluster {ids:?} lists a variable twice"
            )));
        }
        Ok(Cluster(ids))
    }

    pub fn empty() -> Self {
        Cluster(Vec::new())
    }

    pub fn vars(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, v: usize) -> bool {
        self.0.contains(&v)
    }

    pub fn is_subset_of(&self, other: &[usize]) -> bool {
        self.0.iter().all(|v| other.contains(v))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComponentSet {
    pub id: String,
    /// Chain component `C(A)`.
    pub chain: Cluster,
    /// Parent set `π(A)`, possibly empty.
    pub parents: Cluster,
    /// Member potentials `α → A`.
    pub members: Vec<ClusterId>,
}

impl ComponentSet {
    /// Variables of `A`: parents first, then the chain component.
    pub fn scope(&self) -> Vec<usize> {
        self.parents.vars().iter().chain(self.chain.vars()).copied().collect()
    }
}

/// Dense non-negative table over a cluster, last variable fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialTable {
    pub cluster: Cluster,
    pub values: Vec<f64>,
}

impl PotentialTable {
    pub fn new(cluster: Cluster, values: Vec<f64>) -> Self {
        PotentialTable { cluster, values }
    }

    pub fn constant(cluster: Cluster, cards: &[usize], value: f64) -> Self {
        let n = table_len(cluster.vars(), cards);
        PotentialTable {
            cluster,
            values: vec![value; n],
        }
    }

    /// Entry selected by a full assignment of the variable space.
    #[inline]
    pub fn at(&self, cards: &[usize], config: &[usize]) -> f64 {
        self.values[flat_index(self.cluster.vars(), cards, config)]
    }
}

/// A potential table together with the identifier used in model files.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    pub id: String,
    pub table: PotentialTable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainFactorGraph {
    space: VariableSpace,
    components: Vec<ComponentSet>,
    potentials: Vec<Potential>,
}

impl ChainFactorGraph {
    /// Builds and validates a graph.
    pub fn new(
        space: VariableSpace,
        components: Vec<ComponentSet>,
        potentials: Vec<Potential>,
    ) -> Result<Self> {
        let graph = ChainFactorGraph::new_unchecked(space, components, potentials);
        let report = validate_graph(&graph);
        if report.is_valid() {
            Ok(graph)
        } else {
            Err(Error::Validation(report))
        }
    }

    /// Builds a graph without validation. Useful for exercising
    /// [`validate_graph`] on malformed input.
    pub fn new_unchecked(
        space: VariableSpace,
        components: Vec<ComponentSet>,
        potentials: Vec<Potential>,
    ) -> Self {
        ChainFactorGraph {
            space,
            components,
            potentials,
        }
    }

    /// Bayesian network with one component per variable and a single member
    /// cluster `(parents..., child)`, uniformly initialized. Components are
    /// emitted in a topological order of the parent relation.
    pub fn bayesian_network(space: VariableSpace, parents: &[Vec<usize>]) -> Result<Self> {
        if parents.len() != space.len() {
            return Err(Error::InvalidArgument(
                "need one parent list per variable".into(),
            ));
        }
        let n = space.len();
        let mut placed = vec![false; n];
        let mut order = Vec::with_capacity(n);
        while order.len() < n {
            let next = (0..n).find(|&i| {
                !placed[i] && parents[i].iter().all(|&p| p < n && placed[p])
            });
            match next {
                Some(i) => {
                    placed[i] = true;
                    order.push(i);
                }
                None => {
                    return Err(Error::InvalidArgument(
                        "parent relation is cyclic or references unknown variables".into(),
                    ))
                }
            }
        }
        let cards = space.cardinalities().to_vec();
        let mut components = Vec::with_capacity(n);
        let mut potentials = Vec::with_capacity(n);
        for i in order {
            let name = space.variable(i).name.clone();
            let mut vars = parents[i].clone();
            vars.push(i);
            let cluster = Cluster::new(vars)?;
            components.push(ComponentSet {
                id: name.clone(),
                chain: Cluster::new(vec![i])?,
                parents: Cluster::new(parents[i].clone())?,
                members: vec![potentials.len()],
            });
            potentials.push(Potential {
                id: format!("psi_{name}"),
                table: PotentialTable::constant(cluster, &cards, 1.0),
            });
        }
        ChainFactorGraph::new(space, components, potentials)
    }

    /// Undirected model: one component covering every variable, with the
    /// given member clusters uniformly initialized.
    pub fn undirected(space: VariableSpace, clusters: &[Vec<usize>]) -> Result<Self> {
        let cards = space.cardinalities().to_vec();
        let potentials = clusters
            .iter()
            .enumerate()
            .map(|(k, vars)| {
                Ok(Potential {
                    id: format!("psi_{k}"),
                    table: PotentialTable::constant(Cluster::new(vars.clone())?, &cards, 1.0),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let component = ComponentSet {
            id: "all".into(),
            chain: Cluster::new((0..space.len()).collect())?,
            parents: Cluster::empty(),
            members: (0..clusters.len()).collect(),
        };
        ChainFactorGraph::new(space, vec![component], potentials)
    }

    pub fn space(&self) -> &VariableSpace {
        &self.space
    }

    pub fn cardinalities(&self) -> &[usize] {
        self.space.cardinalities()
    }

    pub fn components(&self) -> &[ComponentSet] {
        &self.components
    }

    pub fn component(&self, id: usize) -> &ComponentSet {
        &self.components[id]
    }

    pub fn potentials(&self) -> &[Potential] {
        &self.potentials
    }

    pub fn potential(&self, id: ClusterId) -> &Potential {
        &self.potentials[id]
    }

    pub fn table(&self, id: ClusterId) -> &PotentialTable {
        &self.potentials[id].table
    }

    pub fn cluster_id(&self, name: &str) -> Option<ClusterId> {
        self.potentials.iter().position(|p| p.id == name)
    }

    pub fn component_index(&self, name: &str) -> Option<usize> {
        self.components.iter().position(|c| c.id == name)
    }

    /// Component owning potential `id`.
    pub fn owner(&self, id: ClusterId) -> usize {
        self.components
            .iter()
            .position(|c| c.members.contains(&id))
            .expect("validated graphs assign every potential to a component")
    }

    /// Replaces the values of potential `id`. The length must match.
    pub fn set_values(&mut self, id: ClusterId, values: Vec<f64>) {
        assert_eq!(values.len(), self.potentials[id].table.values.len());
        self.potentials[id].table.values = values;
    }

    pub fn values_mut(&mut self, id: ClusterId) -> &mut [f64] {
        &mut self.potentials[id].table.values
    }

    /// A component order satisfying the parent-precedence condition, if one
    /// exists.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let n = self.components.len();
        let mut placed = vec![false; n];
        let mut covered: BTreeSet<usize> = BTreeSet::new();
        let mut order = Vec::with_capacity(n);
        while order.len() < n {
            let next = (0..n).find(|&a| {
                !placed[a]
                    && self.components[a]
                        .parents
                        .vars()
                        .iter()
                        .all(|v| covered.contains(v))
            })?;
            placed[next] = true;
            covered.extend(self.components[next].chain.vars());
            order.push(next);
        }
        Some(order)
    }

    /// Sets every potential to all-ones.
    pub fn reset_uniform(&mut self) {
        for p in &mut self.potentials {
            p.table.values.iter_mut().for_each(|v| *v = 1.0);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    EmptyChain { component: String },
    ChainParentOverlap { component: String, variable: String },
    ChainsNotDisjoint { variable: String, first: String, second: String },
    VariableNotCovered { variable: String },
    UnknownVariable { context: String, id: usize },
    UnknownMember { component: String, member: usize },
    SharedMember { cluster: String },
    OrphanPotential { cluster: String },
    DuplicateId { id: String },
    EmptyCluster { cluster: String },
    MemberOutsideComponent { component: String, cluster: String },
    MembersDoNotCover { component: String, missing: Vec<String> },
    ParentNotPreceding { component: String, variable: String },
    NoTopologicalOrder,
    PotentialLength { cluster: String, expected: usize, actual: usize },
    InvalidEntry { cluster: String, index: usize, value: f64 },
    AllZero { cluster: String },
    StateSpaceTooLarge { configurations: u128 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match self {
            EmptyChain { component } => write!(f, "component `{component}` has an empty chain"),
            ChainParentOverlap { component, variable } => write!(
                f,
                "component `{component}` lists `{variable}` as both chain and parent"
            ),
            ChainsNotDisjoint {
                variable,
                first,
                second,
            } => write!(
                f,
                "components not disjoint: `{variable}` is in the chains of `{first}` and `{second}`"
            ),
            VariableNotCovered { variable } => {
                write!(f, "variable `{variable}` belongs to no chain component")
            }
            UnknownVariable { context, id } => write!(f, "{context} references unknown variable {id}"),
            UnknownMember { component, member } => write!(
                f,
                "component `{component}` references unknown cluster {member}"
            ),
            SharedMember { cluster } => {
                write!(f, "cluster `{cluster}` is a member of more than one component")
            }
            OrphanPotential { cluster } => write!(f, "cluster `{cluster}` belongs to no component"),
            DuplicateId { id } => write!(f, "duplicate identifier `{id}`"),
            EmptyCluster { cluster } => write!(f, "cluster `{cluster}` is empty"),
            MemberOutsideComponent { component, cluster } => write!(
                f,
                "cluster `{cluster}` is not contained in component `{component}`"
            ),
            MembersDoNotCover { component, missing } => write!(
                f,
                "member clusters of `{component}` do not cover {missing:?}"
            ),
            ParentNotPreceding { component, variable } => write!(
                f,
                "parent `{variable}` of component `{component}` is not in a preceding chain component"
            ),
            NoTopologicalOrder => write!(f, "no component order places parents before children"),
            PotentialLength {
                cluster,
                expected,
                actual,
            } => write!(
                f,
                "potential `{cluster}` has {actual} entries, expected {expected}"
            ),
            InvalidEntry {
                cluster,
                index,
                value,
            } => write!(
                f,
                "potential `{cluster}` entry {index} is {value}; entries must be finite and non-negative"
            ),
            AllZero { cluster } => write!(f, "potential `{cluster}` has no positive entry"),
            StateSpaceTooLarge { configurations } => write!(
                f,
                "joint state space has {configurations} configurations (limit {MAX_JOINT_CONFIGURATIONS})"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    /// Non-fatal findings such as single-state variables.
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "  - {v}")?;
        }
        for w in &self.warnings {
            writeln!(f, "  ~ {w}")?;
        }
        Ok(())
    }
}

/// Checks every structural invariant of a chain factor graph. Violations are
/// returned as data; an empty report means the graph is valid.
pub fn validate_graph(graph: &ChainFactorGraph) -> ValidationReport {
    let mut report = ValidationReport::default();
    let space = &graph.space;
    let n = space.len();
    let name = |v: usize| -> String {
        if v < n {
            space.variable(v).name.clone()
        } else {
            format!("#{v}")
        }
    };

    for v in space.variables() {
        if v.cardinality() == 1 {
            report
                .warnings
                .push(format!("variable `{}` has a single state", v.name));
        }
    }
    let size = space.joint_size();
    if size > MAX_JOINT_CONFIGURATIONS {
        report
            .violations
            .push(Violation::StateSpaceTooLarge { configurations: size });
    }

    let mut ids = BTreeSet::new();
    for c in &graph.components {
        if !ids.insert(format!("component:{}", c.id)) {
            report.violations.push(Violation::DuplicateId { id: c.id.clone() });
        }
    }
    for p in &graph.potentials {
        if !ids.insert(format!("cluster:{}", p.id)) {
            report.violations.push(Violation::DuplicateId { id: p.id.clone() });
        }
    }

    // Potentials on their own.
    for p in &graph.potentials {
        let vars = p.table.cluster.vars();
        if vars.is_empty() {
            report
                .violations
                .push(Violation::EmptyCluster { cluster: p.id.clone() });
            continue;
        }
        if let Some(&bad) = vars.iter().find(|&&v| v >= n) {
            report.violations.push(Violation::UnknownVariable {
                context: format!("cluster `{}`", p.id),
                id: bad,
            });
            continue;
        }
        let expected = table_len(vars, space.cardinalities());
        if expected != p.table.values.len() {
            report.violations.push(Violation::PotentialLength {
                cluster: p.id.clone(),
                expected,
                actual: p.table.values.len(),
            });
            continue;
        }
        if let Some((index, &value)) = p
            .table
            .values
            .iter()
            .enumerate()
            .find(|(_, &x)| !(x.is_finite() && x >= 0.0))
        {
            report.violations.push(Violation::InvalidEntry {
                cluster: p.id.clone(),
                index,
                value,
            });
        } else if !p.table.values.iter().any(|&x| x > 0.0) {
            report
                .violations
                .push(Violation::AllZero { cluster: p.id.clone() });
        }
    }

    // Membership.
    let mut owner: Vec<Option<usize>> = vec![None; graph.potentials.len()];
    for (a, c) in graph.components.iter().enumerate() {
        for &m in &c.members {
            if m >= graph.potentials.len() {
                report.violations.push(Violation::UnknownMember {
                    component: c.id.clone(),
                    member: m,
                });
                continue;
            }
            match owner[m] {
                Some(prev) if prev != a => report.violations.push(Violation::SharedMember {
                    cluster: graph.potentials[m].id.clone(),
                }),
                _ => owner[m] = Some(a),
            }
        }
    }
    for (k, o) in owner.iter().enumerate() {
        if o.is_none() {
            report.violations.push(Violation::OrphanPotential {
                cluster: graph.potentials[k].id.clone(),
            });
        }
    }

    // Components.
    let mut chain_owner: HashMap<usize, usize> = HashMap::new();
    for (a, c) in graph.components.iter().enumerate() {
        if c.chain.is_empty() {
            report
                .violations
                .push(Violation::EmptyChain { component: c.id.clone() });
        }
        for &v in c.chain.vars().iter().chain(c.parents.vars()) {
            if v >= n {
                report.violations.push(Violation::UnknownVariable {
                    context: format!("component `{}`", c.id),
                    id: v,
                });
            }
        }
        for &v in c.chain.vars() {
            if c.parents.contains(v) {
                report.violations.push(Violation::ChainParentOverlap {
                    component: c.id.clone(),
                    variable: name(v),
                });
            }
            if let Some(&b) = chain_owner.get(&v) {
                report.violations.push(Violation::ChainsNotDisjoint {
                    variable: name(v),
                    first: graph.components[b].id.clone(),
                    second: c.id.clone(),
                });
            } else {
                chain_owner.insert(v, a);
            }
        }
        let scope = c.scope();
        let mut covered = BTreeSet::new();
        for &m in &c.members {
            if m >= graph.potentials.len() {
                continue;
            }
            let cluster = &graph.potentials[m].table.cluster;
            if !cluster.is_subset_of(&scope) {
                report.violations.push(Violation::MemberOutsideComponent {
                    component: c.id.clone(),
                    cluster: graph.potentials[m].id.clone(),
                });
            }
            covered.extend(cluster.vars().iter().copied());
        }
        let missing: Vec<String> = scope
            .iter()
            .filter(|v| !covered.contains(v))
            .map(|&v| name(v))
            .collect();
        if !missing.is_empty() {
            report.violations.push(Violation::MembersDoNotCover {
                component: c.id.clone(),
                missing,
            });
        }
    }
    for v in 0..n {
        if !chain_owner.contains_key(&v) {
            report
                .violations
                .push(Violation::VariableNotCovered { variable: name(v) });
        }
    }

    // Stored order must place parents in preceding chains.
    let mut seen = BTreeSet::new();
    let mut order_ok = true;
    for c in &graph.components {
        for &v in c.parents.vars() {
            if !seen.contains(&v) {
                order_ok = false;
                report.violations.push(Violation::ParentNotPreceding {
                    component: c.id.clone(),
                    variable: name(v),
                });
            }
        }
        seen.extend(c.chain.vars().iter().copied());
    }
    if !order_ok && graph.topological_order().is_none() {
        report.violations.push(Violation::NoTopologicalOrder);
    }
    report
}

/// Cached normalizers for fast repeated evaluation of a fixed graph. Each
/// component's `Z_A` table is computed on first use.
#[derive(Debug, Clone)]
pub struct Evaluator<'g> {
    graph: &'g ChainFactorGraph,
    /// Per component, `Z_A` indexed by the flat parent configuration.
    normalizers: Vec<OnceLock<Vec<f64>>>,
}

impl<'g> Evaluator<'g> {
    pub fn new(graph: &'g ChainFactorGraph) -> Self {
        Evaluator {
            graph,
            normalizers: (0..graph.components.len()).map(|_| OnceLock::new()).collect(),
        }
    }

    pub fn graph(&self) -> &'g ChainFactorGraph {
        self.graph
    }

    pub fn normalizers(&self, component: usize) -> &[f64] {
        self.normalizers[component].get_or_init(|| normalizer_table(self.graph, component))
    }

    /// Product of every potential at `config`.
    #[inline]
    pub fn unnormalized(&self, config: &[usize]) -> f64 {
        let cards = self.graph.cardinalities();
        self.graph
            .potentials
            .iter()
            .map(|p| p.table.at(cards, config))
            .product()
    }

    /// `Z_A` at the parent configuration contained in `config`.
    pub fn normalizer_at(&self, component: usize, config: &[usize]) -> Result<f64> {
        let c = &self.graph.components[component];
        let cards = self.graph.cardinalities();
        let z = self.normalizers(component)[flat_index(c.parents.vars(), cards, config)];
        if z > 0.0 {
            Ok(z)
        } else {
            Err(Error::ZeroNormalizer {
                component: c.id.clone(),
                parent_config: c.parents.vars().iter().map(|&v| config[v]).collect(),
            })
        }
    }

    /// Conditional `P(x_C | x_π)` of one component at a full assignment.
    pub fn conditional(&self, component: usize, config: &[usize]) -> Result<f64> {
        let cards = self.graph.cardinalities();
        let z = self.normalizer_at(component, config)?;
        let num: f64 = self.graph.components[component]
            .members
            .iter()
            .map(|&m| self.graph.potentials[m].table.at(cards, config))
            .product();
        Ok(num / z)
    }

    /// Joint probability of a full assignment.
    pub fn joint(&self, config: &[usize]) -> Result<f64> {
        let mut p = 1.0;
        for a in 0..self.graph.components.len() {
            p *= self.conditional(a, config)?;
            if p == 0.0 {
                return Ok(0.0);
            }
        }
        Ok(p)
    }
}

fn normalizer_table(graph: &ChainFactorGraph, component: usize) -> Vec<f64> {
    let c = &graph.components[component];
    let cards = graph.cardinalities();
    let parents = c.parents.vars();
    let mut out = vec![0.0; table_len(parents, cards)];
    let mut config = vec![0; cards.len()];
    let members: Vec<&PotentialTable> = c.members.iter().map(|&m| &graph.potentials[m].table).collect();
    let scope = c.scope();
    for_each_config(&scope, cards, &mut config, |x| {
        let prod: f64 = members.iter().map(|t| t.at(cards, x)).product();
        out[flat_index(parents, cards, x)] += prod;
    });
    out
}

/// `Z_A(x_π)`: sum over the chain component of the product of member
/// potentials. `parent_config` lists the states of `π(A)` in order.
pub fn component_normalizer(
    graph: &ChainFactorGraph,
    component: usize,
    parent_config: &[usize],
) -> Result<f64> {
    let c = &graph.components[component];
    if parent_config.len() != c.parents.len() {
        return Err(Error::InvalidArgument(format!(
            "component `{}` has {} parents, got {} states",
            c.id,
            c.parents.len(),
            parent_config.len()
        )));
    }
    let cards = graph.cardinalities();
    let mut config = vec![0; cards.len()];
    for (&v, &s) in c.parents.vars().iter().zip(parent_config) {
        if s >= cards[v] {
            return Err(Error::InvalidArgument(format!(
                "state {s} out of range for variable {v}"
            )));
        }
        config[v] = s;
    }
    let mut z = 0.0;
    for_each_config(c.chain.vars(), cards, &mut config, |x| {
        z += c
            .members
            .iter()
            .map(|&m| graph.potentials[m].table.at(cards, x))
            .product::<f64>();
    });
    if z > 0.0 {
        Ok(z)
    } else {
        Err(Error::ZeroNormalizer {
            component: c.id.clone(),
            parent_config: parent_config.to_vec(),
        })
    }
}

/// `P(x_C(A) | x_π(A))` at a full assignment of the variable space (only the
/// entries of `A` are read).
pub fn component_conditional(
    graph: &ChainFactorGraph,
    component: usize,
    config: &[usize],
) -> Result<f64> {
    let c = &graph.components[component];
    let parent_config: Vec<usize> = c.parents.vars().iter().map(|&v| config[v]).collect();
    let z = component_normalizer(graph, component, &parent_config)?;
    let cards = graph.cardinalities();
    let num: f64 = c
        .members
        .iter()
        .map(|&m| graph.potentials[m].table.at(cards, config))
        .product();
    Ok(num / z)
}

/// Joint probability of a full assignment.
pub fn joint_probability(graph: &ChainFactorGraph, config: &[usize]) -> Result<f64> {
    check_config(graph, config)?;
    Evaluator::new(graph).joint(config)
}

pub(crate) fn check_config(graph: &ChainFactorGraph, config: &[usize]) -> Result<()> {
    let cards = graph.cardinalities();
    if config.len() != cards.len() || config.iter().zip(cards).any(|(&s, &c)| s >= c) {
        return Err(Error::InvalidArgument(format!(
            "configuration {config:?} does not match cardinalities {cards:?}"
        )));
    }
    Ok(())
}

/// Multiplies potential `cluster` by a positive constant. The represented
/// distribution is unchanged.
pub fn rescale_potential(
    graph: &ChainFactorGraph,
    cluster: ClusterId,
    factor: f64,
) -> Result<ChainFactorGraph> {
    if !(factor > 0.0 && factor.is_finite()) {
        return Err(Error::NonPositiveFactor(factor));
    }
    let mut out = graph.clone();
    out.values_mut(cluster).iter_mut().for_each(|v| *v *= factor);
    Ok(out)
}
