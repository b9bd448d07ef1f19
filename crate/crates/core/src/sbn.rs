//! Two-layer sigmoid belief networks with ±1 units.
//!
//! A bottom unit `y_i` with top-layer parents `x_j` has
//! `P(y_i = +1 | x) = σ(2(h_i + Σ_j w_ij x_j))`. The same conditional is a
//! normalized product of pairwise potentials
//! `ψ_ij(y_i, x_j) = exp(y_i (w_ij x_j + h_i / k_i))` with `k_i` the number of
//! parents, so the network is a chain factor graph and can be fitted by IPF.
//! Gradient baselines (Polak–Ribière conjugate gradient and steepest ascent)
//! work directly on the weights and biases.

use std::cell::Cell;
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::inference::{Dataset, Evidence};
use crate::ml_ipf::{fit_ml, CycleRecord, FitConfig, FitTrace, Schedule, Termination};
use crate::model::{
    ChainFactorGraph, Cluster, ClusterId, ComponentSet, Potential, PotentialTable, Variable,
    VariableSpace,
};

/// State index of `+1`; `-1` is state 0.
pub const PLUS: usize = 1;

#[inline]
pub fn spin(state: usize) -> f64 {
    if state == PLUS {
        1.0
    } else {
        -1.0
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log σ(x)` without overflow.
fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SigmoidNet {
    pub n_top: usize,
    pub n_bottom: usize,
    /// Per bottom unit, the indices of its top-layer parents.
    pub parents: Vec<Vec<usize>>,
    /// Per bottom unit, one weight per listed parent.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    /// Fixed `P(x_j = +1)` of the top layer.
    pub top_marginals: Vec<f64>,
}

impl SigmoidNet {
    /// Every bottom unit connected to every top unit; zero weights and
    /// biases; top marginals 0.5.
    pub fn fully_connected(n_top: usize, n_bottom: usize) -> Self {
        SigmoidNet {
            n_top,
            n_bottom,
            parents: vec![(0..n_top).collect(); n_bottom],
            weights: vec![vec![0.0; n_top]; n_bottom],
            biases: vec![0.0; n_bottom],
            top_marginals: vec![0.5; n_top],
        }
    }

    pub fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.parents.len() != self.n_bottom
            || self.weights.len() != self.n_bottom
            || self.biases.len() != self.n_bottom
            || self.top_marginals.len() != self.n_top
        {
            return bad("sigmoid net dimensions are inconsistent");
        }
        for (pa, w) in self.parents.iter().zip(&self.weights) {
            if pa.len() != w.len() || pa.iter().any(|&j| j >= self.n_top) {
                return bad("parents must be top-layer units with one weight each");
            }
            let mut s = pa.clone();
            s.sort_unstable();
            s.dedup();
            if s.len() != pa.len() {
                return bad("duplicate parent");
            }
        }
        if self
            .weights
            .iter()
            .flatten()
            .chain(&self.biases)
            .any(|v| !v.is_finite())
        {
            return bad("weights and biases must be finite");
        }
        if self.top_marginals.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
            return bad("top marginals must lie strictly between 0 and 1");
        }
        Ok(())
    }

    pub fn n_vars(&self) -> usize {
        self.n_top + self.n_bottom
    }

    /// Variable id of bottom unit `i`.
    pub fn bottom_var(&self, i: usize) -> usize {
        self.n_top + i
    }

    pub fn n_params(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>() + self.n_bottom
    }

    /// Weights (child-major, parent order) followed by biases.
    pub fn params(&self) -> Vec<f64> {
        self.weights
            .iter()
            .flatten()
            .chain(&self.biases)
            .copied()
            .collect()
    }

    pub fn set_params(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.n_params());
        let mut it = params.iter().copied();
        for w in self.weights.iter_mut().flatten() {
            *w = it.next().unwrap();
        }
        for h in &mut self.biases {
            *h = it.next().unwrap();
        }
    }

    /// `x1..xn` for the top layer, `y1..ym` for the bottom, states `-1`,`+1`.
    pub fn space(&self) -> VariableSpace {
        let states = || vec!["-1".to_string(), "+1".to_string()];
        let vars = (0..self.n_top)
            .map(|j| Variable::new(format!("x{}", j + 1), states()))
            .chain((0..self.n_bottom).map(|i| Variable::new(format!("y{}", i + 1), states())))
            .collect();
        VariableSpace::new(vars).expect("generated names are unique")
    }

    /// Local field `h_i + Σ_j w_ij x_j` of bottom unit `i`.
    pub fn field(&self, i: usize, config: &[usize]) -> f64 {
        self.biases[i]
            + self.parents[i]
                .iter()
                .zip(&self.weights[i])
                .map(|(&j, &w)| w * spin(config[j]))
                .sum::<f64>()
    }

    /// `P(y_i = +1 | x)`.
    pub fn conditional_plus(&self, i: usize, config: &[usize]) -> f64 {
        sigmoid(2.0 * self.field(i, config))
    }
}

/// Converts weights and biases to a chain factor graph with one pairwise
/// potential per (child, parent) edge.
pub fn weights_to_graph(net: &SigmoidNet) -> Result<ChainFactorGraph> {
    net.check()?;
    let space = net.space();
    let cards = space.cardinalities().to_vec();
    let mut components = Vec::new();
    let mut potentials = Vec::new();
    for j in 0..net.n_top {
        let p = net.top_marginals[j];
        components.push(ComponentSet {
            id: format!("x{}", j + 1),
            chain: Cluster::new(vec![j])?,
            parents: Cluster::empty(),
            members: vec![potentials.len()],
        });
        potentials.push(Potential {
            id: format!("psi_x{}", j + 1),
            table: PotentialTable::new(Cluster::new(vec![j])?, vec![1.0 - p, p]),
        });
    }
    for i in 0..net.n_bottom {
        let y = net.bottom_var(i);
        let pa = &net.parents[i];
        let mut members = Vec::new();
        if pa.is_empty() {
            let h = net.biases[i];
            members.push(potentials.len());
            potentials.push(Potential {
                id: format!("psi_y{}", i + 1),
                table: PotentialTable::new(Cluster::new(vec![y])?, vec![(-h).exp(), h.exp()]),
            });
        } else {
            let share = net.biases[i] / pa.len() as f64;
            for (&j, &w) in pa.iter().zip(&net.weights[i]) {
                let mut t = PotentialTable::constant(Cluster::new(vec![y, j])?, &cards, 0.0);
                for ys in 0..2 {
                    for xs in 0..2 {
                        t.values[ys * 2 + xs] = (spin(ys) * (w * spin(xs) + share)).exp();
                    }
                }
                members.push(potentials.len());
                potentials.push(Potential {
                    id: format!("psi_y{}_x{}", i + 1, j + 1),
                    table: t,
                });
            }
        }
        components.push(ComponentSet {
            id: format!("y{}", i + 1),
            chain: Cluster::new(vec![y])?,
            parents: Cluster::new(pa.clone())?,
            members,
        });
    }
    ChainFactorGraph::new(space, components, potentials)
}

/// Recovers weights and biases from a graph in sigmoid shape: the first
/// `n_top` variables form parentless single-potential components, every
/// other variable is a binary child whose members are one pairwise potential
/// per parent plus optional singleton bias potentials.
pub fn graph_to_weights(graph: &ChainFactorGraph, n_top: usize) -> Result<SigmoidNet> {
    let shape = |m: String| Error::NonSigmoidShape(m);
    let cards = graph.cardinalities();
    let n = cards.len();
    if n_top > n || cards.iter().any(|&c| c != 2) {
        return Err(shape("all variables must be binary".into()));
    }
    let component_of = |v: usize| {
        graph
            .components()
            .iter()
            .position(|c| c.chain.vars() == [v])
            .ok_or_else(|| shape(format!("variable {v} is not a single-variable chain component")))
    };
    let log_entry = |id: ClusterId, k: usize| -> Result<f64> {
        let v = graph.table(id).values[k];
        if v > 0.0 && v.is_finite() {
            Ok(v.ln())
        } else {
            Err(shape(format!("potential `{}` is not strictly positive", graph.potential(id).id)))
        }
    };
    let mut top_marginals = Vec::with_capacity(n_top);
    for j in 0..n_top {
        let c = graph.component(component_of(j)?);
        if !c.parents.is_empty() {
            return Err(shape(format!("top unit {j} has parents")));
        }
        let (mut lp, mut lm) = (0.0, 0.0);
        for &m in &c.members {
            if graph.table(m).cluster.vars() != [j] {
                return Err(shape(format!("top unit {j} has a non-singleton potential")));
            }
            lm += log_entry(m, 0)?;
            lp += log_entry(m, 1)?;
        }
        top_marginals.push(sigmoid(lp - lm));
    }
    let n_bottom = n - n_top;
    let mut parents = Vec::with_capacity(n_bottom);
    let mut weights = Vec::with_capacity(n_bottom);
    let mut biases = Vec::with_capacity(n_bottom);
    for i in 0..n_bottom {
        let y = n_top + i;
        let c = graph.component(component_of(y)?);
        let pa = c.parents.vars().to_vec();
        if pa.iter().any(|&j| j >= n_top) {
            return Err(shape(format!("unit {y} has a parent outside the top layer")));
        }
        let mut w = vec![0.0; pa.len()];
        let mut seen = vec![false; pa.len()];
        let mut h = 0.0;
        for &m in &c.members {
            let vars = graph.table(m).cluster.vars();
            match vars {
                [v] if *v == y => {
                    h += 0.5 * (log_entry(m, 1)? - log_entry(m, 0)?);
                }
                [a, b] if *a == y || *b == y => {
                    let parent = if *a == y { *b } else { *a };
                    let k = pa
                        .iter()
                        .position(|&p| p == parent)
                        .ok_or_else(|| shape(format!("potential pairs {y} with non-parent {parent}")))?;
                    if seen[k] {
                        return Err(shape(format!("parent {parent} of unit {y} has two potentials")));
                    }
                    seen[k] = true;
                    // Entry index for (y state, x state) under the cluster order.
                    let idx = |ys: usize, xs: usize| if *a == y { ys * 2 + xs } else { xs * 2 + ys };
                    let d_plus = log_entry(m, idx(1, 1))? - log_entry(m, idx(0, 1))?;
                    let d_minus = log_entry(m, idx(1, 0))? - log_entry(m, idx(0, 0))?;
                    w[k] = (d_plus - d_minus) / 4.0;
                    h += (d_plus + d_minus) / 4.0;
                }
                _ => {
                    return Err(shape(format!(
                        "potential `{}` is neither a bias nor a child-parent pair",
                        graph.potential(m).id
                    )))
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(shape(format!("some parent of unit {y} has no pairwise potential")));
        }
        parents.push(pa);
        weights.push(w);
        biases.push(h);
    }
    Ok(SigmoidNet {
        n_top,
        n_bottom,
        parents,
        weights,
        biases,
        top_marginals,
    })
}

fn complete_configs(net: &SigmoidNet, data: &Dataset) -> Result<Vec<(Vec<usize>, f64)>> {
    if data.n_vars() != net.n_vars() {
        return Err(Error::InvalidArgument(format!(
            "dataset has {} variables, network has {}",
            data.n_vars(),
            net.n_vars()
        )));
    }
    data.records()
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let states: Option<Vec<usize>> = r.evidence.states().into_iter().collect();
            match states {
                Some(s) if s.iter().all(|&x| x < 2) => Ok((s, r.weight)),
                _ => Err(Error::InvalidArgument(format!(
                    "record {i} is not a complete binary pattern"
                ))),
            }
        })
        .collect()
}

/// Average log-likelihood of complete data, evaluated directly from the
/// sigmoid parameterization.
pub fn sbn_log_likelihood(net: &SigmoidNet, data: &Dataset) -> Result<f64> {
    let records = complete_configs(net, data)?;
    Ok(log_likelihood_records(net, &records))
}

fn log_likelihood_records(net: &SigmoidNet, records: &[(Vec<usize>, f64)]) -> f64 {
    let mut acc = 0.0;
    let mut n = 0.0;
    for (x, w) in records {
        let mut l = 0.0;
        for j in 0..net.n_top {
            let p = net.top_marginals[j];
            l += if x[j] == PLUS { p.ln() } else { (1.0 - p).ln() };
        }
        for i in 0..net.n_bottom {
            l += log_sigmoid(2.0 * spin(x[net.bottom_var(i)]) * net.field(i, x));
        }
        acc += w * l;
        n += w;
    }
    acc / n
}

#[derive(Debug, Clone, PartialEq)]
pub struct SbnGradient {
    /// `∂L/∂w_ij`, aligned with `net.weights`.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
}

impl SbnGradient {
    pub fn flatten(&self) -> Vec<f64> {
        self.weights
            .iter()
            .flatten()
            .chain(&self.biases)
            .copied()
            .collect()
    }
}

/// Exact gradient of the average log-likelihood:
/// `∂L/∂w_ij = ⟨y_i x_j⟩ − ⟨⟨y_i⟩_x x_j⟩`, `∂L/∂h_i = ⟨y_i⟩ − ⟨⟨y_i⟩_x⟩`, with
/// `⟨y_i⟩_x = tanh(h_i + Σ_j w_ij x_j)`.
pub fn sbn_gradient(net: &SigmoidNet, data: &Dataset) -> Result<SbnGradient> {
    let records = complete_configs(net, data)?;
    Ok(gradient_records(net, &records))
}

fn gradient_records(net: &SigmoidNet, records: &[(Vec<usize>, f64)]) -> SbnGradient {
    let mut gw: Vec<Vec<f64>> = net.weights.iter().map(|w| vec![0.0; w.len()]).collect();
    let mut gh = vec![0.0; net.n_bottom];
    let mut n = 0.0;
    for (x, w) in records {
        for i in 0..net.n_bottom {
            let resid = spin(x[net.bottom_var(i)]) - net.field(i, x).tanh();
            gh[i] += w * resid;
            for (k, &j) in net.parents[i].iter().enumerate() {
                gw[i][k] += w * resid * spin(x[j]);
            }
        }
        n += w;
    }
    gw.iter_mut().flatten().for_each(|g| *g /= n);
    gh.iter_mut().for_each(|g| *g /= n);
    SbnGradient {
        weights: gw,
        biases: gh,
    }
}

/// A smooth function to be maximized.
pub trait Objective {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>);
}

struct SbnObjective {
    net: SigmoidNet,
    records: Vec<(Vec<usize>, f64)>,
}

impl SbnObjective {
    fn at(&self, x: &[f64]) -> SigmoidNet {
        let mut net = self.net.clone();
        net.set_params(x);
        net
    }
}

impl Objective for SbnObjective {
    fn dim(&self) -> usize {
        self.net.n_params()
    }

    fn value(&self, x: &[f64]) -> f64 {
        log_likelihood_records(&self.at(x), &self.records)
    }

    fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let net = self.at(x);
        (
            log_likelihood_records(&net, &self.records),
            gradient_records(&net, &self.records).flatten(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    ConjugateGradient,
    SteepestAscent,
}

/// Result of [`maximize`]: objective after every cycle (entry 0 is the start).
#[derive(Debug, Clone, PartialEq)]
pub struct Optimized {
    pub x: Vec<f64>,
    pub values: Vec<f64>,
    pub wall_ms: Vec<f64>,
    pub line_search_failures: usize,
    pub converged: bool,
}

const LINE_TOL: f64 = 1e-8;
const LINE_MAX_EVALS: usize = 100;
const GOLDEN: f64 = 1.618_033_988_749_895;

struct LineResult {
    t: f64,
    value: f64,
}

/// Maximizes `phi` along `t > 0` starting from `phi(0) = f0`: brackets a
/// maximum by expansion (or contraction when the first trial overshoots),
/// then refines with Brent's parabolic/golden-section method to relative
/// tolerance 1e-8. Uses at most 100 evaluations.
fn line_maximize<F: Fn(f64) -> f64>(phi: F, f0: f64, t0: f64) -> Result<LineResult> {
    let evals = Cell::new(0usize);
    let eval = |t: f64| {
        evals.set(evals.get() + 1);
        phi(t)
    };
    let mut a = 0.0;
    let (mut b, mut fb) = (t0, eval(t0));
    let c;
    if fb > f0 {
        // Expand until the objective drops.
        loop {
            let t = b + GOLDEN * (b - a);
            let ft = eval(t);
            if !(ft > fb) || !ft.is_finite() {
                c = t;
                break;
            }
            a = b;
            b = t;
            fb = ft;
            if evals.get() >= LINE_MAX_EVALS {
                // Still climbing; accept the best point seen.
                return Ok(LineResult { t: b, value: fb });
            }
        }
    } else {
        // Overshoot: contract towards zero until we beat phi(0).
        let mut hi = b;
        loop {
            let t = hi / 2.0;
            let ft = eval(t);
            if ft > f0 {
                b = t;
                fb = ft;
                c = hi;
                break;
            }
            hi = t;
            if evals.get() >= LINE_MAX_EVALS || t < 1e-300 {
                return Err(Error::LineSearchFailure(
                    "no ascent found along the search direction".into(),
                ));
            }
        }
    }

    // Brent on -phi over [a, c] with interior best point b.
    let (mut lo, mut hi) = (a.min(c), a.max(c));
    let (mut x, mut w, mut v) = (b, b, b);
    let (mut fx, mut fw, mut fv) = (-fb, -fb, -fb);
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;
    const CGOLD: f64 = 0.381_966_011_250_105;
    while evals.get() < LINE_MAX_EVALS {
        let xm = 0.5 * (lo + hi);
        let tol1 = LINE_TOL * x.abs() + 1e-20;
        let tol2 = 2.0 * tol1;
        if (x - xm).abs() <= tol2 - 0.5 * (hi - lo) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let etemp = e;
            e = d;
            if !(p.abs() >= (0.5 * q * etemp).abs() || p <= q * (lo - x) || p >= q * (hi - x)) {
                d = p / q;
                let u = x + d;
                if u - lo < tol2 || hi - u < tol2 {
                    d = tol1.copysign(xm - x);
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= xm { lo - x } else { hi - x };
            d = CGOLD * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
        let fu = -eval(u);
        let fu = if fu.is_nan() { f64::INFINITY } else { fu };
        if fu <= fx {
            if u >= x {
                lo = x;
            } else {
                hi = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                lo = u;
            } else {
                hi = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    Ok(LineResult { t: x, value: -fx })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(x: &[f64], t: f64, d: &[f64]) -> Vec<f64> {
    x.iter().zip(d).map(|(a, b)| a + t * b).collect()
}

/// Gradient ascent with full line maximization per cycle. Conjugate
/// gradient uses Polak–Ribière directions and restarts along the gradient
/// every `dim` cycles or when the direction is not an ascent direction.
pub fn maximize<O: Objective>(
    objective: &O,
    x0: &[f64],
    method: Method,
    max_cycles: usize,
) -> Optimized {
    let start = Instant::now();
    let n = objective.dim();
    let mut x = x0.to_vec();
    let (mut f, mut g) = objective.value_and_gradient(&x);
    let mut d = g.clone();
    let mut since_restart = 0;
    let mut values = vec![f];
    let mut wall_ms = vec![0.0];
    let mut failures = 0;
    let mut converged = false;
    let mut last_step: Option<f64> = None;

    for _ in 0..max_cycles {
        let gg = dot(&g, &g);
        if gg == 0.0 {
            converged = true;
            break;
        }
        if dot(&g, &d) <= 0.0 {
            d = g.clone();
            since_restart = 0;
        }
        let dn = dot(&d, &d).sqrt();
        // Reuse the previous step length (in parameter units) as the first trial.
        let t0 = last_step.filter(|s| *s > 0.0).unwrap_or(1.0) / dn;
        let phi = |t: f64| objective.value(&axpy(&x, t, &d));
        let step = match line_maximize(phi, f, t0) {
            Ok(r) if r.value >= f => Some(r),
            _ => {
                failures += 1;
                // Fall back to halving along the gradient.
                let mut t = 1.0 / gg.sqrt();
                let mut found = None;
                for _ in 0..60 {
                    let ft = objective.value(&axpy(&x, t, &g));
                    if ft > f {
                        found = Some(t);
                        break;
                    }
                    t /= 2.0;
                }
                if let Some(t) = found {
                    d = g.clone();
                    since_restart = 0;
                    Some(LineResult { t, value: objective.value(&axpy(&x, t, &g)) })
                } else {
                    None
                }
            }
        };
        match step {
            Some(r) => {
                x = axpy(&x, r.t, &d);
                last_step = Some(r.t * dn);
            }
            None => {
                values.push(f);
                wall_ms.push(start.elapsed().as_secs_f64() * 1e3);
                continue;
            }
        }
        let (f_new, g_new) = objective.value_and_gradient(&x);
        since_restart += 1;
        d = match method {
            Method::SteepestAscent => g_new.clone(),
            Method::ConjugateGradient if since_restart >= n => {
                since_restart = 0;
                g_new.clone()
            }
            Method::ConjugateGradient => {
                let beta = (dot(&g_new, &g_new) - dot(&g_new, &g)) / gg;
                g_new.iter().zip(&d).map(|(a, b)| a + beta * b).collect()
            }
        };
        f = f_new;
        g = g_new;
        values.push(f);
        wall_ms.push(start.elapsed().as_secs_f64() * 1e3);
    }
    Optimized {
        x,
        values,
        wall_ms,
        line_search_failures: failures,
        converged,
    }
}

fn gradient_fit(net: &SigmoidNet, data: &Dataset, max_cycles: usize, method: Method) -> Result<FitTrace> {
    net.check()?;
    let records = complete_configs(net, data)?;
    let objective = SbnObjective {
        net: net.clone(),
        records,
    };
    let result = maximize(&objective, &net.params(), method, max_cycles);
    let final_net = objective.at(&result.x);
    Ok(FitTrace {
        optimizer: match method {
            Method::ConjugateGradient => "cg".into(),
            Method::SteepestAscent => "sd".into(),
        },
        seed: None,
        cycles: result
            .values
            .iter()
            .zip(&result.wall_ms)
            .enumerate()
            .map(|(cycle, (&objective, &wall_ms))| CycleRecord {
                cycle,
                objective,
                wall_ms,
            })
            .collect(),
        steps: Vec::new(),
        graph: weights_to_graph(&final_net)?,
        termination: if result.converged {
            Termination::Converged
        } else {
            Termination::MaxCycles
        },
    })
}

/// Polak–Ribière conjugate gradient on the weights and biases.
pub fn fit_cg(net: &SigmoidNet, data: &Dataset, max_cycles: usize) -> Result<FitTrace> {
    gradient_fit(net, data, max_cycles, Method::ConjugateGradient)
}

/// Steepest ascent with line maximization.
pub fn fit_sd(net: &SigmoidNet, data: &Dataset, max_cycles: usize) -> Result<FitTrace> {
    gradient_fit(net, data, max_cycles, Method::SteepestAscent)
}

/// Clusters updated by IPF on a sigmoid net: every bottom-layer potential.
/// Top-layer marginals stay fixed.
pub fn bottom_schedule(net: &SigmoidNet, graph: &ChainFactorGraph) -> Vec<ClusterId> {
    (0..graph.potentials().len())
        .filter(|&k| graph.owner(k) >= net.n_top)
        .collect()
}

/// IPF on the pairwise-potential form of the network. `config.schedule` is
/// replaced by the bottom-layer potentials in declaration order.
pub fn fit_ipf(net: &SigmoidNet, data: &Dataset, config: &FitConfig) -> Result<FitTrace> {
    let graph = weights_to_graph(net)?;
    let config = FitConfig {
        schedule: Schedule::Explicit(bottom_schedule(net, &graph)),
        ..config.clone()
    };
    fit_ml(&graph, data, &config)
}

/// `count` complete patterns with every unit `±1` with probability 1/2.
///
/// The generator is ChaCha8 seeded through `seed_from_u64(seed)`; each unit
/// takes the low bit of one `next_u32` draw, units in variable order, records
/// in sequence. The stream is stable across platforms.
pub fn generate_patterns(n_top: usize, n_bottom: usize, count: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = n_top + n_bottom;
    let mut data = Dataset::new(n);
    for _ in 0..count {
        let config: Vec<usize> = (0..n).map(|_| (rng.next_u32() & 1) as usize).collect();
        data.push(Evidence::complete(&config), 1.0)
            .expect("unit weights are positive");
    }
    data
}
