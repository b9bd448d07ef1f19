//! File formats: JSON model files, CSV datasets and CSV fit traces, plus the
//! built-in coronary heart disease example.
//!
//! Model file layout (numbers use shortest round-trip decimals):
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "variables": [{ "name": "a", "states": ["lo", "hi"] }],
//!   "components": [{ "id": "a", "chain": ["a"], "parents": [], "members": ["psi_a"] }],
//!   "potentials": [{ "cluster_id": "psi_a", "variables": ["a"], "values": [0.5, 0.5] }]
//! }
//! ```
//!
//! Dataset cells are `state` (observed), `state!` (clamped) or `?` (missing);
//! an optional `__weight` column carries positive record weights.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{ConditionalTarget, Dataset, Evidence, EvidenceKind};
use crate::ml_ipf::FitTrace;
use crate::model::{
    validate_graph, ChainFactorGraph, Cluster, ComponentSet, Potential, PotentialTable, Variable,
    VariableSpace,
};
use crate::table::table_len;

pub const SCHEMA_VERSION: u32 = 1;
pub const WEIGHT_COLUMN: &str = "__weight";
pub const MISSING: &str = "?";
pub const CLAMP_SUFFIX: char = '!';

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    schema_version: u32,
    variables: Vec<VariableEntry>,
    components: Vec<ComponentEntry>,
    potentials: Vec<PotentialEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VariableEntry {
    name: String,
    states: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ComponentEntry {
    id: String,
    chain: Vec<String>,
    parents: Vec<String>,
    members: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PotentialEntry {
    cluster_id: String,
    variables: Vec<String>,
    values: Vec<f64>,
}

fn schema(location: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Schema {
        location: location.into(),
        message: message.into(),
    }
}

/// Parses and validates a model file.
pub fn parse_model(text: &str) -> Result<ChainFactorGraph> {
    let file: ModelFile = serde_json::from_str(text).map_err(|e| {
        schema(
            format!("line {}, column {}", e.line(), e.column()),
            e.to_string(),
        )
    })?;
    if file.schema_version != SCHEMA_VERSION {
        return Err(schema(
            "schema_version",
            format!("unsupported version {}, expected {SCHEMA_VERSION}", file.schema_version),
        ));
    }
    let variables = file
        .variables
        .into_iter()
        .map(|v| Variable::new(v.name, v.states))
        .collect();
    let space = VariableSpace::new(variables).map_err(|e| schema("variables", e.to_string()))?;
    let cards = space.cardinalities().to_vec();

    let resolve = |names: &[String], location: &str| -> Result<Vec<usize>> {
        names
            .iter()
            .map(|n| {
                space
                    .index_of(n)
                    .ok_or_else(|| schema(location, format!("unknown variable `{n}`")))
            })
            .collect()
    };
    let cluster = |ids: Vec<usize>, location: &str| {
        Cluster::new(ids).map_err(|e| schema(location, e.to_string()))
    };

    let mut potentials = Vec::with_capacity(file.potentials.len());
    let mut by_id = HashMap::new();
    for (k, p) in file.potentials.into_iter().enumerate() {
        let loc = format!("potentials[{k}] (`{}`)", p.cluster_id);
        let vars = cluster(resolve(&p.variables, &loc)?, &loc)?;
        let expected = table_len(vars.vars(), &cards);
        if p.values.len() != expected {
            return Err(schema(
                loc,
                format!("values has {} entries, expected {expected}", p.values.len()),
            ));
        }
        if by_id.insert(p.cluster_id.clone(), k).is_some() {
            return Err(schema(loc, "duplicate cluster id"));
        }
        potentials.push(Potential {
            id: p.cluster_id,
            table: PotentialTable::new(vars, p.values),
        });
    }

    let mut components = Vec::with_capacity(file.components.len());
    for (k, c) in file.components.into_iter().enumerate() {
        let loc = format!("components[{k}] (`{}`)", c.id);
        let members = c
            .members
            .iter()
            .map(|m| {
                by_id
                    .get(m)
                    .copied()
                    .ok_or_else(|| schema(&loc, format!("unknown member cluster `{m}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        components.push(ComponentSet {
            chain: cluster(resolve(&c.chain, &loc)?, &loc)?,
            parents: cluster(resolve(&c.parents, &loc)?, &loc)?,
            id: c.id,
            members,
        });
    }

    let graph = ChainFactorGraph::new_unchecked(space, components, potentials);
    let report = validate_graph(&graph);
    if !report.is_valid() {
        return Err(Error::Validation(report));
    }
    Ok(graph)
}

/// Serializes a model as pretty-printed JSON with a trailing newline.
pub fn write_model(graph: &ChainFactorGraph) -> String {
    let space = graph.space();
    let names = |vars: &[usize]| -> Vec<String> {
        vars.iter().map(|&v| space.variable(v).name.clone()).collect()
    };
    let file = ModelFile {
        schema_version: SCHEMA_VERSION,
        variables: space
            .variables()
            .iter()
            .map(|v| VariableEntry {
                name: v.name.clone(),
                states: v.states.clone(),
            })
            .collect(),
        components: graph
            .components()
            .iter()
            .map(|c| ComponentEntry {
                id: c.id.clone(),
                chain: names(c.chain.vars()),
                parents: names(c.parents.vars()),
                members: c.members.iter().map(|&m| graph.potential(m).id.clone()).collect(),
            })
            .collect(),
        potentials: graph
            .potentials()
            .iter()
            .map(|p| PotentialEntry {
                cluster_id: p.id.clone(),
                variables: names(p.table.cluster.vars()),
                values: p.table.values.clone(),
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&file).expect("model serializes");
    text.push('\n');
    text
}

fn csv_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

fn csv_error(e: csv::Error) -> Error {
    let location = match e.position() {
        Some(p) => format!("line {}", p.line()),
        None => "input".to_string(),
    };
    schema(location, e.to_string())
}

/// Parses a dataset against a variable space. Every variable must appear
/// exactly once in the header, in any order. Row numbers in errors are file
/// line numbers (the header is line 1).
pub fn parse_dataset(text: &str, space: &VariableSpace) -> Result<Dataset> {
    let mut reader = csv_reader(text);
    let header = reader.headers().map_err(csv_error)?.clone();
    let mut column_var = Vec::with_capacity(header.len());
    let mut weight_col = None;
    let mut seen = vec![false; space.len()];
    for (col, name) in header.iter().enumerate() {
        if name == WEIGHT_COLUMN {
            if weight_col.replace(col).is_some() {
                return Err(schema("line 1", "duplicate weight column"));
            }
            column_var.push(None);
            continue;
        }
        let v = space.index_of(name).ok_or_else(|| Error::UnknownVariable {
            row: 1,
            name: name.to_string(),
        })?;
        if std::mem::replace(&mut seen[v], true) {
            return Err(schema("line 1", format!("duplicate column `{name}`")));
        }
        column_var.push(Some(v));
    }
    if let Some(v) = seen.iter().position(|s| !s) {
        return Err(schema(
            "line 1",
            format!("missing column for variable `{}`", space.variable(v).name),
        ));
    }

    let mut data = Dataset::new(space.len());
    for row in reader.records() {
        let row = row.map_err(csv_error)?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let mut ev = Evidence::empty(space.len());
        let mut weight = 1.0;
        for (col, cell) in row.iter().enumerate() {
            if Some(col) == weight_col {
                weight = cell
                    .parse::<f64>()
                    .ok()
                    .filter(|w| *w > 0.0 && w.is_finite())
                    .ok_or_else(|| Error::NonPositiveWeight {
                        row: line,
                        value: cell.to_string(),
                    })?;
                continue;
            }
            let v = column_var[col].expect("non-weight column");
            if cell == MISSING {
                continue;
            }
            let (label, kind) = match cell.strip_suffix(CLAMP_SUFFIX) {
                Some(l) => (l.trim_end(), EvidenceKind::Clamped),
                None => (cell, EvidenceKind::Observed),
            };
            let var = space.variable(v);
            let s = var.state_index(label).ok_or_else(|| Error::UnknownState {
                row: line,
                variable: var.name.clone(),
                state: cell.to_string(),
            })?;
            ev.set(v, s, kind);
        }
        data.push(ev, weight)?;
    }
    Ok(data)
}

/// Writes a dataset with a `__weight` column; parse_dataset reads it back
/// unchanged.
pub fn write_dataset(data: &Dataset, space: &VariableSpace) -> Result<String> {
    if data.n_vars() != space.len() {
        return Err(Error::InvalidArgument(format!(
            "dataset has {} variables, space has {}",
            data.n_vars(),
            space.len()
        )));
    }
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    let mut header: Vec<&str> = space.variables().iter().map(|v| v.name.as_str()).collect();
    header.push(WEIGHT_COLUMN);
    w.write_record(&header).map_err(csv_error)?;
    for r in data.records() {
        let mut cells = Vec::with_capacity(space.len() + 1);
        for v in 0..space.len() {
            cells.push(match r.evidence.get(v) {
                None => MISSING.to_string(),
                Some((s, kind)) => {
                    let label = space.variable(v).states.get(s).ok_or_else(|| {
                        Error::InvalidArgument(format!("state {s} out of range for variable {v}"))
                    })?;
                    match kind {
                        EvidenceKind::Observed => label.clone(),
                        EvidenceKind::Clamped => format!("{label}{CLAMP_SUFFIX}"),
                    }
                }
            });
        }
        cells.push(r.weight.to_string());
        w.write_record(&cells).map_err(csv_error)?;
    }
    let bytes = w.into_inner().map_err(|e| schema("output", e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub const TRACE_HEADER: [&str; 5] = ["cycle", "objective", "wall_ms", "optimizer", "seed"];

/// One parsed trace row.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub cycle: usize,
    pub objective: f64,
    pub wall_ms: f64,
    pub optimizer: String,
    pub seed: Option<u64>,
}

/// Rows of a trace in cycle order.
pub fn trace_rows(trace: &FitTrace) -> Vec<TraceRow> {
    trace
        .cycles
        .iter()
        .map(|c| TraceRow {
            cycle: c.cycle,
            objective: c.objective,
            wall_ms: c.wall_ms,
            optimizer: trace.optimizer.clone(),
            seed: trace.seed,
        })
        .collect()
}

/// CSV with header `cycle,objective,wall_ms,optimizer,seed`; an absent seed
/// is an empty cell.
pub fn write_trace_csv(trace: &FitTrace) -> String {
    write_trace_rows(&trace_rows(trace))
}

pub fn write_trace_rows(rows: &[TraceRow]) -> String {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(TRACE_HEADER).expect("in-memory write");
    for r in rows {
        w.write_record([
            r.cycle.to_string(),
            r.objective.to_string(),
            r.wall_ms.to_string(),
            r.optimizer.clone(),
            r.seed.map(|s| s.to_string()).unwrap_or_default(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is UTF-8")
}

pub fn parse_trace_csv(text: &str) -> Result<Vec<TraceRow>> {
    let mut reader = csv_reader(text);
    let header = reader.headers().map_err(csv_error)?;
    if header.iter().ne(TRACE_HEADER) {
        return Err(schema("line 1", format!("expected header {}", TRACE_HEADER.join(","))));
    }
    let mut rows = Vec::new();
    for row in reader.records() {
        let row = row.map_err(csv_error)?;
        let loc = format!("line {}", row.position().map_or(0, |p| p.line()));
        let num = |i: usize| -> Result<f64> {
            row[i]
                .parse::<f64>()
                .map_err(|_| schema(&loc, format!("bad number `{}` in column {}", &row[i], TRACE_HEADER[i])))
        };
        rows.push(TraceRow {
            cycle: row[0]
                .parse()
                .map_err(|_| schema(&loc, format!("bad cycle `{}`", &row[0])))?,
            objective: num(1)?,
            wall_ms: num(2)?,
            optimizer: row[3].to_string(),
            seed: match &row[4] {
                "" => None,
                s => Some(s.parse().map_err(|_| schema(&loc, format!("bad seed `{s}`")))?),
            },
        });
    }
    Ok(rows)
}

/// `Q(d = true | s, a, c)`: rows (m, 30-39) .. (m, 60-69), (f, 30-39) ..
/// (f, 60-69); columns asymptomatic, non-anginal, atypical angina, typical
/// angina.
pub const CHD_TABLE: [[f64; 4]; 8] = [
    [0.019, 0.052, 0.218, 0.677],
    [0.055, 0.141, 0.461, 0.873],
    [0.097, 0.215, 0.589, 0.92],
    [0.123, 0.281, 0.671, 0.943],
    [0.003, 0.008, 0.042, 0.258],
    [0.01, 0.028, 0.133, 0.552],
    [0.032, 0.084, 0.324, 0.794],
    [0.075, 0.186, 0.544, 0.906],
];

pub const CHD_AGE: usize = 0;
pub const CHD_SEX: usize = 1;
pub const CHD_DISEASE: usize = 2;
pub const CHD_PAIN: usize = 3;

/// Variables of the heart disease example in model order `a, s, d, c`.
pub fn chd_space() -> VariableSpace {
    let v = |name: &str, states: &[&str]| {
        Variable::new(name, states.iter().map(|s| s.to_string()).collect())
    };
    VariableSpace::new(vec![
        v("a", &["30-39", "40-49", "50-59", "60-69"]),
        v("s", &["m", "f"]),
        v("d", &["true", "false"]),
        v("c", &["asympt", "non-AP", "atyp-AP", "typ-AP"]),
    ])
    .expect("names are unique")
}

/// Age and sex independent, disease depending on both, chest pain depending
/// on disease; uniform potentials.
pub fn chd_model() -> ChainFactorGraph {
    ChainFactorGraph::bayesian_network(
        chd_space(),
        &[vec![], vec![], vec![CHD_AGE, CHD_SEX], vec![CHD_DISEASE]],
    )
    .expect("fixed structure is valid")
}

/// `Q(d | a, s, c)` as three-decimal literals; the `false` entry is the
/// complement rounded to three decimals, which sums with `true` to exactly 1.
fn chd_q(a: usize, s: usize, c: usize) -> [f64; 2] {
    let t = CHD_TABLE[s * 4 + a][c];
    let f: f64 = format!("{:.3}", 1.0 - t).parse().expect("formatted float parses");
    [t, f]
}

/// Conditional dataset for the heart disease example: for every context
/// `(a, s, c)` and disease state, one record clamping `a, s, c`, observing
/// `d`, weighted by `Q(d | a, s, c)`. Also returns `Q` laid out over
/// `(a, s, c | d)`.
pub fn table1_dataset() -> (Dataset, ConditionalTarget) {
    let mut data = Dataset::new(4);
    let mut values = Vec::with_capacity(64);
    for a in 0..4 {
        for s in 0..2 {
            for c in 0..4 {
                let q = chd_q(a, s, c);
                for d in 0..2 {
                    let ev = Evidence::empty(4)
                        .clamp(CHD_AGE, a)
                        .clamp(CHD_SEX, s)
                        .clamp(CHD_PAIN, c)
                        .observe(CHD_DISEASE, d);
                    data.push(ev, q[d]).expect("table weights are positive");
                    values.push(q[d]);
                }
            }
        }
    }
    (
        data,
        ConditionalTarget {
            context_vars: vec![CHD_AGE, CHD_SEX, CHD_PAIN],
            response_vars: vec![CHD_DISEASE],
            values,
        },
    )
}
