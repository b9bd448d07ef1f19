//! The two benchmark experiments: IPF against gradient baselines on random
//! sigmoid belief networks, and conditional fitting of the heart disease
//! model to its tabulated conditionals.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::cml_ipf::{fit_cml, CmlOptions, Regime};
use crate::error::{Error, Result};
use crate::inference::divergence_to_target;
use crate::io::{chd_model, parse_trace_csv, table1_dataset, trace_rows, write_trace_rows, TraceRow};
use crate::ml_ipf::{FitConfig, FitTrace};
use crate::sbn::{fit_cg, fit_ipf, fit_sd, generate_patterns, SigmoidNet};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SbnExperimentConfig {
    pub replicas: usize,
    pub n_top: usize,
    pub n_bottom: usize,
    /// Patterns per replica; `None` means `2 * n_top`.
    pub patterns: Option<usize>,
    pub cycles: usize,
    /// Replica `r` uses seed `seed + r`.
    pub seed: u64,
    pub potential_floor: f64,
    /// Worker threads; 0 lets the pool decide.
    pub jobs: usize,
}

impl Default for SbnExperimentConfig {
    fn default() -> Self {
        SbnExperimentConfig {
            replicas: 100,
            n_top: 5,
            n_bottom: 5,
            patterns: None,
            cycles: 1000,
            seed: 0,
            potential_floor: 1e-12,
            jobs: 0,
        }
    }
}

impl SbnExperimentConfig {
    pub fn pattern_count(&self) -> usize {
        self.patterns.unwrap_or(2 * self.n_top)
    }

    pub fn replica_seed(&self, replica: usize) -> u64 {
        self.seed.wrapping_add(replica as u64)
    }
}

/// Per-cycle statistics of `a − b` over replicas.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiffStats {
    pub cycle: usize,
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (divisor `n − 1`); NaN when `n < 2`.
    pub std: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    /// `"<a>-<b>"`, e.g. `ipf-cg`.
    pub label: String,
    pub stats: Vec<DiffStats>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicaOutcome {
    pub replica: usize,
    pub seed: Option<u64>,
    pub traces: Vec<FitTrace>,
    pub error: Option<String>,
}

impl ReplicaOutcome {
    pub fn trace(&self, optimizer: &str) -> Option<&FitTrace> {
        self.traces.iter().find(|t| t.optimizer == optimizer)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub name: String,
    /// Configuration echo as `(key, value)` pairs.
    pub config: Vec<(String, String)>,
    pub replicas: Vec<ReplicaOutcome>,
    pub comparisons: Vec<Comparison>,
    /// Extra per-cycle columns (e.g. divergence), index = cycle.
    pub series: Vec<(String, Vec<f64>)>,
}

/// Objective at `cycle`, carrying the last value forward when a fit stopped
/// early.
pub fn value_at(series: &[f64], cycle: usize) -> f64 {
    series[cycle.min(series.len() - 1)]
}

/// Per-cycle mean, standard deviation and standard error of `a − b` over
/// paired objective series, for cycles `0..=cycles`.
pub fn difference_stats(pairs: &[(Vec<f64>, Vec<f64>)], cycles: usize) -> Vec<DiffStats> {
    (0..=cycles)
        .map(|cycle| {
            let d: Vec<f64> = pairs
                .iter()
                .filter(|(a, b)| !a.is_empty() && !b.is_empty())
                .map(|(a, b)| value_at(a, cycle) - value_at(b, cycle))
                .collect();
            let n = d.len();
            let mean = d.iter().sum::<f64>() / n as f64;
            let std = if n > 1 {
                (d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            } else {
                f64::NAN
            };
            DiffStats {
                cycle,
                n,
                mean,
                std,
                stderr: std / (n as f64).sqrt(),
            }
        })
        .collect()
}

pub const SBN_OPTIMIZERS: [&str; 3] = ["ipf-ml", "cg", "sd"];

fn run_replica(config: &SbnExperimentConfig, replica: usize) -> ReplicaOutcome {
    let seed = config.replica_seed(replica);
    let run = || -> Result<Vec<FitTrace>> {
        let data = generate_patterns(config.n_top, config.n_bottom, config.pattern_count(), seed);
        let net = SigmoidNet::fully_connected(config.n_top, config.n_bottom);
        let ipf_config = FitConfig {
            max_cycles: config.cycles,
            // Run every cycle unless the potentials stop moving entirely.
            tol: f64::MIN_POSITIVE,
            potential_floor: config.potential_floor,
            ..FitConfig::default()
        };
        let mut traces = vec![
            fit_ipf(&net, &data, &ipf_config)?,
            fit_cg(&net, &data, config.cycles)?,
            fit_sd(&net, &data, config.cycles)?,
        ];
        for t in &mut traces {
            t.seed = Some(seed);
        }
        Ok(traces)
    };
    match run() {
        Ok(traces) => ReplicaOutcome {
            replica,
            seed: Some(seed),
            traces,
            error: None,
        },
        Err(e) => ReplicaOutcome {
            replica,
            seed: Some(seed),
            traces: Vec::new(),
            error: Some(e.to_string()),
        },
    }
}

fn comparisons(replicas: &[ReplicaOutcome], cycles: usize) -> Vec<Comparison> {
    let objectives = |r: &ReplicaOutcome, opt: &str| r.trace(opt).map(FitTrace::objectives);
    [("ipf-ml", "cg"), ("ipf-ml", "sd")]
        .iter()
        .map(|(a, b)| {
            let pairs: Vec<_> = replicas
                .iter()
                .filter_map(|r| Some((objectives(r, a)?, objectives(r, b)?)))
                .collect();
            Comparison {
                label: format!("{}-{}", a.trim_end_matches("-ml"), b),
                stats: difference_stats(&pairs, cycles),
            }
        })
        .collect()
}

/// Fits IPF, conjugate gradient and steepest ascent from zero weights on
/// independently generated pattern sets. Replicas run in parallel; results
/// are ordered by replica index. A failing replica is recorded and skipped.
pub fn run_sbn_experiment(config: &SbnExperimentConfig) -> Result<ExperimentReport> {
    if config.replicas == 0 || config.cycles == 0 || config.n_top == 0 || config.n_bottom == 0 {
        return Err(Error::InvalidArgument(
            "replicas, cycles and layer sizes must be positive".into(),
        ));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let replicas: Vec<ReplicaOutcome> = pool.install(|| {
        (0..config.replicas)
            .into_par_iter()
            .map(|r| run_replica(config, r))
            .collect()
    });
    Ok(ExperimentReport {
        name: "sbn".into(),
        config: vec![
            ("replicas".into(), config.replicas.to_string()),
            ("n_top".into(), config.n_top.to_string()),
            ("n_bottom".into(), config.n_bottom.to_string()),
            ("patterns".into(), config.pattern_count().to_string()),
            ("cycles".into(), config.cycles.to_string()),
            ("seed".into(), config.seed.to_string()),
            (
                "seeds".into(),
                format!("{}..={}", config.seed, config.replica_seed(config.replicas - 1)),
            ),
            ("potential_floor".into(), config.potential_floor.to_string()),
            ("generator".into(), "chacha8".into()),
        ],
        comparisons: comparisons(&replicas, config.cycles),
        replicas,
        series: Vec::new(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChdExperimentConfig {
    pub max_cycles: usize,
    pub tol: f64,
    pub epsilon: f64,
}

impl Default for ChdExperimentConfig {
    fn default() -> Self {
        ChdExperimentConfig {
            max_cycles: 500,
            tol: 1e-10,
            epsilon: crate::cml_ipf::DEFAULT_CONSTRAINT_EPSILON,
        }
    }
}

/// Joint-parents conditional fit of the heart disease model from uniform
/// potentials. The divergence per cycle follows from the trace objective:
/// with unit-mass contexts, `D = Σ Q log Q − N · L^c`.
pub fn run_chd_experiment(config: &ChdExperimentConfig) -> Result<ExperimentReport> {
    let (data, target) = table1_dataset();
    let graph = chd_model();
    let fit_config = FitConfig {
        max_cycles: config.max_cycles,
        tol: config.tol,
        ..FitConfig::default()
    };
    let options = CmlOptions {
        regime: Some(Regime::JointParents),
        epsilon: config.epsilon,
    };
    let trace = fit_cml(&graph, &data, &fit_config, &options)?;
    let entropy: f64 = target.values.iter().filter(|q| **q > 0.0).map(|q| q * q.ln()).sum();
    let n = data.total_weight();
    let d: Vec<f64> = trace.objectives().iter().map(|l| entropy - n * l).collect();
    let final_direct = divergence_to_target(&trace.graph, &target)?;
    let log_d = d.iter().map(|x| x.ln()).collect();
    Ok(ExperimentReport {
        name: "chd".into(),
        config: vec![
            ("max_cycles".into(), config.max_cycles.to_string()),
            ("tol".into(), config.tol.to_string()),
            ("epsilon".into(), config.epsilon.to_string()),
            ("cycles_run".into(), (trace.cycles.len() - 1).to_string()),
            ("termination".into(), format!("{:?}", trace.termination)),
            ("final_divergence_direct".into(), final_direct.to_string()),
        ],
        replicas: vec![ReplicaOutcome {
            replica: 0,
            seed: None,
            traces: vec![trace],
            error: None,
        }],
        comparisons: Vec::new(),
        series: vec![("divergence".into(), d), ("log_divergence".into(), log_d)],
    })
}

pub const SUMMARY_HEADER: [&str; 6] = ["comparison", "cycle", "n", "mean", "std", "stderr"];

pub fn write_summary_csv(comparisons: &[Comparison]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SUMMARY_HEADER).expect("in-memory write");
    for c in comparisons {
        for s in &c.stats {
            w.write_record([
                c.label.clone(),
                s.cycle.to_string(),
                s.n.to_string(),
                s.mean.to_string(),
                s.std.to_string(),
                s.stderr.to_string(),
            ])
            .expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

/// All traces of all replicas in replica order.
pub fn merged_trace_rows(report: &ExperimentReport) -> Vec<TraceRow> {
    report
        .replicas
        .iter()
        .flat_map(|r| r.traces.iter().flat_map(trace_rows))
        .collect()
}

/// Recomputes the comparisons of an SBN report from its merged trace rows.
pub fn reaggregate(rows: &[TraceRow], cycles: usize) -> Vec<Comparison> {
    let mut seeds: Vec<u64> = rows.iter().filter_map(|r| r.seed).collect();
    seeds.dedup();
    let replicas: Vec<ReplicaOutcome> = seeds
        .iter()
        .enumerate()
        .map(|(i, &seed)| {
            let traces = SBN_OPTIMIZERS
                .iter()
                .filter_map(|opt| {
                    let series: Vec<f64> = rows
                        .iter()
                        .filter(|r| r.seed == Some(seed) && r.optimizer == *opt)
                        .map(|r| r.objective)
                        .collect();
                    (!series.is_empty()).then(|| FitTrace {
                        optimizer: opt.to_string(),
                        seed: Some(seed),
                        cycles: series
                            .iter()
                            .enumerate()
                            .map(|(cycle, &objective)| crate::ml_ipf::CycleRecord {
                                cycle,
                                objective,
                                wall_ms: 0.0,
                            })
                            .collect(),
                        steps: Vec::new(),
                        graph: chd_model(),
                        termination: crate::ml_ipf::Termination::MaxCycles,
                    })
                })
                .collect();
            ReplicaOutcome {
                replica: i,
                seed: Some(seed),
                traces,
                error: None,
            }
        })
        .collect();
    comparisons(&replicas, cycles)
}

#[derive(Serialize)]
struct ConfigEcho<'a> {
    experiment: &'a str,
    config: std::collections::BTreeMap<&'a str, &'a str>,
    failures: Vec<(usize, Option<u64>, &'a str)>,
}

/// Writes `config.json`, `traces.csv` (all replicas merged in seed order),
/// one `replicas/seed_<seed>.csv` per replica, `summary.csv` when there are
/// comparisons, and `series.csv` when there are extra columns.
pub fn write_report(report: &ExperimentReport, dir: &Path) -> Result<()> {
    let io = |e: std::io::Error| Error::InvalidArgument(format!("{}: {e}", dir.display()));
    fs::create_dir_all(dir).map_err(io)?;
    let echo = ConfigEcho {
        experiment: &report.name,
        config: report.config.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect(),
        failures: report
            .replicas
            .iter()
            .filter_map(|r| Some((r.replica, r.seed, r.error.as_deref()?)))
            .collect(),
    };
    let mut json = serde_json::to_string_pretty(&echo).expect("config serializes");
    json.push('\n');
    fs::write(dir.join("config.json"), json).map_err(io)?;
    fs::write(dir.join("traces.csv"), write_trace_rows(&merged_trace_rows(report))).map_err(io)?;
    if report.replicas.len() > 1 {
        let sub = dir.join("replicas");
        fs::create_dir_all(&sub).map_err(io)?;
        for r in &report.replicas {
            let rows: Vec<TraceRow> = r.traces.iter().flat_map(trace_rows).collect();
            let name = match r.seed {
                Some(s) => format!("seed_{s}.csv"),
                None => format!("replica_{}.csv", r.replica),
            };
            fs::write(sub.join(name), write_trace_rows(&rows)).map_err(io)?;
        }
    }
    if !report.comparisons.is_empty() {
        fs::write(dir.join("summary.csv"), write_summary_csv(&report.comparisons)).map_err(io)?;
    }
    if !report.series.is_empty() {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["cycle".to_string()];
        header.extend(report.series.iter().map(|(n, _)| n.clone()));
        w.write_record(&header).expect("in-memory write");
        let len = report.series[0].1.len();
        for c in 0..len {
            let mut row = vec![c.to_string()];
            row.extend(report.series.iter().map(|(_, v)| v[c].to_string()));
            w.write_record(&row).expect("in-memory write");
        }
        let text = String::from_utf8(w.into_inner().expect("flush")).expect("utf-8");
        fs::write(dir.join("series.csv"), text).map_err(io)?;
    }
    Ok(())
}

/// Reads back `traces.csv` from a report directory.
pub fn read_traces(dir: &Path) -> Result<Vec<TraceRow>> {
    let text = fs::read_to_string(dir.join("traces.csv"))
        .map_err(|e| Error::InvalidArgument(format!("{}: {e}", dir.display())))?;
    parse_trace_csv(&text)
}
