use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use chain_ipf::cml_ipf::{fit_cml, CmlOptions, Regime};
use chain_ipf::experiments::{
    run_chd_experiment, run_sbn_experiment, write_report, ChdExperimentConfig, SbnExperimentConfig,
};
use chain_ipf::inference::{conditional_log_likelihood, divergence_to_target, log_likelihood};
use chain_ipf::io::{
    parse_dataset, parse_model, table1_dataset, write_dataset, write_model, write_trace_csv,
};
use chain_ipf::ml_ipf::{fit_ml, FitConfig, Schedule, Termination};
use chain_ipf::sbn::{generate_patterns, weights_to_graph, SigmoidNet};
use chain_ipf::{ConditionalTarget, Error};

#[derive(Parser)]
#[command(name = "chain-ipf", version, about = "Fit chain factor graphs by iterative proportional fitting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Objective {
    Ml,
    Cml,
}

#[derive(Clone, Copy, ValueEnum)]
enum RegimeArg {
    Clamped,
    Joint,
}

#[derive(Clone, Copy, ValueEnum)]
enum Metric {
    Ll,
    Cll,
    Divergence,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model to a dataset; writes trace.csv and model.json to --out.
    Fit {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value = "ml")]
        objective: Objective,
        /// Force a conditional regime instead of detecting it.
        #[arg(long, value_enum)]
        regime: Option<RegimeArg>,
        #[arg(long, default_value_t = 500)]
        max_cycles: usize,
        #[arg(long, default_value_t = 1e-7)]
        tol: f64,
        #[arg(long, default_value_t = 0.0)]
        floor: f64,
        /// Visit clusters in an order shuffled once with this seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print an objective of a model with 17 significant digits.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, value_enum)]
        metric: Metric,
        /// `table1` or a CSV whose columns are context variables, response
        /// variables and a final `q` column.
        #[arg(long)]
        target: Option<String>,
        /// Response variables of a CSV target (default: the last variable column).
        #[arg(long, value_delimiter = ',')]
        response: Vec<String>,
    },
    /// Write random ±1 patterns and the matching zero-weight network.
    Generate {
        #[arg(long, default_value_t = 5)]
        n_top: usize,
        #[arg(long, default_value_t = 5)]
        n_bottom: usize,
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory for data.csv and model.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// IPF against conjugate gradient and steepest ascent on random sigmoid networks.
    ExperimentSbn {
        #[arg(long, default_value_t = 100)]
        replicas: usize,
        /// Units per layer.
        #[arg(long, default_value_t = 5)]
        n: usize,
        #[arg(long, default_value_t = 1000)]
        max_cycles: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Worker threads (0 = all cores).
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Conditional fit of the heart disease model to its tabulated conditionals.
    ExperimentChd {
        #[arg(long, default_value_t = 500)]
        max_cycles: usize,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 1e-10)]
        epsilon: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

enum Failure {
    Lib(&'static str, Error),
    Io(String),
}

fn origin(e: &Error) -> &'static str {
    match e.root() {
        Error::Schema { .. }
        | Error::UnknownState { .. }
        | Error::UnknownVariable { .. }
        | Error::NonPositiveWeight { .. } => "data_io",
        Error::Validation(_) | Error::ZeroNormalizer { .. } | Error::NonPositiveFactor(_) => {
            "model_core"
        }
        Error::ImpossibleEvidence { .. } | Error::ZeroModelProbability { .. } => "exact_inference",
        Error::NonPositiveDenominator { .. }
        | Error::BracketFailure { .. }
        | Error::NonConvergence { .. }
        | Error::UnsupportedRegime(_) => "cml_ipf",
        Error::NonSigmoidShape(_) | Error::LineSearchFailure(_) => "sbn_baselines",
        Error::ZeroDenominator { .. } => "ipf",
        _ => "chain-ipf",
    }
}

fn lib<T>(r: chain_ipf::Result<T>) -> Result<T, Failure> {
    r.map_err(|e| Failure::Lib(origin(&e), e))
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn mkdir(path: &Path) -> Result<(), Failure> {
    fs::create_dir_all(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn csv_target(text: &str, graph: &chain_ipf::ChainFactorGraph, response: &[String]) -> Result<ConditionalTarget, Failure> {
    let bad = |m: String| Failure::Lib("data_io", Error::Schema { location: "target".into(), message: m });
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    let names: Vec<&str> = header.iter().collect();
    if names.last() != Some(&"q") || names.len() < 2 {
        return Err(bad("last column must be `q`".into()));
    }
    let space = graph.space();
    let var_names = &names[..names.len() - 1];
    let vars: Vec<usize> = var_names
        .iter()
        .map(|n| space.index_of(n).ok_or_else(|| bad(format!("unknown variable `{n}`"))))
        .collect::<Result<_, _>>()?;
    let response: Vec<usize> = if response.is_empty() {
        vec![*vars.last().unwrap()]
    } else {
        response
            .iter()
            .map(|n| space.index_of(n).ok_or_else(|| bad(format!("unknown variable `{n}`"))))
            .collect::<Result<_, _>>()?
    };
    let context: Vec<usize> = vars.iter().copied().filter(|v| !response.contains(v)).collect();
    let ordered: Vec<usize> = context.iter().chain(&response).copied().collect();
    let cards = graph.cardinalities();
    let mut values = vec![f64::NAN; chain_ipf::table::table_len(&ordered, cards)];
    for row in reader.records() {
        let row = row.map_err(|e| bad(e.to_string()))?;
        let mut config = vec![0; cards.len()];
        for (k, &v) in vars.iter().enumerate() {
            config[v] = space
                .variable(v)
                .state_index(&row[k])
                .ok_or_else(|| bad(format!("unknown state `{}`", &row[k])))?;
        }
        let q: f64 = row[vars.len()].parse().map_err(|_| bad(format!("bad q `{}`", &row[vars.len()])))?;
        values[chain_ipf::table::flat_index(&ordered, cards, &config)] = q;
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(bad("target table is incomplete".into()));
    }
    Ok(ConditionalTarget {
        context_vars: context,
        response_vars: response,
        values,
    })
}

fn run(cli: Cli) -> Result<ExitCode, Failure> {
    match cli.command {
        Command::Fit {
            model,
            data,
            objective,
            regime,
            max_cycles,
            tol,
            floor,
            seed,
            out,
        } => {
            let graph = lib(parse_model(&read(&model)?))?;
            let dataset = lib(parse_dataset(&read(&data)?, graph.space()))?;
            let config = FitConfig {
                max_cycles,
                tol,
                potential_floor: floor,
                schedule: seed.map_or(Schedule::Declaration, |seed| Schedule::Shuffled { seed }),
                ..FitConfig::default()
            };
            let mut trace = match objective {
                Objective::Cml if dataset.has_clamped() => {
                    let options = CmlOptions {
                        regime: regime.map(|r| match r {
                            RegimeArg::Clamped => Regime::ClampedParents,
                            RegimeArg::Joint => Regime::JointParents,
                        }),
                        ..CmlOptions::default()
                    };
                    lib(fit_cml(&graph, &dataset, &config, &options))?
                }
                Objective::Cml => {
                    eprintln!("no clamped cells: conditional likelihood equals likelihood, fitting ml");
                    lib(fit_ml(&graph, &dataset, &config))?
                }
                Objective::Ml => lib(fit_ml(&graph, &dataset, &config))?,
            };
            trace.seed = seed;
            mkdir(&out)?;
            write(&out.join("trace.csv"), &write_trace_csv(&trace))?;
            write(&out.join("model.json"), &write_model(&trace.graph))?;
            let cycles = trace.cycles.len() - 1;
            eprintln!(
                "{:?} after {cycles} cycles, objective {}",
                trace.termination,
                trace.final_objective()
            );
            Ok(match trace.termination {
                Termination::Converged => ExitCode::SUCCESS,
                Termination::MaxCycles => ExitCode::from(2),
            })
        }
        Command::Eval {
            model,
            data,
            metric,
            target,
            response,
        } => {
            let graph = lib(parse_model(&read(&model)?))?;
            let need_data = || -> Result<chain_ipf::Dataset, Failure> {
                let path = data.as_ref().ok_or_else(|| Failure::Io("--data is required for this metric".into()))?;
                lib(parse_dataset(&read(path)?, graph.space()))
            };
            let value = match metric {
                Metric::Ll => lib(log_likelihood(&graph, &need_data()?))?,
                Metric::Cll => lib(conditional_log_likelihood(&graph, &need_data()?))?,
                Metric::Divergence => {
                    let target = match target.as_deref() {
                        None => return Err(Failure::Io("--target is required for divergence".into())),
                        Some("table1") => table1_dataset().1,
                        Some(path) => csv_target(&read(Path::new(path))?, &graph, &response)?,
                    };
                    lib(divergence_to_target(&graph, &target))?
                }
            };
            println!("{value:.16e}");
            Ok(ExitCode::SUCCESS)
        }
        Command::Generate {
            n_top,
            n_bottom,
            count,
            seed,
            out,
        } => {
            let net = SigmoidNet::fully_connected(n_top, n_bottom);
            let graph = lib(weights_to_graph(&net))?;
            let data = generate_patterns(n_top, n_bottom, count, seed);
            mkdir(&out)?;
            write(&out.join("data.csv"), &lib(write_dataset(&data, graph.space()))?)?;
            write(&out.join("model.json"), &write_model(&graph))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::ExperimentSbn {
            replicas,
            n,
            max_cycles,
            seed,
            jobs,
            out,
        } => {
            let config = SbnExperimentConfig {
                replicas,
                n_top: n,
                n_bottom: n,
                cycles: max_cycles,
                seed,
                jobs,
                ..SbnExperimentConfig::default()
            };
            eprintln!("running {replicas} replicas for {max_cycles} cycles");
            let report = lib(run_sbn_experiment(&config))?;
            lib(write_report(&report, &out))?;
            for r in report.replicas.iter().filter(|r| r.error.is_some()) {
                eprintln!("replica {} failed: {}", r.replica, r.error.as_deref().unwrap_or(""));
            }
            if let Some(c) = report.comparisons.first() {
                for s in [3, max_cycles].iter().filter_map(|&k| c.stats.get(k)) {
                    eprintln!(
                        "{} cycle {}: mean {:.6} std {:.6} stderr {:.6} (n = {})",
                        c.label, s.cycle, s.mean, s.std, s.stderr, s.n
                    );
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::ExperimentChd {
            max_cycles,
            tol,
            epsilon,
            out,
        } => {
            let report = lib(run_chd_experiment(&ChdExperimentConfig {
                max_cycles,
                tol,
                epsilon,
            }))?;
            lib(write_report(&report, &out))?;
            let d = &report.series[0].1;
            eprintln!("D: {} -> {} in {} cycles", d[0], d[d.len() - 1], d.len() - 1);
            let trace = &report.replicas[0].traces[0];
            Ok(match trace.termination {
                Termination::Converged => ExitCode::SUCCESS,
                Termination::MaxCycles => ExitCode::from(2),
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(Failure::Lib(module, e)) => {
            eprintln!("error [{module}]: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
