use std::fs;
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use ratio_cv::coefficients::{self, LinearControl};
use ratio_cv::mfmc_app::{
    self, bootstrap_experiment, load_dataset, synthesize_dataset, write_dataset, BootstrapOptions, ColumnSchema,
    SYNTHETIC_MEANS, SYNTHETIC_SCALES,
};
use ratio_cv::numerics::{self, StructureFile};
use ratio_cv::search::{self, DEConfig, Objective, SearchProblem};
use ratio_cv::simulation::{self, CoefficientMode, Scenario};
use ratio_cv::variance_model;
use ratio_cv::{CovarianceStructure, Error, EstimatorKind, Matrix4, Result, Strategy};

use crate::output::{self, artifact, emit};

#[derive(Parser)]
#[command(name = "ratio-cv", version, about = "Control-variate ratio-of-means experiments")]
pub struct Cli {
    /// Cap on worker threads. Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Repeated-replication experiment on a Gaussian scenario.
    Simulate(SimulateArgs),
    /// Closed-form coefficients, variances and reduction predicates.
    Analyze(AnalyzeArgs),
    /// Differential-evolution search for extreme covariance structures.
    Search(SearchArgs),
    /// Subsampling bootstrap on a paired multi-fidelity dataset.
    Apply(ApplyArgs),
    /// Write a synthetic multi-fidelity dataset.
    Synth(SynthArgs),
    /// Re-run the configuration embedded in an earlier artifact.
    Replay(ReplayArgs),
}

#[derive(Args)]
#[command(group(ArgGroup::new("source").required(true).args(["scenario", "structure"])))]
pub struct SourceArgs {
    /// Built-in scenario: best-case-optimal, worst-case-gordon or best-case-gordon.
    #[arg(long)]
    scenario: Option<String>,

    /// JSON file `{"mu": [4], "sigma": [[4x4]]}`.
    #[arg(long)]
    structure: Option<PathBuf>,
}

#[derive(Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    m: usize,
    #[arg(long, default_value_t = simulation::DEFAULT_REPLICATIONS)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated strategies (default: classical,gordon,optimal,numerator_only).
    #[arg(long, value_delimiter = ',')]
    strategies: Option<Vec<Strategy>>,
    /// Comma-separated estimator kinds (default depends on --m).
    #[arg(long, value_delimiter = ',')]
    kinds: Option<Vec<EstimatorKind>>,
    /// `plugin` (per replication) or `population`.
    #[arg(long, default_value = "plugin")]
    coefficients: CoefficientMode,
    /// JSON artifact path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the flat TSV summary here.
    #[arg(long)]
    tsv: Option<PathBuf>,
}

#[derive(Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Extra control-variate draws; adds ACV-scaled differences.
    #[arg(long)]
    m: Option<usize>,
    /// Report the linearly related controls case `B = slope*D + offset`.
    #[arg(long)]
    linear_cv: bool,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    slope: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    offset: f64,
    /// Member of the linear-control minimizer family.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    beta: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct SearchArgs {
    /// `maximize` or `minimize` the variance reduction.
    #[arg(long, default_value = "maximize")]
    objective: Objective,
    #[arg(long, default_value = "optimal")]
    strategy: Strategy,
    #[arg(long, default_value_t = 40)]
    population: usize,
    #[arg(long, default_value_t = 0.7)]
    weight_f: f64,
    #[arg(long, default_value_t = 0.9)]
    crossover: f64,
    #[arg(long, default_value_t = 200)]
    generations: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Symmetric bound on every correlation.
    #[arg(long, default_value_t = search::DEFAULT_BOUND)]
    bound: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct ColumnArgs {
    /// Header of the HF numerator column (A).
    #[arg(long, default_value = "hf_numerator")]
    col_a: String,
    /// Header of the LF numerator column (B).
    #[arg(long, default_value = "lf_numerator")]
    col_b: String,
    /// Header of the HF denominator column (C).
    #[arg(long, default_value = "hf_denominator")]
    col_c: String,
    /// Header of the LF denominator column (D).
    #[arg(long, default_value = "lf_denominator")]
    col_d: String,
}

impl ColumnArgs {
    fn schema(&self) -> ColumnSchema {
        ColumnSchema {
            hf_numerator: self.col_a.clone(),
            lf_numerator: self.col_b.clone(),
            hf_denominator: self.col_c.clone(),
            lf_denominator: self.col_d.clone(),
        }
    }
}

#[derive(Args)]
pub struct ApplyArgs {
    #[arg(long)]
    file: PathBuf,
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, default_value_t = 1000)]
    configs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    columns: ColumnArgs,
    /// `,` `;` or `tab`; detected from the header when absent.
    #[arg(long, value_parser = parse_delimiter)]
    delimiter: Option<char>,
    #[arg(long)]
    with_replacement: bool,
    /// Allow `--n` equal to the row count (no extra rows).
    #[arg(long)]
    allow_full: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    tsv: Option<PathBuf>,
}

#[derive(Args)]
#[command(group(ArgGroup::new("correlation").required(true).args(["paper_corr", "corr"])))]
pub struct SynthArgs {
    /// Use the built-in HF/LF correlation matrix.
    #[arg(long)]
    paper_corr: bool,
    /// JSON file holding a 4x4 correlation matrix.
    #[arg(long)]
    corr: Option<PathBuf>,
    #[arg(long, default_value_t = 1252)]
    rows: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Four comma-separated means in A,B,C,D order.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    means: Option<Vec<f64>>,
    /// Four comma-separated standard deviations in A,B,C,D order.
    #[arg(long, value_delimiter = ',')]
    scales: Option<Vec<f64>>,
    #[command(flatten)]
    columns: ColumnArgs,
    /// CSV path; stdout when absent. A `<out>.meta.json` sidecar records the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct ReplayArgs {
    /// Artifact (or synth sidecar) whose embedded config is re-run.
    artifact: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_delimiter(s: &str) -> std::result::Result<char, String> {
    match s {
        "," | "comma" => Ok(','),
        ";" | "semicolon" => Ok(';'),
        "\t" | "tab" | "\\t" => Ok('\t'),
        other => Err(format!("unsupported delimiter `{other}` (use , ; or tab)")),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimulateConfig {
    pub scenario: Scenario,
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LinearCvConfig {
    pub slope: f64,
    pub offset: f64,
    pub beta: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AnalyzeConfig {
    pub name: String,
    pub structure: CovarianceStructure,
    pub n: usize,
    pub m: Option<usize>,
    pub linear_cv: Option<LinearCvConfig>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SearchConfig {
    pub problem: SearchProblem,
    pub de: DEConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ApplyConfig {
    pub file: String,
    pub schema: ColumnSchema,
    pub delimiter: Option<char>,
    pub n: usize,
    pub configurations: usize,
    pub seed: u64,
    pub options: BootstrapOptions,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SynthConfig {
    pub correlation: Matrix4,
    pub means: [f64; 4],
    pub scales: [f64; 4],
    pub rows: usize,
    pub seed: u64,
    pub schema: ColumnSchema,
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate(a) => {
            let cfg = simulate_config(&a)?;
            let (json, tsv) = run_simulate(&cfg)?;
            if let Some(p) = &a.tsv {
                fs::write(p, tsv)?;
            }
            emit(a.out.as_deref(), &json)
        }
        Command::Analyze(a) => {
            let (name, structure) = resolve_structure(&a.source)?;
            let cfg = AnalyzeConfig {
                name,
                structure,
                n: a.n,
                m: a.m,
                linear_cv: a.linear_cv.then_some(LinearCvConfig {
                    slope: a.slope,
                    offset: a.offset,
                    beta: a.beta,
                }),
            };
            emit(a.out.as_deref(), &run_analyze(&cfg)?)
        }
        Command::Search(a) => {
            let mut problem = SearchProblem::new(a.objective, a.strategy);
            problem.lower = -a.bound;
            problem.upper = a.bound;
            problem.n = a.n;
            let cfg = SearchConfig {
                problem,
                de: DEConfig {
                    population_size: a.population,
                    weight_f: a.weight_f,
                    crossover_cr: a.crossover,
                    generations: a.generations,
                    seed: a.seed,
                },
            };
            emit(a.out.as_deref(), &run_search(&cfg)?)
        }
        Command::Apply(a) => {
            let cfg = ApplyConfig {
                file: a.file.display().to_string(),
                schema: a.columns.schema(),
                delimiter: a.delimiter,
                n: a.n,
                configurations: a.configs,
                seed: a.seed,
                options: BootstrapOptions {
                    with_replacement: a.with_replacement,
                    allow_full: a.allow_full,
                },
            };
            let (json, tsv) = run_apply(&cfg)?;
            if let Some(p) = &a.tsv {
                fs::write(p, tsv)?;
            }
            emit(a.out.as_deref(), &json)
        }
        Command::Synth(a) => {
            let correlation = match &a.corr {
                Some(p) => read_json::<Matrix4>(p, "correlation matrix")?,
                None => mfmc_app::paper_correlation_matrix(),
            };
            let cfg = SynthConfig {
                correlation,
                means: four(a.means.as_deref(), SYNTHETIC_MEANS, "means")?,
                scales: four(a.scales.as_deref(), SYNTHETIC_SCALES, "scales")?,
                rows: a.rows,
                seed: a.seed,
                schema: a.columns.schema(),
            };
            run_synth(&cfg, a.out.as_deref())
        }
        Command::Replay(a) => replay(&a.artifact, a.out.as_deref()),
    }
}

fn four(v: Option<&[f64]>, default: [f64; 4], field: &str) -> Result<[f64; 4]> {
    match v {
        None => Ok(default),
        Some(v) => v
            .try_into()
            .map_err(|_| Error::InvalidConfig(format!("--{field} needs exactly four values"))),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{what} in {}: {e}", path.display())))
}

fn resolve_structure(src: &SourceArgs) -> Result<(String, CovarianceStructure)> {
    if let Some(name) = &src.scenario {
        let sc = Scenario::builtin(name)?;
        return Ok((sc.name, sc.structure));
    }
    let path = src.structure.as_ref().expect("clap enforces one source");
    let file: StructureFile = read_json(path, "structure")?;
    let name = path
        .file_stem()
        .map_or_else(|| "structure".to_string(), |s| s.to_string_lossy().into_owned());
    Ok((name, CovarianceStructure::try_from(file)?))
}

fn simulate_config(a: &SimulateArgs) -> Result<SimulateConfig> {
    let (name, structure) = resolve_structure(&a.source)?;
    let mut scenario = Scenario::new(name, structure, a.n, a.m);
    scenario.replications = a.reps;
    scenario.coefficient_mode = a.coefficients;
    if let Some(s) = &a.strategies {
        scenario.strategies = s.clone();
    }
    if let Some(k) = &a.kinds {
        scenario.estimator_kinds = k.clone();
    }
    Ok(SimulateConfig { scenario, seed: a.seed })
}

fn run_simulate(cfg: &SimulateConfig) -> Result<(String, String)> {
    let summary = simulation::run_scenario(&cfg.scenario, cfg.seed)?;
    let predictions = simulation::predicted_vs_empirical(&cfg.scenario, &summary);
    let mut tsv = Vec::new();
    simulation::write_tsv(&summary, &mut tsv)?;
    let result = json!({ "summary": output::to_value(&summary)?, "predictions": output::to_value(&predictions)? });
    Ok((artifact("simulate", cfg, &result)?, String::from_utf8_lossy(&tsv).into_owned()))
}

fn run_analyze(cfg: &AnalyzeConfig) -> Result<String> {
    let moments = cfg.structure.moments();
    let pd = cfg.structure.check_positive_definite();
    let var_mc = variance_model::var_mc_mc(&moments, cfg.n)?;
    let mut rows = Vec::new();
    let mut best: Option<(Strategy, f64)> = None;
    for strategy in [
        Strategy::None,
        Strategy::Classical,
        Strategy::Gordon,
        Strategy::Optimal,
        Strategy::NumeratorOnly,
    ] {
        match variance_model::variance_difference(&moments, strategy, cfg.n) {
            Ok(exact) => {
                if best.map_or(true, |(_, d)| exact.difference < d) {
                    best = Some((strategy, exact.difference));
                }
                let approx = cfg.m.map(|m| variance_model::scale_breakdown(exact, cfg.n, m));
                rows.push(json!({
                    "strategy": strategy,
                    "exact": output::to_value(&exact)?,
                    "approximate": output::to_value(&approx)?,
                    "reduces_variance": exact.difference < 0.0,
                }));
            }
            Err(e) => rows.push(json!({ "strategy": strategy, "error": e.to_string() })),
        }
    }
    let linear = match &cfg.linear_cv {
        Some(l) => Some(linear_cv_report(&moments, cfg.n, l)?),
        None => None,
    };
    let result = json!({
        "positive_definite": pd.is_ok(),
        "positive_definite_error": pd.err().map(|e| e.to_string()),
        "moments": output::to_value(&moments)?,
        "true_ratio": moments.r,
        "var_mc_mc": var_mc,
        "acv_scaling": cfg.m.map(|m| variance_model::acv_factor(cfg.n, m)),
        "strategies": rows,
        "largest_reduction": best.map(|(s, _)| s),
        "linear_cv": linear,
    });
    artifact("analyze", cfg, &result)
}

fn linear_cv_report(m: &numerics::MomentSet, n: usize, l: &LinearCvConfig) -> Result<Value> {
    let control = LinearControl {
        slope: l.slope,
        offset: l.offset,
    };
    let coeffs = coefficients::linear_cv(m, control, l.beta)?;
    let tau = variance_model::linear_cv_tau(m);
    let edge = (m.var_d / 2.0).sqrt();
    Ok(json!({
        "tau": tau,
        "var_d": m.var_d,
        "coefficients": output::to_value(&coeffs)?,
        "var_cv_cv": variance_model::var_cv_cv(m, coeffs.alpha, coeffs.beta, n)?,
        "difference": variance_model::linear_cv_variance_difference(m, n)?,
        "reduces_variance": variance_model::linear_cv_reduction_predicate(m),
        "published_difference": variance_model::published_linear_cv_difference(m, n)?,
        "published_interval": [[-edge, 0.0], [edge, f64::MAX]],
        "published_verdict": variance_model::published_linear_cv_condition(tau, m.var_d),
    }))
}

fn run_search(cfg: &SearchConfig) -> Result<String> {
    let result = search::differential_evolution(&cfg.problem, &cfg.de)?;
    artifact("search", cfg, &result)
}

fn run_apply(cfg: &ApplyConfig) -> Result<(String, String)> {
    let delimiter = cfg.delimiter.map(|c| c as u8);
    let dataset = load_dataset(&cfg.file, &cfg.schema, delimiter)?;
    let report = bootstrap_experiment(&dataset, cfg.n, cfg.configurations, cfg.seed, cfg.options)?;
    let mut tsv = Vec::new();
    simulation::write_combinations_tsv("bootstrap", &report.combinations, &mut tsv)?;
    Ok((artifact("apply", cfg, &report)?, String::from_utf8_lossy(&tsv).into_owned()))
}

fn run_synth(cfg: &SynthConfig, out: Option<&Path>) -> Result<()> {
    let dataset = synthesize_dataset(&cfg.correlation, cfg.means, cfg.scales, cfg.rows, cfg.seed)?;
    let mut csv = Vec::new();
    write_dataset(&dataset, &cfg.schema, &mut csv)?;
    let csv = String::from_utf8_lossy(&csv).into_owned();
    match out {
        Some(p) => {
            fs::write(p, &csv)?;
            let meta = json!({ "rows": dataset.row_count() });
            let mut sidecar = p.as_os_str().to_owned();
            sidecar.push(".meta.json");
            fs::write(PathBuf::from(sidecar), artifact("synth", cfg, &meta)?)?;
            Ok(())
        }
        None => emit(None, &csv),
    }
}

fn replay(path: &Path, out: Option<&Path>) -> Result<()> {
    let value: Value = read_json(path, "artifact")?;
    let command = value["command"]
        .as_str()
        .ok_or_else(|| Error::InvalidConfig("artifact has no `command` field".into()))?;
    let config = value["config"].clone();
    let parse = |what: &str| Error::InvalidConfig(format!("artifact `config` is not a valid {what} config"));
    match command {
        "simulate" => {
            let cfg: SimulateConfig = serde_json::from_value(config).map_err(|_| parse("simulate"))?;
            emit(out, &run_simulate(&cfg)?.0)
        }
        "analyze" => {
            let cfg: AnalyzeConfig = serde_json::from_value(config).map_err(|_| parse("analyze"))?;
            emit(out, &run_analyze(&cfg)?)
        }
        "search" => {
            let cfg: SearchConfig = serde_json::from_value(config).map_err(|_| parse("search"))?;
            emit(out, &run_search(&cfg)?)
        }
        "apply" => {
            let cfg: ApplyConfig = serde_json::from_value(config).map_err(|_| parse("apply"))?;
            emit(out, &run_apply(&cfg)?.0)
        }
        "synth" => {
            let cfg: SynthConfig = serde_json::from_value(config).map_err(|_| parse("synth"))?;
            run_synth(&cfg, out)
        }
        other => Err(Error::InvalidConfig(format!("unknown command `{other}` in artifact"))),
    }
}
