//! `score`: community detection with SCORE and its baselines.

mod output;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use score_core::dcbm::{diagnostics, population_ratio_matrix, population_spectrum, two_block_eigenvalues};
use score_core::datasets::{load_graph, load_labels};
use score_core::embed::score_ratio;
use score_core::experiment::{parse_truncation, run_experiment, ExperimentConfig, RunReport};
use score_core::pipeline::{detect, DetectOptions, DetectReport, Method, ThresholdChoice};
use score_core::{giant_component, hamming_error, leading_eigs, EigenOptions, Error, ErrorKind, Labeling, Result};

use output::{emit, fields, fmt_f, json, Format, Table};

#[derive(Parser)]
#[command(name = "score", version, about = "Spectral community detection on ratios of eigenvectors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct OutputArgs {
    /// Print JSON instead of a text table.
    #[arg(long, conflicts_with = "csv")]
    json: bool,
    /// Print CSV rows instead of a text table.
    #[arg(long)]
    csv: bool,
    /// Write output to this file instead of stdout.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

impl OutputArgs {
    fn format(&self) -> Format {
        if self.json {
            Format::Json
        } else if self.csv {
            Format::Csv
        } else {
            Format::Text
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Detect communities in a network.
    Detect(DetectArgs),
    /// Run a simulation experiment on the degree-corrected block model.
    Experiment(ExperimentArgs),
    /// Inspect empirical or population spectra, or model diagnostics.
    Spectra(SpectraArgs),
    /// Hamming error between an estimated and a true labeling.
    Eval(EvalArgs),
}

#[derive(Args)]
struct DetectArgs {
    /// Edge list path or `builtin:<name>`.
    #[arg(value_name = "INPUT", required_unless_present = "input")]
    positional: Option<String>,
    #[arg(long, conflicts_with = "positional")]
    input: Option<String>,
    /// Ground-truth labels (`node label` lines); builtin inputs bring their own.
    #[arg(long)]
    labels: Option<String>,
    /// Number of communities.
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// score, scoreq:<q>, score1, score2, opca or npca.
    #[arg(long, default_value = "score")]
    method: String,
    /// Split the SCORE ratio vector at this value (K = 2), or `auto`.
    #[arg(long, allow_hyphen_values = true)]
    threshold: Option<String>,
    /// Ratio truncation level: a number, `inf` or `log` (default).
    #[arg(long)]
    tn: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Read each line as a directed arc and collapse reciprocal pairs.
    #[arg(long)]
    directed: bool,
    /// Also write `node community` lines to this file.
    #[arg(long, value_name = "PATH")]
    assignments: Option<PathBuf>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Preset id (1, 2a, 2b, 2c, 2d, 3, 4a, 4b, 4c).
    #[arg(required_unless_present = "config")]
    id: Option<String>,
    /// Plain-text config file; keys override the preset named by `id`.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Ratio truncation level: a number or `inf`.
    #[arg(long)]
    tn: Option<String>,
    /// Methods to run, comma-separated.
    #[arg(long, value_delimiter = ',')]
    method: Vec<String>,
    /// Print the resolved config and exit.
    #[arg(long)]
    show_config: bool,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum SpectraKind {
    Empirical,
    Population,
    Diagnostics,
}

#[derive(Args)]
struct SpectraArgs {
    #[arg(value_enum)]
    what: SpectraKind,
    /// Edge list path or `builtin:<name>` (empirical).
    #[arg(long)]
    input: Option<String>,
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// Ratio truncation level for the empirical ratio summary.
    #[arg(long)]
    tn: Option<String>,
    /// DCBM config file (population, diagnostics).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Experiment preset supplying the DCBM (population, diagnostics).
    #[arg(long)]
    preset: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct EvalArgs {
    /// Estimated labels, `node label` lines.
    #[arg(long)]
    estimated: String,
    /// True labels, `node label` lines or `builtin:<name>`.
    #[arg(long)]
    labels: String,
    #[command(flatten)]
    output: OutputArgs,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Detect(a) => cmd_detect(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::Spectra(a) => cmd_spectra(a),
        Command::Eval(a) => cmd_eval(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Argument => 2,
                ErrorKind::Data => 3,
                ErrorKind::Numerical => 4,
            })
        }
    }
}

fn write(output: &OutputArgs, text: &str) -> Result<()> {
    Ok(emit(text, output.out.as_deref())?)
}

fn cmd_detect(a: DetectArgs) -> Result<()> {
    let input = a.input.or(a.positional).expect("clap requires an input");
    let method: Method = a.method.parse()?;
    let labels_spec = a
        .labels
        .or_else(|| input.starts_with("builtin:").then(|| input.clone()));
    let mut opts = DetectOptions::new(a.k, method);
    opts.seed = a.seed;
    opts.eigen.seed = a.seed;
    opts.threshold = a.threshold.as_deref().map(str::parse::<ThresholdChoice>).transpose()?;
    opts.tn = match a.tn.as_deref() {
        Some(s) => parse_truncation(s)?,
        None => None,
    };

    let (graph, _) = load_graph(&input, a.directed)?;
    let truth = labels_spec.as_deref().map(load_labels).transpose()?;
    let report = detect(&graph, truth.as_ref(), &opts)?;

    if let Some(path) = &a.assignments {
        let text: String = report.assignments.iter().map(|(id, c)| format!("{id} {c}\n")).collect();
        fs::write(path, text)?;
    }
    let text = match a.output.format() {
        Format::Json => json(&report),
        Format::Csv => {
            let mut t = Table::new(&["node", "community"]);
            for (id, c) in &report.assignments {
                t.push(vec![id.clone(), c.to_string()]);
            }
            t.csv()
        }
        Format::Text => detect_text(&report),
    };
    write(&a.output, &text)
}

fn detect_text(r: &DetectReport) -> String {
    let mut sizes = vec![0usize; r.k];
    for (_, c) in &r.assignments {
        sizes[c - 1] += 1;
    }
    let mut pairs = vec![
        ("method", r.method.to_string()),
        ("K", r.k.to_string()),
        ("nodes", format!("{} ({} edges)", r.nodes_input, r.edges_input)),
        ("giant component", r.n0.to_string()),
        ("eigenvalues", r.eigenvalues.iter().map(|x| fmt_f(*x)).collect::<Vec<_>>().join(" ")),
        ("community sizes", sizes.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(" ")),
    ];
    if let Some(t) = r.threshold {
        pairs.push(("threshold", fmt_f(t)));
    }
    if r.truncated_count > 0 {
        pairs.push(("truncated ratios", r.truncated_count.to_string()));
    }
    if let Some(h) = &r.hamming {
        pairs.push(("mismatches", format!("{} / {} ({})", h.mismatches, r.n0, fmt_f(h.rate))));
    }
    fields(&pairs)
}

fn experiment_config(id: Option<&str>, config: Option<&PathBuf>) -> Result<ExperimentConfig> {
    match config {
        Some(path) => {
            let mut text = fs::read_to_string(path)?;
            if let Some(id) = id {
                text = format!("id = {id}\n{text}");
            }
            ExperimentConfig::from_text(&text)
        }
        None => ExperimentConfig::preset(id.expect("clap requires an id or a config")),
    }
}

fn cmd_experiment(a: ExperimentArgs) -> Result<()> {
    let mut cfg = experiment_config(a.id.as_deref(), a.config.as_ref())?;
    if let Some(r) = a.reps {
        cfg.reps = r;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(t) = a.tn.as_deref() {
        cfg.tn = parse_truncation(t)?.ok_or_else(|| {
            Error::Argument("experiments need an explicit truncation level (a number or `inf`)".into())
        })?;
    }
    if !a.method.is_empty() {
        cfg.methods = a.method.iter().map(|m| m.parse()).collect::<Result<_>>()?;
    }
    cfg.validate()?;
    if a.show_config {
        return write(&a.output, &cfg.to_text());
    }

    let report = run_experiment(&cfg)?;
    let text = match a.output.format() {
        Format::Json => json(&report),
        Format::Csv => experiment_rows(&report).csv(),
        Format::Text => experiment_text(&report),
    };
    write(&a.output, &text)
}

fn experiment_rows(r: &RunReport) -> Table {
    let mut t = Table::new(&["rep", "n0", "edges", "method", "mismatches", "rate"]);
    for rep in &r.repetitions {
        for o in &rep.outcomes {
            t.push(vec![
                rep.index.to_string(),
                rep.n0.to_string(),
                rep.edges.to_string(),
                o.method.to_string(),
                o.mismatches.to_string(),
                o.rate.to_string(),
            ]);
        }
    }
    t
}

fn experiment_text(r: &RunReport) -> String {
    let c = &r.config;
    let mut out = format!(
        "experiment {}: n = {}, K = {}, reps = {}, theta = {}, seed = {}\n\n",
        c.id, c.n, c.k, c.reps, c.theta, r.seed
    );
    let mut t = Table::new(&["method", "mean rate", "sd", "mean errors", "seconds"]);
    for (s, time) in r.summaries.iter().zip(&r.timings) {
        t.push(vec![
            s.method.to_string(),
            fmt_f(s.mean_rate),
            fmt_f(s.sd_rate),
            format!("{:.1}", s.mean_mismatches),
            format!("{:.2}", time.seconds),
        ]);
    }
    out.push_str(&t.aligned());
    out
}

#[derive(Serialize)]
struct EmpiricalSpectrum {
    n0: usize,
    eigenvalues: Vec<f64>,
    leading_vector_positive: bool,
    ratio_columns: Vec<RatioColumn>,
}

#[derive(Serialize)]
struct RatioColumn {
    column: usize,
    min: f64,
    max: f64,
    truncated: usize,
}

#[derive(Serialize)]
struct PopulationReport {
    n: usize,
    k: usize,
    theta_norm: f64,
    d: Vec<f64>,
    lambdas: Vec<f64>,
    dad_eigenvalues: Vec<f64>,
    /// Closed-form eigenvalues for two communities.
    two_block_lambdas: Option<(f64, f64)>,
    /// Per community, the values of the population ratio matrix row.
    ratio_rows: Vec<Vec<f64>>,
}

fn dcbm_config(a: &SpectraArgs) -> Result<ExperimentConfig> {
    match (&a.config, &a.preset) {
        (None, None) => Err(Error::Argument("this view needs --config or --preset".into())),
        (config, preset) => experiment_config(preset.as_deref(), config.as_ref()),
    }
}

fn cmd_spectra(a: SpectraArgs) -> Result<()> {
    let format = a.output.format();
    let text = match a.what {
        SpectraKind::Empirical => {
            let input = a
                .input
                .as_deref()
                .ok_or_else(|| Error::Argument("empirical spectra need --input".into()))?;
            let (graph, _) = load_graph(input, false)?;
            let (giant, _) = giant_component(&graph);
            let opts = EigenOptions {
                seed: a.seed,
                ..EigenOptions::default()
            };
            let spec = leading_eigs(&giant, a.k, &opts)?;
            let tn = match a.tn.as_deref() {
                Some(s) => parse_truncation(s)?,
                None => None,
            };
            let ratio_columns = if a.k >= 2 {
                let r = score_ratio(&spec, tn)?;
                (0..a.k - 1)
                    .map(|c| {
                        let col = r.ratios.column(c);
                        RatioColumn {
                            column: c + 1,
                            min: col.min(),
                            max: col.max(),
                            truncated: col.iter().filter(|x| x.abs() >= r.threshold).count(),
                        }
                    })
                    .collect()
            } else {
                Vec::new()
            };
            let report = EmpiricalSpectrum {
                n0: giant.node_count(),
                eigenvalues: spec.values(),
                leading_vector_positive: spec.vector(0).iter().all(|&x| x > 0.0),
                ratio_columns,
            };
            match format {
                Format::Json => json(&report),
                _ => {
                    let mut t = Table::new(&["k", "eigenvalue"]);
                    for (i, v) in report.eigenvalues.iter().enumerate() {
                        t.push(vec![(i + 1).to_string(), v.to_string()]);
                    }
                    if format == Format::Csv {
                        t.csv()
                    } else {
                        let mut out = t.aligned();
                        if !report.ratio_columns.is_empty() {
                            let mut r = Table::new(&["ratio column", "min", "max", "truncated"]);
                            for c in &report.ratio_columns {
                                r.push(vec![c.column.to_string(), fmt_f(c.min), fmt_f(c.max), c.truncated.to_string()]);
                            }
                            out.push('\n');
                            out.push_str(&r.aligned());
                        }
                        out
                    }
                }
            }
        }
        SpectraKind::Population => {
            let cfg = dcbm_config(&a)?;
            let (params, labels) = cfg.params()?;
            let ps = population_spectrum(&params, &labels)?;
            let norm_sq = ps.theta_norm * ps.theta_norm;
            let two_block_lambdas = (cfg.k == 2).then(|| {
                two_block_eigenvalues(cfg.a[0][0], cfg.a[0][1], cfg.a[1][1], ps.d[0], ps.d[1], norm_sq)
            });
            let ratios = population_ratio_matrix(&ps)?;
            let starts: Vec<usize> = first_member_of_each(&labels);
            let report = PopulationReport {
                n: cfg.n,
                k: cfg.k,
                theta_norm: ps.theta_norm,
                d: ps.d.clone(),
                lambdas: ps.lambdas.clone(),
                dad_eigenvalues: ps.lambdas.iter().map(|l| l / norm_sq).collect(),
                two_block_lambdas,
                ratio_rows: starts
                    .iter()
                    .map(|&i| ratios.ratios.row(i).iter().copied().collect())
                    .collect(),
            };
            match format {
                Format::Json => json(&report),
                _ => {
                    let mut t = Table::new(&["k", "lambda", "dad eigenvalue", "d"]);
                    for i in 0..report.k {
                        t.push(vec![
                            (i + 1).to_string(),
                            report.lambdas[i].to_string(),
                            report.dad_eigenvalues[i].to_string(),
                            report.d[i].to_string(),
                        ]);
                    }
                    if format == Format::Csv {
                        t.csv()
                    } else {
                        let mut out = t.aligned();
                        if let Some((hi, lo)) = report.two_block_lambdas {
                            out.push_str(&format!("\nclosed form: {hi} {lo}\n"));
                        }
                        out
                    }
                }
            }
        }
        SpectraKind::Diagnostics => {
            let cfg = dcbm_config(&a)?;
            let (params, labels) = cfg.params()?;
            let d = diagnostics(&params, &labels)?;
            let pairs = [
                ("eigengap", d.eigengap.to_string()),
                ("err_n", d.err_n.to_string()),
                ("osnr", d.osnr.to_string()),
                ("nsnr", d.nsnr.to_string()),
                ("wnorm_bound", d.wnorm_bound.to_string()),
                ("osc", d.osc.to_string()),
                ("sparsity_ratio", d.sparsity_ratio.to_string()),
                ("mdv_holds", d.mdv_holds.to_string()),
                ("mdm_holds", d.mdm_holds.to_string()),
            ];
            match format {
                Format::Json => json(&d),
                Format::Csv => {
                    let mut t = Table::new(&["quantity", "value"]);
                    for (k, v) in pairs {
                        t.push(vec![k.to_string(), v]);
                    }
                    t.csv()
                }
                Format::Text => fields(&pairs),
            }
        }
    };
    write(&a.output, &text)
}

fn first_member_of_each(labels: &Labeling) -> Vec<usize> {
    (0..labels.k())
        .filter_map(|k| labels.as_slice().iter().position(|&l| l == k))
        .collect()
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let estimated = load_labels(&a.estimated)?;
    let truth = load_labels(&a.labels)?;
    let k = estimated.community_count().max(truth.community_count());
    let mut est = Vec::new();
    let mut tru = Vec::new();
    for (node, label) in estimated.entries() {
        let t = truth
            .label_of(node)
            .ok_or_else(|| Error::Data(format!("node `{node}` has no true label")))?;
        est.push(label);
        tru.push(t);
    }
    let h = hamming_error(&Labeling::new(est, k)?, &Labeling::new(tru, k)?, k)?;
    let text = match a.output.format() {
        Format::Json => json(&h),
        Format::Csv => {
            let mut t = Table::new(&["mismatches", "n", "rate"]);
            t.push(vec![h.mismatches.to_string(), estimated.entries().len().to_string(), h.rate.to_string()]);
            t.csv()
        }
        Format::Text => fields(&[
            ("mismatches", h.mismatches.to_string()),
            ("nodes", estimated.entries().len().to_string()),
            ("rate", fmt_f(h.rate)),
        ]),
    };
    write(&a.output, &text)
}
