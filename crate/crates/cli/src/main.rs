use std::collections::BTreeSet;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use efd::evaluation::{metric_table, summarize, summary_table, write_report_csv, ExperimentReport};
use efd::synthetic::{generate, SyntheticSpec, DEFAULT_METRIC};
use efd::{
    load_dataset, run_experiment, tune_depth, validate_dataset, write_native, DepthChoice, Efd, ExperimentKind,
    Interval, Recognition, RoundingDepth, TuningConfig,
};
use log::info;

/// Build, apply and evaluate execution fingerprint dictionaries.
#[derive(Debug, Parser)]
#[command(name = "efd", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a dictionary from a labeled corpus, tuning the depth unless given.
    Build(BuildArgs),
    /// Recognize the executions of a manifest against a saved dictionary.
    Recognize(RecognizeArgs),
    /// Run experiment protocols and write report files.
    Evaluate(EvaluateArgs),
    /// Generate a synthetic corpus in the native layout.
    Synth(SynthArgs),
    /// Report nodes whose data does not cover the fingerprint window.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
struct TuningArgs {
    /// Fingerprint window in seconds, "[start:end]".
    #[arg(long, default_value = "[60:120]")]
    interval: Interval,
    /// Fixed rounding depth; skips tuning.
    #[arg(long)]
    depth: Option<RoundingDepth>,
    /// Candidate depths for tuning.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6")]
    depths: Vec<RoundingDepth>,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

impl TuningArgs {
    fn config(&self, metric: &str) -> TuningConfig {
        let mut depths = self.depths.clone();
        depths.sort();
        depths.dedup();
        TuningConfig {
            depths_to_search: depths,
            folds: self.folds,
            seed: self.seed,
            interval: self.interval,
            metric_name: metric.to_string(),
        }
    }
}

#[derive(Debug, Args)]
struct BuildArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value = DEFAULT_METRIC)]
    metric: String,
    #[command(flatten)]
    tuning: TuningArgs,
    /// Dictionary file to write. The tuning report goes to `<output>.tuning.json`.
    #[arg(long, short)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct RecognizeArgs {
    #[arg(long)]
    dictionary: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Metric to evaluate; repeat for a sweep.
    #[arg(long = "metric", default_value = DEFAULT_METRIC)]
    metrics: Vec<String>,
    /// Comma-separated experiment names, or "all".
    #[arg(long, value_delimiter = ',', default_value = "all")]
    experiments: Vec<String>,
    #[command(flatten)]
    tuning: TuningArgs,
    #[arg(long, env = "EFD_OUTPUT_DIR", default_value = "efd-report")]
    output_dir: PathBuf,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// JSON corpus spec.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    spec: Option<PathBuf>,
    /// Built-in spec: "seven-apps" or "eleven-apps".
    #[arg(long)]
    preset: Option<String>,
    #[arg(long, env = "EFD_OUTPUT_DIR")]
    output_dir: PathBuf,
    /// Overrides the spec seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value = "[60:120]")]
    interval: Interval,
}

fn tuning_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".tuning.json");
    PathBuf::from(name)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn cmd_build(args: BuildArgs) -> Result<ExitCode> {
    let keep = BTreeSet::from([args.metric.clone()]);
    let dataset = load_dataset(&args.manifest, Some(&keep))?;
    info!("loaded {} executions", dataset.len());
    let depth = match args.tuning.depth {
        Some(d) => d,
        None => {
            let cfg = args.tuning.config(&args.metric);
            let result = tune_depth(&dataset, &cfg)?;
            let report = serde_json::json!({ "config": cfg, "result": result });
            write_file(
                &tuning_path(&args.output),
                &(serde_json::to_string_pretty(&report)? + "\n"),
            )?;
            result.chosen_depth
        }
    };
    let (efd, stats) = Efd::build_with_stats(&dataset, &args.metric, args.tuning.interval, depth)?;
    efd.save(&args.output)?;
    eprintln!(
        "wrote {} ({} keys, depth {}, {} fingerprints, {} nodes skipped)",
        args.output.display(),
        efd.len(),
        depth,
        stats.fingerprints_inserted,
        stats.nodes_skipped
    );
    Ok(ExitCode::SUCCESS)
}

fn votes_summary(r: &Recognition) -> String {
    let votes: Vec<String> = r.votes.iter().map(|(app, n)| format!("{app}:{n}")).collect();
    let votes = if votes.is_empty() {
        "-".to_string()
    } else {
        votes.join(",")
    };
    format!("votes={votes} nodes={}/{}", r.nodes_matched, r.node_count)
}

fn cmd_recognize(args: RecognizeArgs) -> Result<ExitCode> {
    let efd = Efd::load(&args.dictionary)?;
    let keep = BTreeSet::from([efd.metric_name().to_string()]);
    let dataset = load_dataset(&args.manifest, Some(&keep))?;
    let mut out = BufWriter::new(io::stdout().lock());
    let mut failures = 0;
    for e in dataset.executions() {
        match efd.recognize(e) {
            Ok(r) => {
                let cands = if r.is_unknown() {
                    efd::UNKNOWN.to_string()
                } else {
                    r.candidates.join(",")
                };
                writeln!(out, "{}\t{cands}\t{}", e.execution_id(), votes_summary(&r))?;
            }
            Err(err) => {
                failures += 1;
                eprintln!("error: {}: {err}", e.execution_id());
            }
        }
    }
    out.flush()?;
    if failures > 0 && failures == dataset.len() {
        eprintln!("all {failures} executions failed");
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

fn parse_experiments(names: &[String]) -> Result<Vec<ExperimentKind>> {
    if names.iter().any(|n| n == "all") {
        return Ok(ExperimentKind::ALL.to_vec());
    }
    let mut kinds = Vec::new();
    for n in names {
        let k: ExperimentKind = n.parse()?;
        if !kinds.contains(&k) {
            kinds.push(k);
        }
    }
    Ok(kinds)
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<ExitCode> {
    let kinds = parse_experiments(&args.experiments)?;
    let mut metrics = Vec::new();
    for m in &args.metrics {
        if !metrics.contains(m) {
            metrics.push(m.clone());
        }
    }
    let keep: BTreeSet<String> = metrics.iter().cloned().collect();
    let dataset = load_dataset(&args.manifest, Some(&keep))?;
    info!("loaded {} executions", dataset.len());
    let depth = args.tuning.depth.map_or(DepthChoice::Tuned, DepthChoice::Fixed);

    let mut reports: Vec<ExperimentReport> = Vec::new();
    let mut errors = Vec::new();
    for metric in &metrics {
        let cfg = args.tuning.config(metric);
        for &kind in &kinds {
            match run_experiment(kind, &dataset, &cfg, depth) {
                Ok(r) => {
                    info!("{kind} {metric}: F = {:.4}", r.f_score);
                    reports.push(r);
                }
                Err(e) => errors.push(format!("{kind} {metric}: {e}")),
            }
        }
    }

    fs::create_dir_all(&args.output_dir).with_context(|| format!("creating {}", args.output_dir.display()))?;
    let dir = &args.output_dir;
    let mut csv = Vec::new();
    write_report_csv(&reports, &mut csv)?;
    fs::write(dir.join("experiments.csv"), csv)?;
    write_file(&dir.join("summary.txt"), &summary_table(&reports))?;
    write_file(
        &dir.join("summary.json"),
        &(serde_json::to_string_pretty(&summarize(&reports))? + "\n"),
    )?;
    write_file(
        &dir.join("reports.json"),
        &(serde_json::to_string_pretty(&reports)? + "\n"),
    )?;
    let mut ranking: Vec<ExperimentReport> = reports
        .iter()
        .filter(|r| r.kind == ExperimentKind::NormalFold)
        .cloned()
        .collect();
    if !ranking.is_empty() {
        ranking.sort_by(|a, b| b.f_score.total_cmp(&a.f_score));
        write_file(&dir.join("metric_sweep.csv"), &metric_table(&ranking))?;
    }
    print!("{}", summary_table(&reports));

    for e in &errors {
        eprintln!("error: {e}");
    }
    Ok(if errors.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn cmd_synth(args: SynthArgs) -> Result<ExitCode> {
    let mut spec = match (&args.spec, &args.preset) {
        (Some(path), _) => SyntheticSpec::load(path)?,
        (None, Some(name)) => match SyntheticSpec::preset(name) {
            Some(s) => s,
            None => bail!("unknown preset {name:?}; expected seven-apps or eleven-apps"),
        },
        (None, None) => bail!("one of --spec or --preset is required"),
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let dataset = generate(&spec)?;
    let manifest = write_native(&dataset, &args.output_dir)?;
    write_file(&args.output_dir.join("spec.json"), &(spec.to_json() + "\n"))?;
    println!("{}", manifest.display());
    eprintln!("wrote {} executions", dataset.len());
    Ok(ExitCode::SUCCESS)
}

fn cmd_validate(args: ValidateArgs) -> Result<ExitCode> {
    let dataset = load_dataset(&args.manifest, None)?;
    let report = validate_dataset(&dataset, args.interval);
    let mut out = BufWriter::new(io::stdout().lock());
    for issue in &report.issues {
        let problem = serde_json::to_value(&issue.problem)?;
        let kind = problem["kind"].as_str().unwrap_or("unknown");
        writeln!(
            out,
            "{}\t{}\t{}\t{kind}",
            issue.execution_id, issue.node_index, issue.metric
        )?;
    }
    out.flush()?;
    eprintln!(
        "{} executions, {} metrics, {} coverage issues in {}",
        dataset.len(),
        dataset.metric_names().len(),
        report.issues.len(),
        args.interval
    );
    Ok(if report.is_clean() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Build(a) => cmd_build(a),
        Command::Recognize(a) => cmd_recognize(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Validate(a) => cmd_validate(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
