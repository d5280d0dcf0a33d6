use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use fairlos::cohort::{generate_cohort, SyntheticCohortConfig};
use fairlos::learners::{fit, predict_proba, threshold_scores, LearnerConfig, LearnerKind, TrainedModel};
use fairlos::metrics::group_metric_table;
use fairlos::mitigation::{
    fit_exponentiated_gradient, fit_threshold_optimizer, predict_eg, predict_thresholded, EgParams, FairnessConstraint,
};
use fairlos::pipeline::emit::{csv_table, group_rows, GROUP_HEADER};
use fairlos::pipeline::{
    emit_repeat, emit_report, evaluate_model, load_records, prepare, records_for_sex, repeat_evaluate, run_pipeline,
    stats_report, CohortSource, EmitOptions, MitigationSettings, Provenance, RunConfig, RunReport, SexFilter,
    StageSeeds,
};
use fairlos::tabular::split::stratified_split_indices;
use fairlos::tabular::{read_admissions_csv, write_admissions_csv, AdmissionRecord, EncodedDataset, Sex};

/// Length-of-stay classification with group fairness audits and mitigation.
#[derive(Parser, Debug)]
#[command(name = "fairlos", version, about)]
struct Cli {
    /// Master seed. Overrides the seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// JSON configuration: a cohort configuration for `generate`, a run
    /// configuration for every other command.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output file for `generate`, output directory otherwise.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic admissions CSV.
    Generate(GenerateArgs),
    /// Quartiles, demographics and hypothesis tests of an admissions CSV.
    Stats(StatsArgs),
    /// Encode, split, balance and normalise admissions per sex.
    Prepare(PrepareArgs),
    /// Fit a learner on a prepared training split.
    Train(TrainArgs),
    /// Score a test split overall and per ethnic group.
    Evaluate(EvaluateArgs),
    /// Fit a bias mitigation and audit it on a test split.
    Mitigate(MitigateArgs),
    /// Run the full pipeline, or re-emit tables from a saved report.
    Report(ReportArgs),
    /// Repeat split, train and evaluate over independent seeds.
    Repeat(RepeatArgs),
}

#[derive(Args, Debug)]
struct GenerateArgs {
    /// Use the preset with enlarged, under-recorded minority groups.
    #[arg(long)]
    biased: bool,
    /// Number of patients.
    #[arg(long)]
    patients: Option<usize>,
}

#[derive(Args, Debug, Clone)]
struct CohortArgs {
    /// Admissions CSV. Without it the configured cohort is used.
    #[arg(long = "in")]
    input: Option<PathBuf>,
    /// Pin the LOS threshold in days.
    #[arg(long)]
    psi: Option<u32>,
}

#[derive(Args, Debug)]
struct StatsArgs {
    #[command(flatten)]
    cohort: CohortArgs,
    /// Where to write the JSON report. Defaults to `<out>/stats.json`.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PrepareArgs {
    #[command(flatten)]
    cohort: CohortArgs,
    #[arg(long, value_parser = parse_sex_filter)]
    sex: Option<SexFilter>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Prepared training CSV; its sidecar JSON must sit next to it.
    #[arg(long)]
    train: PathBuf,
    #[arg(long, value_parser = parse_learner)]
    learner: Option<LearnerKind>,
    /// Sex the split belongs to; selects the derived learner seed.
    #[arg(long, value_parser = parse_sex, default_value = "Male")]
    sex: Sex,
    /// Model path. Defaults to `<out>/model.json`.
    #[arg(long)]
    model: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    test: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Method {
    Eg,
    Threshold,
}

#[derive(Args, Debug)]
struct MitigateArgs {
    #[arg(long, value_enum)]
    method: Method,
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
    /// Maximum allowed gap between group false-negative rates.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Exponentiated-gradient iterations.
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long, value_parser = parse_sex, default_value = "Male")]
    sex: Sex,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Re-emit tables and figures from this report instead of running.
    #[arg(long)]
    from: Option<PathBuf>,
    #[command(flatten)]
    cohort: CohortArgs,
    #[arg(long, value_parser = parse_sex_filter)]
    sex: Option<SexFilter>,
    #[arg(long, value_parser = parse_learner)]
    learner: Option<LearnerKind>,
    /// Add both mitigations with default settings if none are configured.
    #[arg(long)]
    mitigate: bool,
    /// Skip SVG figures.
    #[arg(long)]
    no_plots: bool,
}

#[derive(Args, Debug)]
struct RepeatArgs {
    /// Number of splits. Defaults to the configured repeat count.
    #[arg(long)]
    k: Option<usize>,
    /// Use the same seeds for every split.
    #[arg(long)]
    same_seed: bool,
    #[command(flatten)]
    cohort: CohortArgs,
    #[arg(long, value_parser = parse_sex_filter)]
    sex: Option<SexFilter>,
    #[arg(long, value_parser = parse_learner)]
    learner: Option<LearnerKind>,
}

fn parse_sex_filter(s: &str) -> Result<SexFilter, String> {
    s.parse().map_err(|e: fairlos::Error| e.to_string())
}

fn parse_learner(s: &str) -> Result<LearnerKind, String> {
    s.parse().map_err(|e: fairlos::Error| e.to_string())
}

fn parse_sex(s: &str) -> Result<Sex, String> {
    match s.to_ascii_lowercase().as_str() {
        "male" | "m" => Ok(Sex::Male),
        "female" | "f" => Ok(Sex::Female),
        other => Err(format!("unknown sex {other:?}")),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut shown = e.to_string();
            for cause in e.chain().skip(1) {
                let text = cause.to_string();
                if !shown.contains(&text) {
                    eprintln!("  caused by: {text}");
                    shown = text;
                }
            }
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Generate(a) => generate(&cli, a),
        Command::Stats(a) => stats(&cli, a),
        Command::Prepare(a) => prepare_cmd(&cli, a),
        Command::Train(a) => train(&cli, a),
        Command::Evaluate(a) => evaluate(&cli, a),
        Command::Mitigate(a) => mitigate(&cli, a),
        Command::Report(a) => report(&cli, a),
        Command::Repeat(a) => repeat(&cli, a),
    }
}

fn stage<T>(name: &'static str, r: fairlos::Result<T>) -> Result<T> {
    r.map_err(|e| anyhow!(e.in_stage(name)))
}

fn run_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => stage("config", RunConfig::load(path))?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    Ok(cfg)
}

fn apply_cohort(cfg: &mut RunConfig, args: &CohortArgs) {
    if let Some(path) = &args.input {
        cfg.cohort = CohortSource::Admissions { path: path.clone() };
    }
    if args.psi.is_some() {
        cfg.psi = args.psi;
    }
}

fn out_dir(cfg: &RunConfig) -> Result<&Path> {
    std::fs::create_dir_all(&cfg.out_dir).with_context(|| format!("creating {}", cfg.out_dir.display()))?;
    Ok(&cfg.out_dir)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn load_dataset(csv: &Path) -> fairlos::Result<EncodedDataset> {
    EncodedDataset::load(csv, &csv.with_extension("json"))
}

fn generate(cli: &Cli, args: &GenerateArgs) -> Result<()> {
    let mut cfg = match (&cli.config, args.biased) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            stage("generate", SyntheticCohortConfig::from_json(&text))?
        }
        (None, true) => SyntheticCohortConfig::biased(),
        (None, false) => SyntheticCohortConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(n) = args.patients {
        cfg.n_patients = n;
    }
    let records = stage("generate", generate_cohort(&cfg))?;
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("admissions.csv"));
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    let file = std::fs::File::create(&out).with_context(|| format!("creating {}", out.display()))?;
    stage(
        "generate",
        write_admissions_csv(&records, std::io::BufWriter::new(file)),
    )?;
    println!("wrote {} admissions to {}", records.len(), out.display());
    Ok(())
}

fn records(cfg: &RunConfig) -> Result<Vec<AdmissionRecord>> {
    if let CohortSource::Admissions { path } = &cfg.cohort {
        let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
        return stage("generate", read_admissions_csv(std::io::BufReader::new(file)));
    }
    stage("generate", load_records(&cfg.cohort, cfg.seed))
}

fn stats(cli: &Cli, args: &StatsArgs) -> Result<()> {
    let mut cfg = run_config(cli)?;
    apply_cohort(&mut cfg, &args.cohort);
    let records = records(&cfg)?;
    let provenance = Provenance::new(cfg.config_hash(), cfg.seed);
    let report = stage("stats", stats_report(&records, cfg.psi, provenance))?;
    let path = match &args.report {
        Some(p) => p.clone(),
        None => out_dir(&cfg)?.join("stats.json"),
    };
    std::fs::write(&path, report.to_json()?).with_context(|| format!("writing {}", path.display()))?;
    for s in &report.sexes {
        println!(
            "{}: {} admissions, median LOS {}, psi {} ({:.3} long stay)",
            s.sex.label(),
            s.dataset.admissions,
            s.los.median,
            s.psi,
            s.dataset.long_stay_rate
        );
    }
    Ok(())
}

fn prepare_cmd(cli: &Cli, args: &PrepareArgs) -> Result<()> {
    let mut cfg = run_config(cli)?;
    apply_cohort(&mut cfg, &args.cohort);
    if let Some(sex) = args.sex {
        cfg.sex = sex;
    }
    let records = records(&cfg)?;
    let out = out_dir(&cfg)?.to_path_buf();
    for sex in cfg.sex.sexes() {
        let cohort = records_for_sex(&records, sex);
        let seeds = StageSeeds::derive(cfg.seed, sex, 0);
        let prepared = stage("prepare", prepare(&cohort, cfg.psi, cfg.train_fraction, &seeds))?;
        let dir = out.join(sex.label().to_ascii_lowercase());
        std::fs::create_dir_all(&dir)?;
        stage("prepare", prepared.train.save(&dir, "train"))?;
        stage("prepare", prepared.test.save(&dir, "test"))?;
        println!(
            "{}: psi {}, {} balanced train rows, {} test rows in {}",
            sex.label(),
            prepared.psi,
            prepared.train.len(),
            prepared.test.len(),
            dir.display()
        );
    }
    Ok(())
}

fn learner_config(cfg: &RunConfig, kind: Option<LearnerKind>) -> LearnerConfig {
    match kind {
        Some(k) if k != cfg.learner.kind => LearnerConfig::for_kind(k),
        _ => cfg.learner.clone(),
    }
}

fn train(cli: &Cli, args: &TrainArgs) -> Result<()> {
    let cfg = run_config(cli)?;
    let learner = learner_config(&cfg, args.learner);
    let data = stage("train", load_dataset(&args.train))?;
    let seed = StageSeeds::derive(cfg.seed, args.sex, 0).learner;
    let model = stage(
        "train",
        fit(&learner.with_seed(seed), &data.features, &data.labels, None),
    )?;
    let path = match &args.model {
        Some(p) => p.clone(),
        None => out_dir(&cfg)?.join("model.json"),
    };
    std::fs::write(&path, stage("train", model.to_json())?)?;
    println!(
        "trained {} on {} rows; wrote {}",
        model.config.kind.label(),
        data.len(),
        path.display()
    );
    Ok(())
}

fn load_model(path: &Path) -> Result<TrainedModel> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    stage("evaluate", TrainedModel::from_json(&text))
}

fn evaluate(cli: &Cli, args: &EvaluateArgs) -> Result<()> {
    let cfg = run_config(cli)?;
    let model = load_model(&args.model)?;
    let test = stage("evaluate", load_dataset(&args.test))?;
    let (result, _) = stage("evaluate", evaluate_model(&model, &test))?;
    let out = out_dir(&cfg)?;
    write_json(&out.join("evaluation.json"), &result)?;
    let provenance = Provenance::new(cfg.config_hash(), cfg.seed);
    std::fs::write(
        out.join("groups.csv"),
        stage(
            "evaluate",
            csv_table(&provenance, &GROUP_HEADER, &group_rows(&result.groups)),
        )?,
    )?;
    let m = &result.metrics;
    println!(
        "AUC {} FNR {:.3} FPR {:.3} balanced accuracy {:.3}; FNR range {:.3}",
        m.auc.map(|a| format!("{a:.3}")).unwrap_or_else(|| "NA".into()),
        m.fnr,
        m.fpr,
        m.balanced_accuracy,
        result.groups.ranges.fnr
    );
    Ok(())
}

fn mitigate(cli: &Cli, args: &MitigateArgs) -> Result<()> {
    let cfg = run_config(cli)?;
    let mut settings = cfg.mitigation.clone().unwrap_or_default();
    if let Some(eps) = args.epsilon {
        settings.epsilon = eps;
    }
    if let Some(iters) = args.iters {
        settings.eg = EgParams {
            iterations: iters,
            ..settings.eg
        };
    }
    stage("config", settings.validate())?;
    let train = stage("mitigate", load_dataset(&args.train))?;
    let test = stage("mitigate", load_dataset(&args.test))?;
    let seeds = StageSeeds::derive(cfg.seed, args.sex, 0);
    let out = out_dir(&cfg)?.to_path_buf();

    let predictions = match args.method {
        Method::Eg => {
            let constraint = stage(
                "mitigate",
                FairnessConstraint::fnr_parity(settings.epsilon, &train.groups),
            )?;
            let learner = settings.eg_learner.clone().with_seed(seeds.learner);
            let eg = stage(
                "mitigate",
                fit_exponentiated_gradient(
                    &learner,
                    &train.features,
                    &train.labels,
                    &train.groups,
                    &constraint,
                    &settings.eg,
                ),
            )?;
            write_json(&out.join("eg_ensemble.json"), &eg)?;
            println!(
                "training FNR range {:.3} (epsilon {})",
                eg.training.fnr_range, settings.epsilon
            );
            let scores = stage("mitigate", predict_eg(&eg, &test.features))?;
            stage("mitigate", threshold_scores(&scores, settings.eg.decision_threshold))?
        }
        Method::Threshold => {
            let (fit_idx, cal_idx) = stage(
                "mitigate",
                stratified_split_indices(&train.labels, 1.0 - settings.calibration_fraction, seeds.calibration),
            )?;
            let fit_part = train.subset(&fit_idx);
            let cal_part = train.subset(&cal_idx);
            let base = stage(
                "mitigate",
                fit(
                    &cfg.learner.clone().with_seed(seeds.learner),
                    &fit_part.features,
                    &fit_part.labels,
                    None,
                ),
            )?;
            let cal_scores = stage("mitigate", predict_proba(&base, &cal_part.features))?;
            let policy = stage(
                "mitigate",
                fit_threshold_optimizer(&cal_scores, &cal_part.labels, &cal_part.groups, &settings.threshold),
            )?;
            write_json(&out.join("threshold_policy.json"), &policy)?;
            write_json(&out.join("threshold_base_model.json"), &base)?;
            let scores = stage("mitigate", predict_proba(&base, &test.features))?;
            let preds = stage("mitigate", predict_thresholded(&policy, &scores, &test.groups))?;
            println!(
                "target FNR {:.3}, {} rows used the fallback threshold",
                policy.target_fnr, preds.fallback_rows
            );
            preds.labels
        }
    };
    let table = stage(
        "mitigate",
        group_metric_table(&test.labels, &predictions, None, &test.groups),
    )?;
    let stem = match args.method {
        Method::Eg => "eg",
        Method::Threshold => "threshold",
    };
    write_json(&out.join(format!("mitigated_groups_{stem}.json")), &table)?;
    let provenance = Provenance::new(cfg.config_hash(), cfg.seed);
    std::fs::write(
        out.join(format!("mitigated_groups_{stem}.csv")),
        stage("mitigate", csv_table(&provenance, &GROUP_HEADER, &group_rows(&table)))?,
    )?;
    println!(
        "test ranges: FNR {:.3} FPR {:.3} balanced accuracy {:.3}",
        table.ranges.fnr, table.ranges.fpr, table.ranges.balanced_accuracy
    );
    Ok(())
}

fn report(cli: &Cli, args: &ReportArgs) -> Result<()> {
    let mut cfg = run_config(cli)?;
    if let Some(from) = &args.from {
        let text = std::fs::read_to_string(from).with_context(|| format!("reading {}", from.display()))?;
        let report = stage("report", RunReport::from_json(&text))?;
        let out = out_dir(&cfg)?;
        let written = stage(
            "report",
            emit_report(&report, out, &EmitOptions { svg: !args.no_plots }),
        )?;
        println!("wrote {} files to {}", written.len(), out.display());
        return Ok(());
    }
    apply_cohort(&mut cfg, &args.cohort);
    if let Some(sex) = args.sex {
        cfg.sex = sex;
    }
    cfg.learner = learner_config(&cfg, args.learner);
    if args.mitigate && cfg.mitigation.is_none() {
        cfg.mitigation = Some(MitigationSettings::default());
    }
    if args.no_plots {
        cfg.plots = false;
    }
    let report = run_pipeline(&cfg).map_err(|e| anyhow!(e))?;
    for s in &report.sexes {
        let m = &s.model.metrics;
        println!(
            "{} {}: AUC {} FNR {:.3} FPR {:.3} BA {:.3} (psi {})",
            s.sex.label(),
            s.model.learner.label(),
            m.auc.map(|a| format!("{a:.3}")).unwrap_or_else(|| "NA".into()),
            m.fnr,
            m.fpr,
            m.balanced_accuracy,
            s.psi
        );
    }
    println!("report written to {}", cfg.out_dir.display());
    Ok(())
}

fn repeat(cli: &Cli, args: &RepeatArgs) -> Result<()> {
    let mut cfg = run_config(cli)?;
    apply_cohort(&mut cfg, &args.cohort);
    if let Some(sex) = args.sex {
        cfg.sex = sex;
    }
    cfg.learner = learner_config(&cfg, args.learner);
    let k = args.k.unwrap_or(cfg.repeats);
    if k == 0 {
        bail!("--k must be at least 1");
    }
    let report = repeat_evaluate(&cfg, k, args.same_seed).map_err(|e| anyhow!(e))?;
    let out = out_dir(&cfg)?;
    stage("report", emit_repeat(&report, out))?;
    for s in &report.sexes {
        for m in &s.summary {
            let std = m.std.map(|v| format!("{v:.3}")).unwrap_or_else(|| "NA".into());
            println!("{} {}: {:.3} ± {}", s.sex.label(), m.metric, m.mean, std);
        }
    }
    Ok(())
}
