//! Command-line front end: corpus synthesis, feature selection, single
//! runs, grid sweeps, the experiment matrix and report generation.
//!
//! Every stochastic command requires an explicit `--seed`; there is no
//! wall-clock default. A `--config <file>` option accepts the same keys as
//! a flat `key = value` file, with command-line flags taking precedence.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use abcrm::baselines::{nb_fit, nb_predict_stream};
use abcrm::corpus::{
    generate_synthetic, order_stream, ClassOrder, Corpus, StopWordList, StreamMode, StreamScope,
    SyntheticSpec,
};
use abcrm::dynamics::{process_stream, DynamicsConfig, ParameterSet};
use abcrm::features::{select_features, FeatureSet, RankMethod};
use abcrm::metrics::{evaluate, load_predictions, save_predictions, MetricReport, Prediction};
use abcrm::search::{
    compare_setups, flatten_results, read_results_log, run_experiment, summarize_top_k,
    write_results_log, GridSpec, IntRange, RunRecord, RunResult, SweepOptions,
};
use abcrm::seed::derive_seed;

#[derive(Parser)]
#[command(name = "abcrm", version, about = "Cross-regulation document classifier and experiment harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus file.
    Synth(SynthArgs),
    /// Score and select features from a corpus' training partition.
    Features(FeaturesArgs),
    /// Run the classifier (and optionally the baseline) on one corpus.
    Run(RunArgs),
    /// Sweep a parameter grid for one experimental setup.
    Grid(GridArgs),
    /// Run several experimental setups and compare them pairwise.
    Experiment(ExperimentArgs),
    /// Summarize existing results logs.
    Report(ReportArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Output corpus path.
    #[arg(long)]
    out: PathBuf,
    /// Master seed (required on all stochastic paths).
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 40)]
    rel_vocab: usize,
    #[arg(long, default_value_t = 40)]
    irr_vocab: usize,
    #[arg(long, default_value_t = 20)]
    shared_vocab: usize,
    #[arg(long, default_value_t = 30)]
    train_rel: usize,
    #[arg(long, default_value_t = 30)]
    train_irr: usize,
    #[arg(long, default_value_t = 30)]
    test_rel: usize,
    #[arg(long, default_value_t = 30)]
    test_irr: usize,
    #[arg(long, default_value_t = 8)]
    doc_len_min: usize,
    #[arg(long, default_value_t = 16)]
    doc_len_max: usize,
    #[arg(long, default_value_t = 0.2)]
    shared_weight: f64,
    /// Per-document probability of swapping a class word for a fresh one,
    /// growing linearly with the document index.
    #[arg(long, default_value_t = 0.0)]
    drift: f64,
    /// interleave | alternate | relevant-first | irrelevant-first
    #[arg(long, default_value = "interleave")]
    class_order: String,
}

#[derive(Args)]
struct FeaturesArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Output feature-set path.
    #[arg(long)]
    out: PathBuf,
    /// Number of features to keep.
    #[arg(long, default_value_t = 650, value_parser = clap::value_parser!(u64).range(1..))]
    k: u64,
    /// ranks | scores
    #[arg(long, default_value = "ranks")]
    rank_method: String,
    /// Optional stop-word file, one word per line (defaults to the pinned
    /// 32-word list).
    #[arg(long)]
    stop_words: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct ParamArgs {
    #[arg(long, default_value_t = 2)]
    e0: u32,
    #[arg(long, default_value_t = 11)]
    r0_plus: u32,
    #[arg(long, default_value_t = 10)]
    r0_minus: u32,
    #[arg(long, default_value_t = 0.2)]
    d_e: f64,
    #[arg(long, default_value_t = 0.3)]
    d_r: f64,
    #[arg(long, default_value_t = 18)]
    n_a: u32,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Feature-set file; computed from the training partition when absent.
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long, default_value_t = 650, value_parser = clap::value_parser!(u64).range(1..))]
    k: u64,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
    #[command(flatten)]
    params: ParamArgs,
    /// Disable the cull step.
    #[arg(long)]
    no_cell_death: bool,
    /// Positive-unlabeled training: irrelevant training labels are ignored.
    #[arg(long)]
    pu: bool,
    /// Additive re-seeding on every feature occurrence.
    #[arg(long)]
    incremental_bias: bool,
    /// ordered | shuffled-train | shuffled-test | shuffled-both
    #[arg(long, default_value = "ordered")]
    order: String,
    /// Also fit and evaluate the naive Bayes baseline on the same features.
    #[arg(long)]
    with_nb: bool,
    /// Laplace smoothing constant for the baseline.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Third-party prediction files to include in the comparison table.
    #[arg(long)]
    import_predictions: Vec<PathBuf>,
    /// Write a pool checkpoint after the stream completes.
    #[arg(long)]
    save_pool: Option<PathBuf>,
    #[arg(long)]
    stop_words: Option<PathBuf>,
}

#[derive(Args)]
struct GridRangeArgs {
    /// Range `min:max:step` or a single value.
    #[arg(long, default_value = "1:7:1")]
    e0_range: String,
    #[arg(long, default_value = "3:12:1")]
    r0_minus_range: String,
    #[arg(long, default_value = "3:12:1")]
    r0_plus_range: String,
    #[arg(long, default_value = "0.0:0.4:0.1")]
    d_e_range: String,
    #[arg(long, default_value = "0.0:0.4:0.1")]
    d_r_range: String,
    #[arg(long, default_value = "2:22:2")]
    n_a_range: String,
}

impl GridRangeArgs {
    fn to_spec(&self) -> Result<GridSpec> {
        Ok(GridSpec {
            e0: IntRange::parse(&self.e0_range)?,
            r0_minus: IntRange::parse(&self.r0_minus_range)?,
            r0_plus: IntRange::parse(&self.r0_plus_range)?,
            d_e_millis: IntRange::parse_millis(&self.d_e_range)?,
            d_r_millis: IntRange::parse_millis(&self.d_r_range)?,
            n_a: IntRange::parse(&self.n_a_range)?,
        })
    }
}

#[derive(Args)]
struct GridArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long, default_value_t = 650, value_parser = clap::value_parser!(u64).range(1..))]
    k: u64,
    #[arg(long)]
    seed: u64,
    /// Experimental setup id (1.1, 1.2, 2.1, 2.2, 3.1-3.4, 4.1, 4.2).
    #[arg(long, default_value = "1.1")]
    setup: String,
    /// Canonical results file; `<out>.log` is the append-only working log
    /// the sweep resumes from.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    ranges: GridRangeArgs,
    /// Worker pool width (0 = default).
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[arg(long, default_value_t = 64)]
    checkpoint_every: usize,
    #[arg(long, default_value_t = 50)]
    top: usize,
    #[arg(long)]
    stop_words: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long, default_value_t = 650, value_parser = clap::value_parser!(u64).range(1..))]
    k: u64,
    #[arg(long)]
    seed: u64,
    /// Comma-separated setup ids.
    #[arg(long, value_delimiter = ',')]
    setups: Vec<String>,
    #[arg(long)]
    out_dir: PathBuf,
    #[command(flatten)]
    ranges: GridRangeArgs,
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[arg(long, default_value_t = 64)]
    checkpoint_every: usize,
    #[arg(long, default_value_t = 50)]
    top: usize,
    #[arg(long)]
    stop_words: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Results logs to summarize (repeatable).
    #[arg(long, required = true)]
    results: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 50)]
    top: usize,
}

fn main() {
    let args = expand_config_args(std::env::args().collect());
    let cli = Cli::parse_from(args);
    let outcome = match cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Features(a) => cmd_features(a),
        Command::Run(a) => cmd_run(a),
        Command::Grid(a) => cmd_grid(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::Report(a) => cmd_report(a),
    };
    if let Err(err) = outcome {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

/// Expand `--config <file>` into flags the command line does not already
/// carry. The file holds `key = value` lines; `#` starts a comment; a value
/// of `true` turns the key into a bare flag and `false` drops it.
fn expand_config_args(mut args: Vec<String>) -> Vec<String> {
    let mut config_path = None;
    let mut i = 0;
    while i < args.len() {
        if args[i] == "--config" && i + 1 < args.len() {
            config_path = Some(PathBuf::from(args[i + 1].clone()));
            args.drain(i..=i + 1);
            continue;
        }
        if let Some(v) = args[i].strip_prefix("--config=") {
            config_path = Some(PathBuf::from(v));
            args.remove(i);
            continue;
        }
        i += 1;
    }
    let Some(path) = config_path else {
        return args;
    };
    let Ok(content) = fs::read_to_string(&path) else {
        eprintln!("error: cannot read config file {}", path.display());
        std::process::exit(1);
    };
    for line in content.lines() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            eprintln!("error: bad config line `{line}` (expected key = value)");
            std::process::exit(1);
        };
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        let flag = format!("--{key}");
        let already = args
            .iter()
            .any(|a| *a == flag || a.starts_with(&format!("{flag}=")));
        if already {
            continue;
        }
        match value {
            "true" => args.push(flag),
            "false" => {}
            v => {
                args.push(flag);
                args.push(v.to_string());
            }
        }
    }
    args
}

fn load_stop_words(path: &Option<PathBuf>) -> Result<StopWordList> {
    match path {
        None => Ok(StopWordList::default()),
        Some(p) => {
            let content = fs::read_to_string(p)
                .with_context(|| format!("reading stop words from {}", p.display()))?;
            Ok(StopWordList::new(
                content
                    .lines()
                    .map(str::trim)
                    .filter(|l| !l.is_empty() && !l.starts_with('#'))
                    .map(|l| l.to_lowercase()),
            ))
        }
    }
}

fn obtain_features(
    corpus: &Corpus,
    path: &Option<PathBuf>,
    k: u64,
    stop: &StopWordList,
    save_to: Option<&Path>,
) -> Result<FeatureSet> {
    match path {
        Some(p) => FeatureSet::load(p).context("loading feature set"),
        None => {
            let fs = select_features(corpus, k as usize, RankMethod::RankProduct, stop)
                .context("selecting features")?;
            if let Some(dest) = save_to {
                fs.save(dest).context("saving selected features")?;
            }
            Ok(fs)
        }
    }
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    let spec = SyntheticSpec {
        relevant_vocab: a.rel_vocab,
        irrelevant_vocab: a.irr_vocab,
        shared_vocab: a.shared_vocab,
        train_relevant: a.train_rel,
        train_irrelevant: a.train_irr,
        test_relevant: a.test_rel,
        test_irrelevant: a.test_irr,
        doc_len: (a.doc_len_min, a.doc_len_max),
        shared_weight: a.shared_weight,
        drift_per_doc: a.drift,
        class_order: ClassOrder::parse(&a.class_order)?,
    };
    let corpus = generate_synthetic(&spec, derive_seed(a.seed, "synth"))?;
    corpus.save(&a.out)?;
    println!(
        "wrote {} documents ({} train, {} test) to {}",
        corpus.len(),
        corpus.train_count(),
        corpus.test_count(),
        a.out.display()
    );
    Ok(())
}

fn cmd_features(a: FeaturesArgs) -> Result<()> {
    let stop = load_stop_words(&a.stop_words)?;
    let corpus = Corpus::load(&a.corpus)?;
    let method = RankMethod::parse(&a.rank_method)?;
    let fs = select_features(&corpus, a.k as usize, method, &stop)?;
    fs.save(&a.out)?;
    println!("wrote {} features to {}", fs.len(), a.out.display());
    Ok(())
}

fn parse_order(order: &str, seed: u64) -> Result<(StreamMode, StreamScope)> {
    let shuffle = StreamMode::Shuffled(derive_seed(seed, "shuffle|run0"));
    match order {
        "ordered" => Ok((StreamMode::ByTimestamp, StreamScope::Both)),
        "shuffled-train" => Ok((shuffle, StreamScope::TrainOnly)),
        "shuffled-test" => Ok((shuffle, StreamScope::TestOnly)),
        "shuffled-both" => Ok((shuffle, StreamScope::Both)),
        other => bail!("unknown order `{other}`"),
    }
}

fn cmd_run(a: RunArgs) -> Result<()> {
    let stop = load_stop_words(&a.stop_words)?;
    let corpus = Corpus::load(&a.corpus)?;
    fs::create_dir_all(&a.out_dir)
        .with_context(|| format!("creating {}", a.out_dir.display()))?;
    let features = obtain_features(
        &corpus,
        &a.features,
        a.k,
        &stop,
        Some(&a.out_dir.join("features.tsv")),
    )?;
    let params = ParameterSet::new(
        a.params.e0,
        a.params.r0_plus,
        a.params.r0_minus,
        a.params.d_e,
        a.params.d_r,
        a.params.n_a,
    )?;
    let config = DynamicsConfig {
        seed: derive_seed(a.seed, "dynamics"),
        cell_death: !a.no_cell_death,
        pu_training: a.pu,
        incremental_bias: a.incremental_bias,
    };
    let (mode, scope) = parse_order(&a.order, a.seed)?;
    let stream = order_stream(&corpus, mode, scope);

    let preds = process_stream(&stream, &features, &stop, params, config);
    save_predictions(&preds, a.out_dir.join("predictions_abcrm.tsv"))?;

    if let Some(pool_path) = &a.save_pool {
        // Re-run through the engine to capture the final pool state.
        let mut engine = abcrm::dynamics::Abcrm::new(params, config);
        for doc in &stream {
            engine.process_document(&doc.id, &doc.token_bag(&stop), doc.label, &features);
        }
        engine.save_checkpoint(pool_path)?;
    }

    let truth = corpus.test_truth();
    let mut comparison: Vec<(String, MetricReport)> = Vec::new();
    match &truth {
        Some(truth) => {
            let report = evaluate(&preds, truth)?;
            write_metrics(&a.out_dir.join("metrics_abcrm.txt"), &report)?;
            comparison.push(("abcrm".into(), report));
        }
        None => {
            println!("test partition is unlabeled: predictions written, metrics skipped");
        }
    }

    if a.with_nb {
        let labeled_train: Vec<_> = corpus.train().to_vec();
        let model = nb_fit(&labeled_train, &features, a.alpha, &stop)?;
        model.save(a.out_dir.join("nb_model.tsv"))?;
        let nb_preds = nb_predict_stream(&model, &stream, &stop);
        save_predictions(&nb_preds, a.out_dir.join("predictions_nb.tsv"))?;
        if let Some(truth) = &truth {
            let report = evaluate(&nb_preds, truth)?;
            write_metrics(&a.out_dir.join("metrics_nb.txt"), &report)?;
            comparison.push(("nb".into(), report));
        }
    }

    for import in &a.import_predictions {
        let imported: Vec<Prediction> = load_predictions(import)?;
        let name = import
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "imported".into());
        if let Some(truth) = &truth {
            let report = evaluate(&imported, truth)
                .with_context(|| format!("evaluating {}", import.display()))?;
            comparison.push((name, report));
        }
    }

    if !comparison.is_empty() {
        let mut table =
            String::from("# classifier\tprecision\trecall\tfscore\taccuracy\tauc\tmcc\n");
        for (name, m) in &comparison {
            table.push_str(&format!(
                "{name}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                m.precision, m.recall, m.fscore, m.accuracy, m.auc, m.mcc
            ));
        }
        fs::write(a.out_dir.join("comparison.tsv"), table)?;
        for (name, m) in &comparison {
            println!("{name}: {}", m.to_line());
        }
    }
    Ok(())
}

fn write_metrics(path: &Path, report: &MetricReport) -> Result<()> {
    fs::write(path, report.to_block()).with_context(|| format!("writing {}", path.display()))
}

fn cmd_grid(a: GridArgs) -> Result<()> {
    let stop = load_stop_words(&a.stop_words)?;
    let corpus = Corpus::load(&a.corpus)?;
    let features = obtain_features(&corpus, &a.features, a.k, &stop, None)?;
    let grid = a.ranges.to_spec()?;
    let log_path = a.out.with_extension("tsv.log");
    let existing = read_results_log(&log_path)?.len();
    if existing > 0 {
        println!("resuming: {existing} completed runs found in {}", log_path.display());
    }
    println!("grid cardinality: {}", grid.cardinality());
    let opts = SweepOptions {
        workers: a.workers,
        checkpoint_every: a.checkpoint_every,
        max_runs: None,
        log_path: Some(log_path),
    };
    let results = run_experiment(&a.setup, &corpus, &features, &stop, &grid, a.seed, &opts)?
        .expect("sweep completed");
    write_results_log(&flatten_results(&results), &a.out)?;
    let summary = summarize_top_k(&results, a.top)?;
    println!(
        "setup {}: top-{} mean F = {:.4} (sd {:.4}, 95% CI [{:.4}, {:.4}])",
        a.setup, summary.n, summary.mean, summary.std_dev, summary.ci95_low, summary.ci95_high
    );
    println!("wrote {}", a.out.display());
    Ok(())
}

fn cmd_experiment(a: ExperimentArgs) -> Result<()> {
    if a.setups.is_empty() {
        bail!("--setups must name at least one experimental setup");
    }
    let stop = load_stop_words(&a.stop_words)?;
    let corpus = Corpus::load(&a.corpus)?;
    fs::create_dir_all(&a.out_dir)
        .with_context(|| format!("creating {}", a.out_dir.display()))?;
    let features = obtain_features(
        &corpus,
        &a.features,
        a.k,
        &stop,
        Some(&a.out_dir.join("features.tsv")),
    )?;
    let grid = a.ranges.to_spec()?;

    let mut all: Vec<(String, Vec<RunResult>)> = Vec::new();
    for setup_id in &a.setups {
        let out = a.out_dir.join(format!("results_{setup_id}.tsv"));
        let opts = SweepOptions {
            workers: a.workers,
            checkpoint_every: a.checkpoint_every,
            max_runs: None,
            log_path: Some(out.with_extension("tsv.log")),
        };
        let results = run_experiment(setup_id, &corpus, &features, &stop, &grid, a.seed, &opts)?
            .expect("sweep completed");
        write_results_log(&flatten_results(&results), &out)?;
        println!("setup {setup_id}: {} grid points -> {}", results.len(), out.display());
        all.push((setup_id.clone(), results));
    }

    let mut summary = String::from("# setup\tn\tmean_f\tstd_dev\tci95_low\tci95_high\n");
    for (id, results) in &all {
        let s = summarize_top_k(results, a.top)?;
        summary.push_str(&format!(
            "{id}\t{}\t{}\t{}\t{}\t{}\n",
            s.n, s.mean, s.std_dev, s.ci95_low, s.ci95_high
        ));
    }
    fs::write(a.out_dir.join("summary.tsv"), &summary)?;

    let mut verdicts = String::from("# setup_a\tsetup_b\tt\tp\tverdict\n");
    for i in 0..all.len() {
        for j in i + 1..all.len() {
            let cmp = compare_setups(&all[i].1, &all[j].1, a.top)?;
            verdicts.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\n",
                all[i].0,
                all[j].0,
                cmp.t,
                cmp.p,
                cmp.verdict()
            ));
            println!(
                "{} vs {}: t = {:.3}, p = {:.3e} -> {}",
                all[i].0,
                all[j].0,
                cmp.t,
                cmp.p,
                cmp.verdict()
            );
        }
    }
    fs::write(a.out_dir.join("verdicts.tsv"), &verdicts)?;
    Ok(())
}

/// Group raw log records into per-point results. Without the original grid
/// the enumeration order is reconstructed lexicographically from the
/// parameter tuples.
fn group_records(records: Vec<RunRecord>) -> BTreeMap<String, Vec<RunResult>> {
    let mut by_setup: BTreeMap<String, BTreeMap<String, Vec<RunRecord>>> = BTreeMap::new();
    for rec in records {
        let p = rec.params;
        let key = format!(
            "{:03}|{:03}|{:03}|{:06.3}|{:06.3}|{:03}",
            p.e0, p.r0_minus, p.r0_plus, p.d_e, p.d_r, p.n_a
        );
        by_setup
            .entry(rec.setup.clone())
            .or_default()
            .entry(key)
            .or_default()
            .push(rec);
    }
    by_setup
        .into_iter()
        .map(|(setup, points)| {
            let results = points
                .into_values()
                .enumerate()
                .map(|(idx, mut runs)| {
                    runs.sort_by_key(|r| r.seed);
                    RunResult {
                        setup: setup.clone(),
                        params: runs[0].params,
                        enum_index: idx as u64,
                        runs,
                    }
                })
                .collect();
            (setup, results)
        })
        .collect()
}

fn cmd_report(a: ReportArgs) -> Result<()> {
    let mut records = Vec::new();
    for path in &a.results {
        records.extend(read_results_log(path)?);
    }
    if records.is_empty() {
        bail!("no result records found");
    }
    let grouped = group_records(records);
    let mut out = String::from("# setup\tn\tmean_f\tstd_dev\tci95_low\tci95_high\n");
    for (setup, results) in &grouped {
        let s = summarize_top_k(results, a.top)?;
        out.push_str(&format!(
            "{setup}\t{}\t{}\t{}\t{}\t{}\n",
            s.n, s.mean, s.std_dev, s.ci95_low, s.ci95_high
        ));
        println!(
            "{setup}: top-{} mean F = {:.4} (sd {:.4}, 95% CI [{:.4}, {:.4}])",
            s.n, s.mean, s.std_dev, s.ci95_low, s.ci95_high
        );
    }
    let setups: Vec<&String> = grouped.keys().collect();
    let mut verdicts = String::from("# setup_a\tsetup_b\tt\tp\tverdict\n");
    for i in 0..setups.len() {
        for j in i + 1..setups.len() {
            let cmp = compare_setups(&grouped[setups[i]], &grouped[setups[j]], a.top)?;
            verdicts.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\n",
                setups[i],
                setups[j],
                cmp.t,
                cmp.p,
                cmp.verdict()
            ));
        }
    }
    if setups.len() > 1 {
        out.push('\n');
        out.push_str(&verdicts);
    }
    fs::write(&a.out, out).with_context(|| format!("writing {}", a.out.display()))?;
    println!("wrote {}", a.out.display());
    Ok(())
}
