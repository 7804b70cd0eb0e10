//! Exhaustive grid search and the experiment harness.
//!
//! Grid points are independent jobs executed by a rayon worker pool. Every
//! completed run is appended to a results log keyed by (setup, parameters,
//! seed); sweeps resume from that log, skipping completed work, and the
//! final results file is rewritten in canonical enumeration order so
//! interrupted and uninterrupted sweeps produce identical bytes. Dynamics
//! seeds are derived from the parameter tuple and run index only, so setups
//! differing in flags are paired on identical randomness.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;

use crate::corpus::{order_stream, Corpus, StopWordList, StreamMode, StreamScope, TokenBag};
use crate::dynamics::{restrict_bag, Abcrm, DynamicsConfig, ParameterSet};
use crate::features::FeatureSet;
use crate::metrics::{evaluate, paired_ttest, MetricReport};
use crate::seed::derive_seed;
use crate::{Error, Result};

/// Shuffle replications per shuffled experimental setup.
pub const SHUFFLE_RUNS: usize = 8;

/// Inclusive integer range with a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IntRange {
    pub min: i64,
    pub max: i64,
    pub step: i64,
}

impl IntRange {
    pub fn new(min: i64, max: i64, step: i64) -> Result<IntRange> {
        if step <= 0 {
            return Err(Error::InvalidParameter(format!(
                "range step must be positive, got {step}"
            )));
        }
        if min > max {
            return Err(Error::InvalidParameter(format!(
                "range minimum {min} exceeds maximum {max}"
            )));
        }
        Ok(IntRange { min, max, step })
    }

    pub fn single(value: i64) -> IntRange {
        IntRange {
            min: value,
            max: value,
            step: 1,
        }
    }

    pub fn count(&self) -> u64 {
        ((self.max - self.min) / self.step) as u64 + 1
    }

    pub fn values(&self) -> impl Iterator<Item = i64> + '_ {
        (0..self.count()).map(move |i| self.min + i as i64 * self.step)
    }

    /// Parse `min:max:step` or a single value.
    pub fn parse(s: &str) -> Result<IntRange> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |p: &str| -> Result<i64> {
            p.parse()
                .map_err(|_| Error::InvalidParameter(format!("bad range component `{p}`")))
        };
        match parts.as_slice() {
            [v] => Ok(IntRange::single(num(v)?)),
            [min, max, step] => IntRange::new(num(min)?, num(max)?, num(step)?),
            _ => Err(Error::InvalidParameter(format!(
                "range `{s}` must be `value` or `min:max:step`"
            ))),
        }
    }

    /// Parse a fractional range into thousandths, e.g. `0.0:0.4:0.1`.
    pub fn parse_millis(s: &str) -> Result<IntRange> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |p: &str| -> Result<i64> {
            let v: f64 = p
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("bad range component `{p}`")))?;
            Ok((v * 1000.0).round() as i64)
        };
        match parts.as_slice() {
            [v] => Ok(IntRange::single(num(v)?)),
            [min, max, step] => IntRange::new(num(min)?, num(max)?, num(step)?),
            _ => Err(Error::InvalidParameter(format!(
                "range `{s}` must be `value` or `min:max:step`"
            ))),
        }
    }
}

/// Per-parameter ranges of a sweep. Death rates are held in thousandths so
/// enumeration stays exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    pub e0: IntRange,
    pub r0_minus: IntRange,
    pub r0_plus: IntRange,
    pub d_e_millis: IntRange,
    pub d_r_millis: IntRange,
    pub n_a: IntRange,
}

impl Default for GridSpec {
    /// The standard optimization ranges: 7 x 10 x 10 x 5 x 5 x 11 =
    /// 192,500 configurations.
    fn default() -> Self {
        GridSpec {
            e0: IntRange { min: 1, max: 7, step: 1 },
            r0_minus: IntRange { min: 3, max: 12, step: 1 },
            r0_plus: IntRange { min: 3, max: 12, step: 1 },
            d_e_millis: IntRange { min: 0, max: 400, step: 100 },
            d_r_millis: IntRange { min: 0, max: 400, step: 100 },
            n_a: IntRange { min: 2, max: 22, step: 2 },
        }
    }
}

impl GridSpec {
    pub fn cardinality(&self) -> u64 {
        self.e0.count()
            * self.r0_minus.count()
            * self.r0_plus.count()
            * self.d_e_millis.count()
            * self.d_r_millis.count()
            * self.n_a.count()
    }

    /// Collapse the death-rate axes to the single value 0, for no-death
    /// setups where those parameters are inert.
    pub fn without_death_axes(&self) -> GridSpec {
        GridSpec {
            d_e_millis: IntRange::single(0),
            d_r_millis: IntRange::single(0),
            ..*self
        }
    }
}

/// Lexicographic enumeration in field order (E0, R0-, R0+, dE, dR, nA).
pub fn enumerate_grid(spec: &GridSpec) -> impl Iterator<Item = ParameterSet> + '_ {
    spec.e0.values().flat_map(move |e0| {
        spec.r0_minus.values().flat_map(move |r0m| {
            spec.r0_plus.values().flat_map(move |r0p| {
                spec.d_e_millis.values().flat_map(move |de| {
                    spec.d_r_millis.values().flat_map(move |dr| {
                        spec.n_a.values().map(move |na| ParameterSet {
                            e0: e0 as u32,
                            r0_minus: r0m as u32,
                            r0_plus: r0p as u32,
                            d_e: de as f64 / 1000.0,
                            d_r: dr as f64 / 1000.0,
                            n_a: na as u32,
                        })
                    })
                })
            })
        })
    })
}

/// One experimental setup: flags plus stream ordering.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExperimentSetup {
    pub id: &'static str,
    pub cell_death: bool,
    pub pu_training: bool,
    pub incremental_bias: bool,
    pub shuffle_train: bool,
    pub shuffle_test: bool,
}

impl ExperimentSetup {
    pub fn runs(&self) -> usize {
        if self.shuffle_train || self.shuffle_test {
            SHUFFLE_RUNS
        } else {
            1
        }
    }
}

/// The closed experiment vocabulary. 1.x: cell death on/off; 2.x: positive
/// and unlabeled training; 3.x: the order/shuffle matrix; 4.x: incremental
/// initial bias. 1.1, 3.1 and 4.1 name the same configuration.
pub const SETUPS: [ExperimentSetup; 10] = [
    ExperimentSetup { id: "1.1", cell_death: true, pu_training: false, incremental_bias: false, shuffle_train: false, shuffle_test: false },
    ExperimentSetup { id: "1.2", cell_death: false, pu_training: false, incremental_bias: false, shuffle_train: false, shuffle_test: false },
    ExperimentSetup { id: "2.1", cell_death: true, pu_training: true, incremental_bias: false, shuffle_train: false, shuffle_test: false },
    ExperimentSetup { id: "2.2", cell_death: false, pu_training: true, incremental_bias: false, shuffle_train: false, shuffle_test: false },
    ExperimentSetup { id: "3.1", cell_death: true, pu_training: false, incremental_bias: false, shuffle_train: false, shuffle_test: false },
    ExperimentSetup { id: "3.2", cell_death: true, pu_training: false, incremental_bias: false, shuffle_train: false, shuffle_test: true },
    ExperimentSetup { id: "3.3", cell_death: true, pu_training: false, incremental_bias: false, shuffle_train: true, shuffle_test: true },
    ExperimentSetup { id: "3.4", cell_death: true, pu_training: false, incremental_bias: false, shuffle_train: true, shuffle_test: false },
    ExperimentSetup { id: "4.1", cell_death: true, pu_training: false, incremental_bias: false, shuffle_train: false, shuffle_test: false },
    ExperimentSetup { id: "4.2", cell_death: true, pu_training: false, incremental_bias: true, shuffle_train: false, shuffle_test: false },
];

pub fn setup(id: &str) -> Result<&'static ExperimentSetup> {
    SETUPS
        .iter()
        .find(|s| s.id == id)
        .ok_or_else(|| Error::UnknownSetup(id.to_string()))
}

/// One completed run: a results-log line.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub setup: String,
    pub params: ParameterSet,
    pub seed: u64,
    pub report: MetricReport,
}

/// All runs of one grid point under one setup (one per shuffle seed).
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub setup: String,
    pub params: ParameterSet,
    pub enum_index: u64,
    pub runs: Vec<RunRecord>,
}

impl RunResult {
    /// Central tendency over shuffle replications.
    pub fn mean_fscore(&self) -> f64 {
        self.runs.iter().map(|r| r.report.fscore).sum::<f64>() / self.runs.len() as f64
    }

    pub fn mean_report(&self) -> MetricReport {
        let n = self.runs.len() as f64;
        let mut sum = MetricReport {
            precision: 0.0,
            recall: 0.0,
            fscore: 0.0,
            accuracy: 0.0,
            auc: 0.0,
            mcc: 0.0,
        };
        for r in &self.runs {
            sum.precision += r.report.precision;
            sum.recall += r.report.recall;
            sum.fscore += r.report.fscore;
            sum.accuracy += r.report.accuracy;
            sum.auc += r.report.auc;
            sum.mcc += r.report.mcc;
        }
        MetricReport {
            precision: sum.precision / n,
            recall: sum.recall / n,
            fscore: sum.fscore / n,
            accuracy: sum.accuracy / n,
            auc: sum.auc / n,
            mcc: sum.mcc / n,
        }
    }
}

fn param_key(p: &ParameterSet) -> String {
    format!(
        "{}|{}|{}|{}|{}|{}",
        p.e0, p.r0_plus, p.r0_minus, p.d_e, p.d_r, p.n_a
    )
}

/// Seed for the dynamics of one run. Excludes the setup id on purpose:
/// setups differing only in flags then share randomness, which maximizes
/// the power of the paired comparison.
fn dynamics_seed(master: u64, params: &ParameterSet, run_index: usize) -> u64 {
    derive_seed(master, &format!("dyn|{}|run{run_index}", param_key(params)))
}

fn shuffle_seed(master: u64, run_index: usize) -> u64 {
    derive_seed(master, &format!("shuffle|run{run_index}"))
}

fn log_line(rec: &RunRecord) -> String {
    let p = &rec.params;
    let m = &rec.report;
    format!(
        "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
        rec.setup,
        p.e0,
        p.r0_plus,
        p.r0_minus,
        p.d_e,
        p.d_r,
        p.n_a,
        rec.seed,
        m.precision,
        m.recall,
        m.fscore,
        m.accuracy,
        m.auc,
        m.mcc
    )
}

fn parse_log_line(line: &str) -> Option<RunRecord> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 14 {
        return None;
    }
    Some(RunRecord {
        setup: fields[0].to_string(),
        params: ParameterSet {
            e0: fields[1].parse().ok()?,
            r0_plus: fields[2].parse().ok()?,
            r0_minus: fields[3].parse().ok()?,
            d_e: fields[4].parse().ok()?,
            d_r: fields[5].parse().ok()?,
            n_a: fields[6].parse().ok()?,
        },
        seed: fields[7].parse().ok()?,
        report: MetricReport {
            precision: fields[8].parse().ok()?,
            recall: fields[9].parse().ok()?,
            fscore: fields[10].parse().ok()?,
            accuracy: fields[11].parse().ok()?,
            auc: fields[12].parse().ok()?,
            mcc: fields[13].parse().ok()?,
        },
    })
}

pub const RESULTS_HEADER: &str =
    "# setup\tE0\tR0p\tR0m\tdE\tdR\tnA\tseed\tprecision\trecall\tfscore\taccuracy\tauc\tmcc";

/// Read a results log, skipping headers and any torn trailing line.
/// Duplicate (setup, params, seed) keys keep their first occurrence.
pub fn read_results_log(path: &Path) -> Result<Vec<RunRecord>> {
    let content = match fs::read_to_string(path) {
        Ok(c) => c,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(Error::io(path, e)),
    };
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for line in content.lines() {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rec) = parse_log_line(line) {
            let key = (rec.setup.clone(), param_key(&rec.params), rec.seed);
            if seen.insert(key) {
                records.push(rec);
            }
        }
    }
    Ok(records)
}

pub fn write_results_log(records: &[RunRecord], path: &Path) -> Result<()> {
    let mut out = String::from(RESULTS_HEADER);
    out.push('\n');
    for rec in records {
        out.push_str(&log_line(rec));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Execution knobs for a sweep.
#[derive(Debug, Clone)]
pub struct SweepOptions {
    /// Worker pool width; 0 means rayon's default.
    pub workers: usize,
    /// Flush the append-only log every this many completed runs.
    pub checkpoint_every: usize,
    /// Stop after this many newly executed runs (used to exercise
    /// kill/resume behavior).
    pub max_runs: Option<usize>,
    /// Append-only working log; enables resume.
    pub log_path: Option<PathBuf>,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            workers: 0,
            checkpoint_every: 64,
            max_runs: None,
            log_path: None,
        }
    }
}

/// Tokenized read-only view of a corpus, shared by all jobs of a sweep.
struct PreparedCorpus {
    corpus: Corpus,
    bags: HashMap<String, TokenBag>,
    truth: BTreeMap<String, bool>,
}

impl PreparedCorpus {
    fn new(corpus: &Corpus, features: &FeatureSet, stop: &StopWordList) -> Result<PreparedCorpus> {
        let truth = corpus.test_truth().ok_or_else(|| {
            Error::InvalidParameter(
                "experiments need ground-truth labels on the test partition".into(),
            )
        })?;
        let bags = corpus
            .documents()
            .iter()
            .map(|d| {
                let bag = d.token_bag(stop);
                let restricted = restrict_bag(&bag, features);
                let mut counts = std::collections::BTreeMap::new();
                for stem in restricted {
                    counts.insert(stem, 1);
                }
                (
                    d.id.clone(),
                    TokenBag {
                        doc_id: d.id.clone(),
                        counts,
                    },
                )
            })
            .collect();
        Ok(PreparedCorpus {
            corpus: corpus.clone(),
            bags,
            truth,
        })
    }
}

fn execute_run(
    prepared: &PreparedCorpus,
    setup_def: &ExperimentSetup,
    params: ParameterSet,
    master_seed: u64,
    run_index: usize,
) -> Result<RunRecord> {
    let stream = if setup_def.shuffle_train || setup_def.shuffle_test {
        let scope = match (setup_def.shuffle_train, setup_def.shuffle_test) {
            (true, true) => StreamScope::Both,
            (true, false) => StreamScope::TrainOnly,
            (false, true) => StreamScope::TestOnly,
            (false, false) => unreachable!(),
        };
        order_stream(
            &prepared.corpus,
            StreamMode::Shuffled(shuffle_seed(master_seed, run_index)),
            scope,
        )
    } else {
        order_stream(&prepared.corpus, StreamMode::ByTimestamp, StreamScope::Both)
    };
    let seed = dynamics_seed(master_seed, &params, run_index);
    let config = DynamicsConfig {
        seed,
        cell_death: setup_def.cell_death,
        pu_training: setup_def.pu_training,
        incremental_bias: setup_def.incremental_bias,
    };
    let mut engine = Abcrm::new(params, config);
    let mut preds = Vec::new();
    for doc in &stream {
        let features = prepared.bags[&doc.id].counts.keys().cloned().collect::<Vec<_>>();
        if let Some(p) = engine.process_restricted(&doc.id, &features, doc.label) {
            preds.push(p);
        }
    }
    let report = evaluate(&preds, &prepared.truth)?;
    Ok(RunRecord {
        setup: setup_def.id.to_string(),
        params,
        seed,
        report,
    })
}

/// Run one setup over a grid. Completed runs found in the log are not
/// re-executed; on full completion the canonical per-point grouping is
/// returned in enumeration order. A sweep cut short by `max_runs` returns
/// `Ok(None)`.
pub fn run_experiment(
    setup_id: &str,
    corpus: &Corpus,
    features: &FeatureSet,
    stop: &StopWordList,
    grid: &GridSpec,
    master_seed: u64,
    opts: &SweepOptions,
) -> Result<Option<Vec<RunResult>>> {
    let setup_def = setup(setup_id)?;
    let grid = if setup_def.cell_death {
        *grid
    } else {
        grid.without_death_axes()
    };
    let prepared = PreparedCorpus::new(corpus, features, stop)?;

    let points: Vec<ParameterSet> = enumerate_grid(&grid).collect();
    let mut jobs: Vec<(u64, ParameterSet, usize)> = Vec::new();
    for (idx, params) in points.iter().enumerate() {
        for run_index in 0..setup_def.runs() {
            jobs.push((idx as u64, *params, run_index));
        }
    }

    let mut done: HashMap<(String, u64), RunRecord> = HashMap::new();
    if let Some(log_path) = &opts.log_path {
        for rec in read_results_log(log_path)? {
            if rec.setup == setup_id {
                done.insert((param_key(&rec.params), rec.seed), rec);
            }
        }
    }

    let mut pending: Vec<&(u64, ParameterSet, usize)> = jobs
        .iter()
        .filter(|(_, params, run_index)| {
            let seed = dynamics_seed(master_seed, params, *run_index);
            !done.contains_key(&(param_key(params), seed))
        })
        .collect();
    let truncated = match opts.max_runs {
        Some(limit) if pending.len() > limit => {
            pending.truncate(limit);
            true
        }
        _ => false,
    };

    let writer = match &opts.log_path {
        Some(log_path) => {
            let needs_header = !log_path.exists();
            let file = fs::OpenOptions::new()
                .create(true)
                .append(true)
                .open(log_path)
                .map_err(|e| Error::io(log_path, e))?;
            let mut buf = std::io::BufWriter::new(file);
            if needs_header {
                writeln!(buf, "{RESULTS_HEADER}").map_err(|e| Error::io(log_path, e))?;
            }
            Some(Mutex::new((buf, 0usize)))
        }
        None => None,
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("worker pool: {e}")))?;
    let fresh: Vec<RunRecord> = pool.install(|| {
        pending
            .par_iter()
            .map(|(_, params, run_index)| {
                let rec = execute_run(&prepared, setup_def, *params, master_seed, *run_index)?;
                if let Some(writer) = &writer {
                    let mut guard = writer.lock().expect("log writer poisoned");
                    let line = log_line(&rec);
                    guard.0.write_all(line.as_bytes()).ok();
                    guard.0.write_all(b"\n").ok();
                    guard.1 += 1;
                    if guard.1 >= opts.checkpoint_every {
                        guard.0.flush().ok();
                        guard.1 = 0;
                    }
                }
                Ok(rec)
            })
            .collect::<Result<Vec<RunRecord>>>()
    })?;
    if let Some(writer) = &writer {
        writer.lock().expect("log writer poisoned").0.flush().ok();
    }
    if truncated {
        return Ok(None);
    }

    for rec in fresh {
        done.insert((param_key(&rec.params), rec.seed), rec);
    }
    let mut results = Vec::with_capacity(points.len());
    for (idx, params) in points.iter().enumerate() {
        let mut runs = Vec::with_capacity(setup_def.runs());
        for run_index in 0..setup_def.runs() {
            let seed = dynamics_seed(master_seed, params, run_index);
            let rec = done
                .get(&(param_key(params), seed))
                .cloned()
                .expect("all jobs completed");
            runs.push(rec);
        }
        results.push(RunResult {
            setup: setup_id.to_string(),
            params: *params,
            enum_index: idx as u64,
            runs,
        });
    }
    Ok(Some(results))
}

/// Flatten grouped results back to log records in canonical order.
pub fn flatten_results(results: &[RunResult]) -> Vec<RunRecord> {
    results.iter().flat_map(|r| r.runs.iter().cloned()).collect()
}

/// The k best grid points by mean F-score, ties broken by enumeration
/// order. Fewer than k results returns everything.
pub fn top_k(results: &[RunResult], k: usize) -> Vec<&RunResult> {
    let mut sorted: Vec<&RunResult> = results.iter().collect();
    sorted.sort_by(|a, b| {
        b.mean_fscore()
            .total_cmp(&a.mean_fscore())
            .then_with(|| a.enum_index.cmp(&b.enum_index))
    });
    sorted.truncate(k);
    sorted
}

/// Verdict of a paired top-k comparison of two setups.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SetupComparison {
    pub t: f64,
    pub p: f64,
    pub distinct: bool,
}

impl SetupComparison {
    pub fn verdict(&self) -> &'static str {
        if self.distinct {
            "distinct"
        } else {
            "indistinguishable"
        }
    }
}

/// Paired t-test of the top-k F-scores of two setups, paired by rank.
/// The verdict is "distinct" when p < 0.01.
pub fn compare_setups(a: &[RunResult], b: &[RunResult], k: usize) -> Result<SetupComparison> {
    let fa: Vec<f64> = top_k(a, k).iter().map(|r| r.mean_fscore()).collect();
    let fb: Vec<f64> = top_k(b, k).iter().map(|r| r.mean_fscore()).collect();
    let (t, p) = paired_ttest(&fa, &fb)?;
    Ok(SetupComparison {
        t,
        p,
        distinct: p < 0.01,
    })
}

/// Mean, standard deviation and 95% confidence interval of the top-k
/// F-scores of one setup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SetupSummary {
    pub n: usize,
    pub mean: f64,
    pub std_dev: f64,
    pub ci95_low: f64,
    pub ci95_high: f64,
}

pub fn summarize_top_k(results: &[RunResult], k: usize) -> Result<SetupSummary> {
    let scores: Vec<f64> = top_k(results, k).iter().map(|r| r.mean_fscore()).collect();
    let n = scores.len();
    if n < 2 {
        return Err(Error::InvalidParameter(
            "summary needs at least two results".into(),
        ));
    }
    let mean = scores.iter().sum::<f64>() / n as f64;
    let var = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    let std_dev = var.sqrt();
    let margin = crate::metrics::t_critical(n as u64 - 1, 0.05)? * std_dev / (n as f64).sqrt();
    Ok(SetupSummary {
        n,
        mean,
        std_dev,
        ci95_low: mean - margin,
        ci95_high: mean + margin,
    })
}
