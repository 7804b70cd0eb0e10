//! Confusion-matrix metrics, interpolated precision-recall AUC, Matthews
//! correlation coefficient, and the paired Student's t-test used for
//! robustness comparisons. All 0/0 ratios are defined as 0.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::{Error, Result};

/// One classifier verdict for a document. `relevant` is the binary label;
/// `score` is the signed margin used for curve ranking.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub doc_id: String,
    pub relevant: bool,
    pub score: f64,
}

/// Standard 2x2 cross-tabulation with the relevant class as positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    pub tpc: u64,
    pub fpc: u64,
    pub tnc: u64,
    pub fnc: u64,
}

impl Confusion {
    pub fn total(&self) -> u64 {
        self.tpc + self.fpc + self.tnc + self.fnc
    }
}

/// Threshold metrics of a confusion matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasicMetrics {
    pub precision: f64,
    pub recall: f64,
    pub fscore: f64,
    pub accuracy: f64,
    pub mcc: f64,
}

/// The full evaluation record emitted for a prediction set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub precision: f64,
    pub recall: f64,
    pub fscore: f64,
    pub accuracy: f64,
    pub auc: f64,
    pub mcc: f64,
}

impl MetricReport {
    /// Flat key=value block, one metric per line.
    pub fn to_block(&self) -> String {
        format!(
            "precision={}\nrecall={}\nfscore={}\naccuracy={}\nauc={}\nmcc={}\n",
            self.precision, self.recall, self.fscore, self.accuracy, self.auc, self.mcc
        )
    }

    /// Machine-readable single-line record.
    pub fn to_line(&self) -> String {
        format!(
            "precision={} recall={} fscore={} accuracy={} auc={} mcc={}",
            self.precision, self.recall, self.fscore, self.accuracy, self.auc, self.mcc
        )
    }
}

fn check_alignment(preds: &[Prediction], truth: &BTreeMap<String, bool>) -> Result<()> {
    let mut seen = HashSet::new();
    for p in preds {
        if !seen.insert(p.doc_id.as_str()) {
            return Err(Error::IdMismatch(format!("duplicate prediction for `{}`", p.doc_id)));
        }
        if !truth.contains_key(&p.doc_id) {
            return Err(Error::IdMismatch(format!("no truth for `{}`", p.doc_id)));
        }
    }
    if seen.len() != truth.len() {
        let missing = truth
            .keys()
            .find(|id| !seen.contains(id.as_str()))
            .cloned()
            .unwrap_or_default();
        return Err(Error::IdMismatch(format!("no prediction for `{missing}`")));
    }
    Ok(())
}

/// Cross-tabulate predictions against ground truth.
pub fn confusion(preds: &[Prediction], truth: &BTreeMap<String, bool>) -> Result<Confusion> {
    check_alignment(preds, truth)?;
    let mut c = Confusion::default();
    for p in preds {
        match (p.relevant, truth[&p.doc_id]) {
            (true, true) => c.tpc += 1,
            (true, false) => c.fpc += 1,
            (false, false) => c.tnc += 1,
            (false, true) => c.fnc += 1,
        }
    }
    Ok(c)
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Precision, recall, F-score, accuracy and MCC from a confusion matrix.
pub fn basic_metrics(c: &Confusion) -> BasicMetrics {
    let (tp, fp, tn, fnc) = (c.tpc as f64, c.fpc as f64, c.tnc as f64, c.fnc as f64);
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fnc);
    let fscore = ratio(2.0 * precision * recall, precision + recall);
    let accuracy = ratio(tp + tn, tp + fp + tn + fnc);
    let mcc_den = ((tp + fp) * (tp + fnc) * (tn + fp) * (tn + fnc)).sqrt();
    let mcc = ratio(tp * tn - fp * fnc, mcc_den);
    BasicMetrics {
        precision,
        recall,
        fscore,
        accuracy,
        mcc,
    }
}

/// Area under the interpolated precision-recall curve.
///
/// Predictions are sorted by descending score with equal scores processed
/// as a single block. Precision at recall r is interpolated to the maximum
/// precision at any recall >= r, and the staircase is integrated as a step
/// sum over recall, anchored at recall 0.
pub fn pr_auc(preds: &[Prediction], truth: &BTreeMap<String, bool>) -> Result<f64> {
    check_alignment(preds, truth)?;
    let positives = truth.values().filter(|&&v| v).count() as f64;
    if positives == 0.0 {
        return Err(Error::NoPositives);
    }
    let mut order: Vec<&Prediction> = preds.iter().collect();
    order.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.doc_id.cmp(&b.doc_id)));

    // One (recall, precision) point per tie block.
    let mut points: Vec<(f64, f64)> = Vec::new();
    let mut tp = 0.0;
    let mut retrieved = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && order[j].score == order[i].score {
            if truth[&order[j].doc_id] {
                tp += 1.0;
            }
            retrieved += 1.0;
            j += 1;
        }
        points.push((tp / positives, tp / retrieved));
        i = j;
    }

    // Interpolate from the right: max precision at recall >= r.
    let mut best = 0.0;
    let mut interpolated: Vec<(f64, f64)> = points
        .iter()
        .rev()
        .map(|&(r, p)| {
            best = f64::max(best, p);
            (r, best)
        })
        .collect();
    interpolated.reverse();

    let mut auc = 0.0;
    let mut prev_recall = 0.0;
    for (r, p) in interpolated {
        if r > prev_recall {
            auc += (r - prev_recall) * p;
            prev_recall = r;
        }
    }
    Ok(auc)
}

/// Paired Student's t-test on two equally long samples, paired by index.
/// Returns the t statistic and the two-tailed p-value. Zero-variance
/// differences report p = 0 for a nonzero mean and p = 1 otherwise.
pub fn paired_ttest(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    if a.len() != b.len() {
        return Err(Error::InvalidParameter(format!(
            "paired samples differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::InvalidParameter(
            "paired t-test needs at least two pairs".into(),
        ));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    if var == 0.0 {
        return Ok(if mean == 0.0 {
            (0.0, 1.0)
        } else {
            (f64::INFINITY.copysign(mean), 0.0)
        });
    }
    let t = mean / (var / n as f64).sqrt();
    let dist = StudentsT::new(0.0, 1.0, n as f64 - 1.0)
        .map_err(|e| Error::InvalidParameter(format!("t distribution: {e}")))?;
    let p = 2.0 * dist.sf(t.abs());
    Ok((t, p))
}

/// Two-tailed critical value of Student's t at significance `alpha`.
pub fn t_critical(df: u64, alpha: f64) -> Result<f64> {
    let dist = StudentsT::new(0.0, 1.0, df as f64)
        .map_err(|e| Error::InvalidParameter(format!("t distribution: {e}")))?;
    Ok(dist.inverse_cdf(1.0 - alpha / 2.0))
}

/// Threshold metrics plus ranking AUC for a scored prediction set.
pub fn evaluate(preds: &[Prediction], truth: &BTreeMap<String, bool>) -> Result<MetricReport> {
    let c = confusion(preds, truth)?;
    let basic = basic_metrics(&c);
    let auc = pr_auc(preds, truth)?;
    Ok(MetricReport {
        precision: basic.precision,
        recall: basic.recall,
        fscore: basic.fscore,
        accuracy: basic.accuracy,
        auc,
        mcc: basic.mcc,
    })
}

/// Write predictions as `doc_id \t label(R|I) \t score`.
pub fn save_predictions(preds: &[Prediction], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for p in preds {
        out.push_str(&format!(
            "{}\t{}\t{}\n",
            p.doc_id,
            if p.relevant { 'R' } else { 'I' },
            p.score
        ));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn load_predictions(path: impl AsRef<Path>) -> Result<Vec<Prediction>> {
    let path = path.as_ref();
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut preds = Vec::new();
    for (idx, line) in content.lines().enumerate() {
        let lineno = idx + 1;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::parse(path, lineno, "expected 3 tab-separated fields"));
        }
        let relevant = match fields[1] {
            "R" => true,
            "I" => false,
            other => return Err(Error::parse(path, lineno, format!("bad label `{other}`"))),
        };
        preds.push(Prediction {
            doc_id: fields[0].to_string(),
            relevant,
            score: fields[2]
                .parse()
                .map_err(|_| Error::parse(path, lineno, "bad score"))?,
        });
    }
    Ok(preds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn truth_of(pairs: &[(&str, bool)]) -> BTreeMap<String, bool> {
        pairs.iter().map(|(id, v)| (id.to_string(), *v)).collect()
    }

    fn pred(id: &str, relevant: bool, score: f64) -> Prediction {
        Prediction {
            doc_id: id.to_string(),
            relevant,
            score,
        }
    }

    #[test]
    fn confusion_perfect_and_inverted() {
        let truth = truth_of(&[("a", true), ("b", true), ("c", false), ("d", false)]);
        let perfect = vec![
            pred("a", true, 1.0),
            pred("b", true, 1.0),
            pred("c", false, -1.0),
            pred("d", false, -1.0),
        ];
        let c = confusion(&perfect, &truth).unwrap();
        assert_eq!(c, Confusion { tpc: 2, fpc: 0, tnc: 2, fnc: 0 });

        let inverted: Vec<Prediction> = perfect
            .iter()
            .map(|p| pred(&p.doc_id, !p.relevant, -p.score))
            .collect();
        let c = confusion(&inverted, &truth).unwrap();
        assert_eq!(c, Confusion { tpc: 0, fpc: 2, tnc: 0, fnc: 2 });
    }

    #[test]
    fn confusion_all_relevant_predictor_on_skewed_classes() {
        // 63 positives, 532 negatives, everything predicted relevant.
        let mut truth = BTreeMap::new();
        let mut preds = Vec::new();
        for i in 0..63 {
            truth.insert(format!("p{i}"), true);
            preds.push(pred(&format!("p{i}"), true, 1.0));
        }
        for i in 0..532 {
            truth.insert(format!("n{i}"), false);
            preds.push(pred(&format!("n{i}"), true, 1.0));
        }
        let c = confusion(&preds, &truth).unwrap();
        assert_eq!((c.tpc, c.fpc), (63, 532));
    }

    #[test]
    fn confusion_rejects_misaligned_ids() {
        let truth = truth_of(&[("a", true)]);
        assert!(confusion(&[pred("b", true, 0.0)], &truth).is_err());
        assert!(confusion(&[], &truth).is_err());
        let dup = vec![pred("a", true, 0.0), pred("a", true, 0.0)];
        assert!(confusion(&dup, &truth).is_err());
    }

    #[test]
    fn basic_metrics_perfect_classifier() {
        let m = basic_metrics(&Confusion { tpc: 5, fpc: 0, tnc: 5, fnc: 0 });
        assert_abs_diff_eq!(m.precision, 1.0);
        assert_abs_diff_eq!(m.recall, 1.0);
        assert_abs_diff_eq!(m.fscore, 1.0);
        assert_abs_diff_eq!(m.accuracy, 1.0);
        assert_abs_diff_eq!(m.mcc, 1.0);
    }

    #[test]
    fn basic_metrics_constant_classifier_has_zero_mcc() {
        let m = basic_metrics(&Confusion { tpc: 5, fpc: 5, tnc: 0, fnc: 0 });
        assert_abs_diff_eq!(m.mcc, 0.0);
        assert_abs_diff_eq!(m.accuracy, 0.5);
    }

    #[test]
    fn basic_metrics_zero_over_zero_conventions() {
        let m = basic_metrics(&Confusion::default());
        assert_eq!(
            (m.precision, m.recall, m.fscore, m.accuracy, m.mcc),
            (0.0, 0.0, 0.0, 0.0, 0.0)
        );
    }

    #[test]
    fn fscore_is_harmonic_mean() {
        let c = Confusion { tpc: 41, fpc: 145, tnc: 387, fnc: 22 };
        let m = basic_metrics(&c);
        let expected = 2.0 * m.precision * m.recall / (m.precision + m.recall);
        assert_abs_diff_eq!(m.fscore, expected, epsilon = 1e-15);
    }

    #[test]
    fn mcc_symmetric_under_class_swap() {
        let c = Confusion { tpc: 7, fpc: 3, tnc: 11, fnc: 5 };
        let swapped = Confusion { tpc: c.tnc, fpc: c.fnc, tnc: c.tpc, fnc: c.fpc };
        assert_abs_diff_eq!(basic_metrics(&c).mcc, basic_metrics(&swapped).mcc, epsilon = 1e-15);
    }

    #[test]
    fn pr_auc_perfect_ranking() {
        let truth = truth_of(&[("a", true), ("b", true), ("c", false), ("d", false)]);
        let preds = vec![
            pred("a", true, 4.0),
            pred("b", true, 3.0),
            pred("c", false, 2.0),
            pred("d", false, 1.0),
        ];
        assert_abs_diff_eq!(pr_auc(&preds, &truth).unwrap(), 1.0);
    }

    #[test]
    fn pr_auc_anti_ranked_single_positive() {
        // One positive ranked last of four: the staircase has a single step
        // at recall 1 with precision 1/4.
        let truth = truth_of(&[("a", false), ("b", false), ("c", false), ("d", true)]);
        let preds = vec![
            pred("a", true, 4.0),
            pred("b", true, 3.0),
            pred("c", true, 2.0),
            pred("d", true, 1.0),
        ];
        assert_abs_diff_eq!(pr_auc(&preds, &truth).unwrap(), 0.25);
    }

    #[test]
    fn pr_auc_random_scores_approach_prevalence() {
        use rand::Rng;
        let mut rng = crate::seed::rng_from_seed(99);
        let n = 2000;
        let mut truth = BTreeMap::new();
        let mut preds = Vec::new();
        for i in 0..n {
            let positive = i % 2 == 0;
            truth.insert(format!("d{i}"), positive);
            preds.push(pred(&format!("d{i}"), positive, rng.random::<f64>()));
        }
        let auc = pr_auc(&preds, &truth).unwrap();
        assert!((auc - 0.5).abs() < 0.05, "auc = {auc}");
    }

    #[test]
    fn pr_auc_invariant_under_monotone_score_transform() {
        let truth = truth_of(&[("a", true), ("b", false), ("c", true), ("d", false)]);
        let preds = vec![
            pred("a", true, 0.9),
            pred("b", true, 0.5),
            pred("c", false, 0.4),
            pred("d", false, 0.1),
        ];
        let transformed: Vec<Prediction> = preds
            .iter()
            .map(|p| pred(&p.doc_id, p.relevant, p.score.exp() * 3.0 + 1.0))
            .collect();
        assert_abs_diff_eq!(
            pr_auc(&preds, &truth).unwrap(),
            pr_auc(&transformed, &truth).unwrap(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn pr_auc_requires_positives() {
        let truth = truth_of(&[("a", false)]);
        assert!(matches!(
            pr_auc(&[pred("a", false, 0.0)], &truth),
            Err(Error::NoPositives)
        ));
    }

    #[test]
    fn ttest_identical_samples() {
        let a = vec![0.5; 10];
        let (t, p) = paired_ttest(&a, &a).unwrap();
        assert_eq!(t, 0.0);
        assert_eq!(p, 1.0);
    }

    #[test]
    fn ttest_constant_nonzero_difference() {
        // Exactly representable offset so the differences carry zero
        // variance and the degenerate branch fires.
        let a: Vec<f64> = (0..10).map(|i| i as f64 + 0.25).collect();
        let b: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let (t, p) = paired_ttest(&a, &b).unwrap();
        assert!(t.is_infinite() && t > 0.0);
        assert_eq!(p, 0.0);
    }

    #[test]
    fn ttest_known_statistic() {
        // 25 pairs at +1 and 25 at -1 around a mean of mu give
        // t = 7 * mu exactly for n = 50 (sd of differences = sqrt(50/49)).
        let mu = 0.5057142857142857; // 3.54 / 7
        let mut a = Vec::new();
        let mut b = Vec::new();
        for i in 0..50 {
            let delta = if i % 2 == 0 { 1.0 } else { -1.0 };
            a.push(mu + delta);
            b.push(0.0);
        }
        let (t, p) = paired_ttest(&a, &b).unwrap();
        assert_abs_diff_eq!(t, 3.54, epsilon = 1e-12);
        assert!(p < 0.005, "p = {p}");
    }

    #[test]
    fn t_critical_matches_published_table() {
        // t(49) two-tailed at alpha = 0.01.
        let crit = t_critical(49, 0.01).unwrap();
        assert_abs_diff_eq!(crit, 2.68, epsilon = 0.005);
    }

    #[test]
    fn metrics_invariant_under_prediction_permutation() {
        let truth = truth_of(&[("a", true), ("b", false), ("c", true), ("d", false)]);
        let preds = vec![
            pred("a", true, 0.7),
            pred("b", false, -0.2),
            pred("c", false, -0.4),
            pred("d", true, 0.1),
        ];
        let mut shuffled = preds.clone();
        shuffled.reverse();
        assert_eq!(
            evaluate(&preds, &truth).unwrap(),
            evaluate(&shuffled, &truth).unwrap()
        );
    }

    #[test]
    fn predictions_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("preds.tsv");
        let preds = vec![pred("a", true, 0.125), pred("b", false, -3.5)];
        save_predictions(&preds, &path).unwrap();
        assert_eq!(load_predictions(&path).unwrap(), preds);
    }
}
