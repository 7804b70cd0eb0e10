//! Multinomial naive Bayes with boolean attributes, trained on the same
//! selected features as the cell-dynamics classifier. Conditionals are
//! presence probabilities with Laplace smoothing; absent feature-set
//! members contribute their complement terms, so the posterior is an exact
//! Bernoulli product over the feature set.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::corpus::{Document, Label, StopWordList, TokenBag};
use crate::features::FeatureSet;
use crate::metrics::Prediction;
use crate::{Error, Result};

/// A fitted model: class prior plus per-stem presence conditionals.
#[derive(Debug, Clone, PartialEq)]
pub struct NbModel {
    pub prior_rel: f64,
    pub alpha: f64,
    cond: BTreeMap<String, (f64, f64)>,
}

impl NbModel {
    /// (p(f present | relevant), p(f present | irrelevant)) for a stem.
    pub fn conditional(&self, stem: &str) -> Option<(f64, f64)> {
        self.cond.get(stem).copied()
    }

    pub fn features(&self) -> impl Iterator<Item = &str> {
        self.cond.keys().map(String::as_str)
    }

    /// Export as `stem \t p_rel \t p_irr` under a header carrying the prior
    /// and smoothing constant.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = format!(
            "# abcrm-nb v1 prior_rel={} alpha={}\n",
            self.prior_rel, self.alpha
        );
        for (stem, (p_rel, p_irr)) in &self.cond {
            out.push_str(&format!("{stem}\t{p_rel}\t{p_irr}\n"));
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<NbModel> {
        let path = path.as_ref();
        let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut prior_rel = None;
        let mut alpha = None;
        let mut cond = BTreeMap::new();
        for (idx, line) in content.lines().enumerate() {
            let lineno = idx + 1;
            if line.is_empty() {
                continue;
            }
            if let Some(header) = line.strip_prefix('#') {
                for token in header.split_whitespace() {
                    if let Some(v) = token.strip_prefix("prior_rel=") {
                        prior_rel = v.parse::<f64>().ok();
                    } else if let Some(v) = token.strip_prefix("alpha=") {
                        alpha = v.parse::<f64>().ok();
                    }
                }
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(Error::parse(path, lineno, "expected 3 tab-separated fields"));
            }
            let p_rel: f64 = fields[1]
                .parse()
                .map_err(|_| Error::parse(path, lineno, "bad p_rel"))?;
            let p_irr: f64 = fields[2]
                .parse()
                .map_err(|_| Error::parse(path, lineno, "bad p_irr"))?;
            cond.insert(fields[0].to_string(), (p_rel, p_irr));
        }
        let prior_rel =
            prior_rel.ok_or_else(|| Error::parse(path, 1, "missing prior_rel header"))?;
        let alpha = alpha.ok_or_else(|| Error::parse(path, 1, "missing alpha header"))?;
        Ok(NbModel {
            prior_rel,
            alpha,
            cond,
        })
    }
}

/// Fit on labeled training documents. Boolean attributes: only presence of
/// a stem in a document counts. `p(f|class) = (docs_with_f + alpha) /
/// (docs + 2 alpha)` keeps every probability strictly inside (0, 1).
pub fn nb_fit(
    train: &[Document],
    features: &FeatureSet,
    alpha: f64,
    stop: &StopWordList,
) -> Result<NbModel> {
    if alpha <= 0.0 {
        return Err(Error::InvalidParameter("alpha must be positive".into()));
    }
    let rel_bags: Vec<TokenBag> = train
        .iter()
        .filter(|d| d.label == Label::Relevant)
        .map(|d| d.token_bag(stop))
        .collect();
    let irr_bags: Vec<TokenBag> = train
        .iter()
        .filter(|d| d.label == Label::Irrelevant)
        .map(|d| d.token_bag(stop))
        .collect();
    if rel_bags.is_empty() {
        return Err(Error::EmptyClass("relevant"));
    }
    if irr_bags.is_empty() {
        return Err(Error::EmptyClass("irrelevant"));
    }
    let n_rel = rel_bags.len() as f64;
    let n_irr = irr_bags.len() as f64;
    let mut cond = BTreeMap::new();
    for stem in features.stems() {
        let c_rel = rel_bags.iter().filter(|b| b.contains(stem)).count() as f64;
        let c_irr = irr_bags.iter().filter(|b| b.contains(stem)).count() as f64;
        cond.insert(
            stem.to_string(),
            (
                (c_rel + alpha) / (n_rel + 2.0 * alpha),
                (c_irr + alpha) / (n_irr + 2.0 * alpha),
            ),
        );
    }
    Ok(NbModel {
        prior_rel: n_rel / (n_rel + n_irr),
        alpha,
        cond,
    })
}

/// Classify a token bag. The score is the log-posterior difference
/// (relevant minus irrelevant); ties go to relevant, matching the
/// cell-dynamics tie direction.
pub fn nb_predict(model: &NbModel, bag: &TokenBag) -> (bool, f64) {
    let mut lp_rel = model.prior_rel.ln();
    let mut lp_irr = (1.0 - model.prior_rel).ln();
    for (stem, &(p_rel, p_irr)) in &model.cond {
        if bag.contains(stem) {
            lp_rel += p_rel.ln();
            lp_irr += p_irr.ln();
        } else {
            lp_rel += (1.0 - p_rel).ln();
            lp_irr += (1.0 - p_irr).ln();
        }
    }
    let score = lp_rel - lp_irr;
    (score >= 0.0, score)
}

/// Predict every document of a stream's test partition (label `Unlabeled`).
pub fn nb_predict_stream(
    model: &NbModel,
    stream: &[Document],
    stop: &StopWordList,
) -> Vec<Prediction> {
    stream
        .iter()
        .filter(|d| d.label == Label::Unlabeled)
        .map(|d| {
            let (relevant, score) = nb_predict(model, &d.token_bag(stop));
            Prediction {
                doc_id: d.id.clone(),
                relevant,
                score,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize;
    use crate::features::{select_features, RankMethod};
    use approx::assert_abs_diff_eq;

    fn doc(id: &str, text: &str, label: Label) -> Document {
        Document {
            id: id.to_string(),
            text: text.to_string(),
            label,
            timestamp: 0,
        }
    }

    fn feature_set(stems: &[&str]) -> FeatureSet {
        use crate::features::SelectedFeature;
        let entries = stems
            .iter()
            .enumerate()
            .map(|(i, s)| SelectedFeature {
                stem: s.to_string(),
                tfidf_avg: 0.0,
                separation: 0.0,
                rank_product: i as u64 + 1,
            })
            .collect();
        FeatureSet::from_entries(entries, stems.len())
    }

    fn no_stop() -> StopWordList {
        StopWordList::empty()
    }

    #[test]
    fn laplace_arithmetic() {
        // f1 in 2 of 2 relevant docs, alpha = 1: p_rel = 3/4.
        let train = vec![
            doc("r1", "f1 x1", Label::Relevant),
            doc("r2", "f1 y1", Label::Relevant),
            doc("i1", "z1", Label::Irrelevant),
            doc("i2", "w1", Label::Irrelevant),
        ];
        let model = nb_fit(&train, &feature_set(&["f1"]), 1.0, &no_stop()).unwrap();
        let (p_rel, p_irr) = model.conditional("f1").unwrap();
        assert_abs_diff_eq!(p_rel, 0.75);
        assert_abs_diff_eq!(p_irr, 0.25);
    }

    #[test]
    fn absent_feature_gets_symmetric_smoothing() {
        let train = vec![
            doc("r1", "x1", Label::Relevant),
            doc("r2", "y1", Label::Relevant),
            doc("i1", "z1", Label::Irrelevant),
            doc("i2", "w1", Label::Irrelevant),
        ];
        let model = nb_fit(&train, &feature_set(&["ghost1"]), 1.0, &no_stop()).unwrap();
        let (p_rel, p_irr) = model.conditional("ghost1").unwrap();
        assert_abs_diff_eq!(p_rel, 0.25);
        assert_abs_diff_eq!(p_irr, 0.25);
    }

    #[test]
    fn balanced_prior() {
        let train: Vec<Document> = (0..30)
            .map(|i| doc(&format!("r{i}"), "a1", Label::Relevant))
            .chain((0..30).map(|i| doc(&format!("i{i}"), "b1", Label::Irrelevant)))
            .collect();
        let model = nb_fit(&train, &feature_set(&["a1", "b1"]), 1.0, &no_stop()).unwrap();
        assert_abs_diff_eq!(model.prior_rel, 0.5);
    }

    #[test]
    fn empty_class_errors() {
        let train = vec![doc("r1", "x1", Label::Relevant)];
        assert!(matches!(
            nb_fit(&train, &feature_set(&["x1"]), 1.0, &no_stop()),
            Err(Error::EmptyClass("irrelevant"))
        ));
    }

    #[test]
    fn tie_goes_to_relevant() {
        // Symmetric model, balanced prior, empty intersection: exact tie.
        let train = vec![
            doc("r1", "x1", Label::Relevant),
            doc("i1", "x1", Label::Irrelevant),
        ];
        let model = nb_fit(&train, &feature_set(&["x1"]), 1.0, &no_stop()).unwrap();
        let (label, score) = nb_predict(&model, &tokenize("", &no_stop()));
        assert_abs_diff_eq!(score, 0.0);
        assert!(label);
    }

    #[test]
    fn dominant_feature_wins() {
        let train = vec![
            doc("r1", "f1 x1", Label::Relevant),
            doc("r2", "f1 y1", Label::Relevant),
            doc("i1", "z1", Label::Irrelevant),
            doc("i2", "w1", Label::Irrelevant),
        ];
        let model = nb_fit(&train, &feature_set(&["f1"]), 1.0, &no_stop()).unwrap();
        let (label, score) = nb_predict(&model, &tokenize("f1", &no_stop()));
        assert!(label && score > 0.0);
    }

    /// Brute-force Bayes oracle: enumerate the explicit joint over boolean
    /// feature vectors and compare posteriors exactly.
    fn brute_force_posterior_diff(model: &NbModel, present: &[&str]) -> f64 {
        let p_rel: f64 = model
            .features()
            .map(|f| {
                let (pr, _) = model.conditional(f).unwrap();
                if present.contains(&f) {
                    pr
                } else {
                    1.0 - pr
                }
            })
            .product::<f64>()
            * model.prior_rel;
        let p_irr: f64 = model
            .features()
            .map(|f| {
                let (_, pi) = model.conditional(f).unwrap();
                if present.contains(&f) {
                    pi
                } else {
                    1.0 - pi
                }
            })
            .product::<f64>()
            * (1.0 - model.prior_rel);
        (p_rel / p_irr).ln()
    }

    #[test]
    fn matches_brute_force_bayes_on_three_features() {
        let train = vec![
            doc("r1", "a1 b1", Label::Relevant),
            doc("r2", "a1 c1", Label::Relevant),
            doc("r3", "b1", Label::Relevant),
            doc("i1", "c1", Label::Irrelevant),
            doc("i2", "c1 b1", Label::Irrelevant),
        ];
        let model = nb_fit(&train, &feature_set(&["a1", "b1", "c1"]), 1.0, &no_stop()).unwrap();
        let stems = ["a1", "b1", "c1"];
        for mask in 0u32..8 {
            let present: Vec<&str> = stems
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, s)| *s)
                .collect();
            let text = present.join(" ");
            let (label, score) = nb_predict(&model, &tokenize(&text, &no_stop()));
            let oracle = brute_force_posterior_diff(&model, &present);
            assert_abs_diff_eq!(score, oracle, epsilon = 1e-9);
            assert_eq!(label, oracle >= 0.0, "mask {mask}");
        }
    }

    #[test]
    fn adding_relevant_leaning_feature_never_decreases_score() {
        let train = vec![
            doc("r1", "f1 g1", Label::Relevant),
            doc("r2", "f1", Label::Relevant),
            doc("i1", "g1", Label::Irrelevant),
            doc("i2", "h1", Label::Irrelevant),
        ];
        let model = nb_fit(&train, &feature_set(&["f1", "g1", "h1"]), 1.0, &no_stop()).unwrap();
        let (_, without) = nb_predict(&model, &tokenize("g1", &no_stop()));
        let (_, with) = nb_predict(&model, &tokenize("g1 f1", &no_stop()));
        assert!(with >= without);
    }

    #[test]
    fn model_round_trip() {
        let train = vec![
            doc("r1", "a1 b1", Label::Relevant),
            doc("i1", "c1", Label::Irrelevant),
        ];
        let fs = select_features(
            &Corpus::new(train.clone(), 2).unwrap(),
            10,
            RankMethod::RankProduct,
            &no_stop(),
        )
        .unwrap();
        let model = nb_fit(&train, &fs, 1.0, &no_stop()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nb.tsv");
        model.save(&path).unwrap();
        assert_eq!(NbModel::load(&path).unwrap(), model);
    }

    use crate::corpus::Corpus;
}
