//! Feature scoring and selection on the training partition.
//!
//! Candidate stems are ranked by two scores: average TF.IDF over all
//! training documents (tf = relative in-document frequency, idf = natural
//! log of N over document frequency, absent documents contributing zero)
//! and the separation score |p_P - p_N| of per-class presence
//! probabilities. The default selector keeps the k smallest rank products;
//! a variant ranks by the product of the raw scores instead.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use crate::corpus::{Corpus, Label, StopWordList, TokenBag};
use crate::{Error, Result};

/// Per-feature scores and ranks computed during selection. Ranks are
/// 1-based competition ranks (ties share the smallest rank of the block).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureScore {
    pub feature: String,
    pub tfidf_avg: f64,
    pub separation: f64,
    pub rank_tfidf: u64,
    pub rank_sep: u64,
    pub rank_product: u64,
}

/// One selected feature as persisted in the feature-set file.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectedFeature {
    pub stem: String,
    pub tfidf_avg: f64,
    pub separation: f64,
    pub rank_product: u64,
}

/// Which product orders the final ranking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RankMethod {
    /// Product of the two ranks; smaller is better.
    #[default]
    RankProduct,
    /// Product of the raw scores; larger is better.
    ScoreProduct,
}

impl RankMethod {
    pub fn parse(s: &str) -> Result<RankMethod> {
        match s {
            "ranks" => Ok(RankMethod::RankProduct),
            "scores" => Ok(RankMethod::ScoreProduct),
            other => Err(Error::InvalidParameter(format!(
                "unknown rank method `{other}` (expected `ranks` or `scores`)"
            ))),
        }
    }
}

/// The ordered top-k feature set the classifier and baselines share.
#[derive(Debug, Clone)]
pub struct FeatureSet {
    entries: Vec<SelectedFeature>,
    k: usize,
    index: HashSet<String>,
}

impl FeatureSet {
    pub fn from_entries(entries: Vec<SelectedFeature>, k: usize) -> FeatureSet {
        let index = entries.iter().map(|e| e.stem.clone()).collect();
        FeatureSet { entries, k, index }
    }

    pub fn entries(&self) -> &[SelectedFeature] {
        &self.entries
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Membership is exact string match on stems.
    pub fn contains(&self, stem: &str) -> bool {
        self.index.contains(stem)
    }

    pub fn stems(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.stem.as_str())
    }

    /// Tab-separated export: `stem \t tfidf_avg \t separation \t rank_product`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = format!("# abcrm-features v1 k={}\n", self.k);
        for e in &self.entries {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                e.stem, e.tfidf_avg, e.separation, e.rank_product
            ));
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<FeatureSet> {
        let path = path.as_ref();
        let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut entries = Vec::new();
        let mut k = None;
        for (idx, line) in content.lines().enumerate() {
            let lineno = idx + 1;
            if line.is_empty() {
                continue;
            }
            if let Some(header) = line.strip_prefix('#') {
                for token in header.split_whitespace() {
                    if let Some(v) = token.strip_prefix("k=") {
                        k = v.parse::<usize>().ok();
                    }
                }
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 4 {
                return Err(Error::parse(path, lineno, "expected 4 tab-separated fields"));
            }
            entries.push(SelectedFeature {
                stem: fields[0].to_string(),
                tfidf_avg: fields[1]
                    .parse()
                    .map_err(|_| Error::parse(path, lineno, "bad tfidf value"))?,
                separation: fields[2]
                    .parse()
                    .map_err(|_| Error::parse(path, lineno, "bad separation value"))?,
                rank_product: fields[3]
                    .parse()
                    .map_err(|_| Error::parse(path, lineno, "bad rank product"))?,
            });
        }
        let k = k.unwrap_or(entries.len());
        Ok(FeatureSet::from_entries(entries, k))
    }
}

fn train_bags(train: &Corpus, stop: &StopWordList) -> Vec<(Label, TokenBag)> {
    train
        .train()
        .iter()
        .map(|d| (d.label, d.token_bag(stop)))
        .collect()
}

/// Mean TF.IDF of `f` over all training documents.
pub fn tfidf_avg(train: &Corpus, f: &str, stop: &StopWordList) -> Result<f64> {
    let bags = train_bags(train, stop);
    tfidf_avg_from_bags(&bags, f)
}

fn tfidf_avg_from_bags(bags: &[(Label, TokenBag)], f: &str) -> Result<f64> {
    let n_docs = bags.len() as f64;
    let df = bags.iter().filter(|(_, b)| b.contains(f)).count();
    if df == 0 {
        return Err(Error::MissingFeature(f.to_string()));
    }
    let idf = (n_docs / df as f64).ln();
    let sum: f64 = bags
        .iter()
        .map(|(_, bag)| match bag.counts.get(f) {
            Some(&count) => (f64::from(count) / bag.total() as f64) * idf,
            None => 0.0,
        })
        .sum();
    Ok(sum / n_docs)
}

/// Absolute difference of the per-class presence probabilities of `f`.
pub fn separation(train: &Corpus, f: &str, stop: &StopWordList) -> Result<f64> {
    let bags = train_bags(train, stop);
    separation_from_bags(&bags, f)
}

fn separation_from_bags(bags: &[(Label, TokenBag)], f: &str) -> Result<f64> {
    let rel: Vec<&TokenBag> = bags
        .iter()
        .filter(|(l, _)| *l == Label::Relevant)
        .map(|(_, b)| b)
        .collect();
    let irr: Vec<&TokenBag> = bags
        .iter()
        .filter(|(l, _)| *l == Label::Irrelevant)
        .map(|(_, b)| b)
        .collect();
    if rel.is_empty() {
        return Err(Error::EmptyClass("relevant"));
    }
    if irr.is_empty() {
        return Err(Error::EmptyClass("irrelevant"));
    }
    let p_pos = rel.iter().filter(|b| b.contains(f)).count() as f64 / rel.len() as f64;
    let p_neg = irr.iter().filter(|b| b.contains(f)).count() as f64 / irr.len() as f64;
    Ok((p_pos - p_neg).abs())
}

/// Score every stem of the training vocabulary. Output is sorted by stem.
pub fn score_features(train: &Corpus, stop: &StopWordList) -> Result<Vec<FeatureScore>> {
    let bags = train_bags(train, stop);
    let mut vocab: Vec<String> = {
        let mut set = HashSet::new();
        for (_, bag) in &bags {
            set.extend(bag.counts.keys().cloned());
        }
        set.into_iter().collect()
    };
    vocab.sort();
    if vocab.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    let mut scored: BTreeMap<String, (f64, f64)> = BTreeMap::new();
    for stem in &vocab {
        let t = tfidf_avg_from_bags(&bags, stem)?;
        let s = separation_from_bags(&bags, stem)?;
        scored.insert(stem.clone(), (t, s));
    }
    let tfidf_ranks = competition_ranks(&vocab, |stem| scored[stem].0);
    let sep_ranks = competition_ranks(&vocab, |stem| scored[stem].1);
    Ok(vocab
        .iter()
        .map(|stem| {
            let (t, s) = scored[stem];
            let rt = tfidf_ranks[stem.as_str()];
            let rs = sep_ranks[stem.as_str()];
            FeatureScore {
                feature: stem.clone(),
                tfidf_avg: t,
                separation: s,
                rank_tfidf: rt,
                rank_sep: rs,
                rank_product: rt * rs,
            }
        })
        .collect())
}

/// 1-based competition ranking, descending by score: a tied block shares
/// the smallest rank in the block.
fn competition_ranks<'a>(
    stems: &'a [String],
    score: impl Fn(&str) -> f64,
) -> BTreeMap<&'a str, u64> {
    let mut order: Vec<&str> = stems.iter().map(String::as_str).collect();
    order.sort_by(|a, b| score(b).total_cmp(&score(a)).then_with(|| a.cmp(b)));
    let mut ranks = BTreeMap::new();
    let mut rank = 0u64;
    let mut prev: Option<f64> = None;
    for (pos, stem) in order.iter().enumerate() {
        let s = score(stem);
        if prev != Some(s) {
            rank = pos as u64 + 1;
            prev = Some(s);
        }
        ranks.insert(*stem, rank);
    }
    ranks
}

/// Select the top-k features by the requested product. Rank-product ties
/// break lexicographically by stem; a k larger than the vocabulary returns
/// everything.
pub fn select_features(
    train: &Corpus,
    k: usize,
    method: RankMethod,
    stop: &StopWordList,
) -> Result<FeatureSet> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be positive".into()));
    }
    let mut scores = score_features(train, stop)?;
    match method {
        RankMethod::RankProduct => {
            scores.sort_by(|a, b| {
                a.rank_product
                    .cmp(&b.rank_product)
                    .then_with(|| a.feature.cmp(&b.feature))
            });
        }
        RankMethod::ScoreProduct => {
            scores.sort_by(|a, b| {
                let pa = a.tfidf_avg * a.separation;
                let pb = b.tfidf_avg * b.separation;
                pb.total_cmp(&pa).then_with(|| a.feature.cmp(&b.feature))
            });
        }
    }
    scores.truncate(k);
    let entries = scores
        .into_iter()
        .map(|s| SelectedFeature {
            stem: s.feature,
            tfidf_avg: s.tfidf_avg,
            separation: s.separation,
            rank_product: s.rank_product,
        })
        .collect();
    Ok(FeatureSet::from_entries(entries, k))
}
