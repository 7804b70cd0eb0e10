//! Document ingestion, text normalization and stream ordering.
//!
//! A corpus is an ordered sequence of documents split into a training prefix
//! and a test suffix. Text is normalized into stemmed token multisets:
//! lowercase, split on non-alphanumeric runs, stop words removed, survivors
//! Porter-stemmed. A deterministic synthetic generator stands in for corpora
//! that cannot be redistributed.

mod stem;

pub use stem::porter_stem;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::seed::rng_from_seed;
use crate::{Error, Result};

/// Class label of a document. Test documents enter the cell dynamics as
/// `Unlabeled` even when ground truth is known for evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    Relevant,
    Irrelevant,
    Unlabeled,
}

impl Label {
    pub fn as_char(self) -> char {
        match self {
            Label::Relevant => 'R',
            Label::Irrelevant => 'I',
            Label::Unlabeled => 'U',
        }
    }

    pub fn parse(s: &str) -> Result<Label> {
        match s {
            "R" => Ok(Label::Relevant),
            "I" => Ok(Label::Irrelevant),
            "U" => Ok(Label::Unlabeled),
            other => Err(Error::UnknownLabel(other.to_string())),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

/// One text item with its label and timestamp.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub text: String,
    pub label: Label,
    pub timestamp: i64,
}

impl Document {
    pub fn token_bag(&self, stop: &StopWordList) -> TokenBag {
        let mut bag = tokenize(&self.text, stop);
        bag.doc_id = self.id.clone();
        bag
    }
}

/// A document rendered as a multiset of stemmed tokens.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenBag {
    pub doc_id: String,
    pub counts: BTreeMap<String, u32>,
}

impl TokenBag {
    /// Total token count including repeats.
    pub fn total(&self) -> u64 {
        self.counts.values().map(|&c| u64::from(c)).sum()
    }

    pub fn contains(&self, stem: &str) -> bool {
        self.counts.contains_key(stem)
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

/// The pinned default stop list: the 33 most frequent English words of the
/// standard frequency ranking, minus "with" (a term too valuable to drop in
/// interaction-centric corpora), leaving exactly 32 entries.
pub const DEFAULT_STOP_WORDS: [&str; 32] = [
    "the", "be", "to", "of", "and", "a", "in", "that", "have", "i", "it", "for", "not", "on",
    "he", "as", "you", "do", "at", "this", "but", "his", "by", "from", "they", "we", "say",
    "her", "she", "or", "an", "will",
];

/// Set of words removed before stemming.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StopWordList {
    words: BTreeSet<String>,
}

impl Default for StopWordList {
    fn default() -> Self {
        StopWordList::new(DEFAULT_STOP_WORDS.iter().map(|w| w.to_string()))
    }
}

impl StopWordList {
    pub fn new(words: impl IntoIterator<Item = String>) -> Self {
        StopWordList {
            words: words.into_iter().collect(),
        }
    }

    pub fn empty() -> Self {
        StopWordList {
            words: BTreeSet::new(),
        }
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Normalize raw text into a stemmed token multiset.
///
/// Tokens are lowercased and split on non-alphanumeric runs. Stop words are
/// removed before stemming; pure ASCII-alphabetic survivors are
/// Porter-stemmed while tokens containing digits or non-ASCII letters pass
/// through unchanged. A stem that itself collides with a stop word is also
/// dropped, so no stop word ever keys a bag.
pub fn tokenize(text: &str, stop: &StopWordList) -> TokenBag {
    let lowered = text.to_lowercase();
    let mut bag = TokenBag::default();
    for raw in lowered.split(|c: char| !c.is_alphanumeric()) {
        if raw.is_empty() || stop.contains(raw) {
            continue;
        }
        let token = if raw.bytes().all(|b| b.is_ascii_lowercase()) {
            porter_stem(raw)
        } else {
            raw.to_string()
        };
        if stop.contains(&token) {
            continue;
        }
        *bag.counts.entry(token).or_insert(0) += 1;
    }
    bag
}

/// An ordered document sequence with a train/test split: the first
/// `train_count` documents are the training partition.
#[derive(Debug, Clone)]
pub struct Corpus {
    documents: Vec<Document>,
    train_count: usize,
}

impl Corpus {
    pub fn new(documents: Vec<Document>, train_count: usize) -> Result<Corpus> {
        if train_count > documents.len() {
            return Err(Error::InvalidParameter(format!(
                "train partition ({train_count}) exceeds corpus size ({})",
                documents.len()
            )));
        }
        let mut seen = HashSet::new();
        for doc in &documents {
            if doc.id.is_empty() {
                return Err(Error::InvalidParameter("empty document id".into()));
            }
            if !seen.insert(doc.id.clone()) {
                return Err(Error::DuplicateId(doc.id.clone()));
            }
        }
        Ok(Corpus {
            documents,
            train_count,
        })
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn train(&self) -> &[Document] {
        &self.documents[..self.train_count]
    }

    pub fn test(&self) -> &[Document] {
        &self.documents[self.train_count..]
    }

    pub fn train_count(&self) -> usize {
        self.train_count
    }

    pub fn test_count(&self) -> usize {
        self.documents.len() - self.train_count
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    /// Ground-truth labels of the test partition, for evaluation. `None`
    /// when any test document is genuinely unlabeled.
    pub fn test_truth(&self) -> Option<BTreeMap<String, bool>> {
        let mut truth = BTreeMap::new();
        for doc in self.test() {
            match doc.label {
                Label::Relevant => truth.insert(doc.id.clone(), true),
                Label::Irrelevant => truth.insert(doc.id.clone(), false),
                Label::Unlabeled => return None,
            };
        }
        Some(truth)
    }

    /// Load a corpus from the tab-separated line format
    /// `id \t label \t timestamp \t text` with `\t`, `\n`, `\r` and `\\`
    /// escaped inside the text field. Lines starting with `#` are headers; a
    /// `train=N` key in a header declares the partition. Without one, the
    /// maximal trailing run of `U`-labeled documents forms the test
    /// partition.
    pub fn load(path: impl AsRef<Path>) -> Result<Corpus> {
        let path = path.as_ref();
        let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut documents = Vec::new();
        let mut declared_train: Option<usize> = None;
        let mut declared_test: Option<usize> = None;
        for (idx, line) in content.lines().enumerate() {
            let lineno = idx + 1;
            if line.is_empty() {
                continue;
            }
            if let Some(header) = line.strip_prefix('#') {
                for token in header.split_whitespace() {
                    if let Some(v) = token.strip_prefix("train=") {
                        declared_train = Some(v.parse().map_err(|_| {
                            Error::parse(path, lineno, format!("bad train count `{v}`"))
                        })?);
                    } else if let Some(v) = token.strip_prefix("test=") {
                        declared_test = Some(v.parse().map_err(|_| {
                            Error::parse(path, lineno, format!("bad test count `{v}`"))
                        })?);
                    }
                }
                continue;
            }
            let mut fields = line.splitn(4, '\t');
            let id = fields
                .next()
                .filter(|s| !s.is_empty())
                .ok_or_else(|| Error::parse(path, lineno, "missing id field"))?;
            let label = fields
                .next()
                .ok_or_else(|| Error::parse(path, lineno, "missing label field"))
                .and_then(Label::parse)
                .map_err(|e| match e {
                    Error::UnknownLabel(l) => Error::parse(path, lineno, format!("unknown label `{l}`")),
                    other => other,
                })?;
            let timestamp = fields
                .next()
                .ok_or_else(|| Error::parse(path, lineno, "missing timestamp field"))?
                .parse::<i64>()
                .map_err(|_| Error::parse(path, lineno, "timestamp is not an integer"))?;
            let text = unescape_text(fields.next().unwrap_or(""))
                .map_err(|msg| Error::parse(path, lineno, msg))?;
            documents.push(Document {
                id: id.to_string(),
                text,
                label,
                timestamp,
            });
        }
        let train_count = match declared_train {
            Some(n) => {
                if let Some(m) = declared_test {
                    if n + m != documents.len() {
                        return Err(Error::parse(
                            path,
                            0,
                            format!(
                                "declared partition {n}+{m} does not match {} documents",
                                documents.len()
                            ),
                        ));
                    }
                }
                n
            }
            None => {
                let trailing_unlabeled = documents
                    .iter()
                    .rev()
                    .take_while(|d| d.label == Label::Unlabeled)
                    .count();
                documents.len() - trailing_unlabeled
            }
        };
        Corpus::new(documents, train_count)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::new();
        out.push_str(&format!(
            "# abcrm-corpus v1 train={} test={}\n",
            self.train_count,
            self.test_count()
        ));
        for doc in &self.documents {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                doc.id,
                doc.label,
                doc.timestamp,
                escape_text(&doc.text)
            ));
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

fn escape_text(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            other => out.push(other),
        }
    }
    out
}

fn unescape_text(text: &str) -> std::result::Result<String, String> {
    let mut out = String::with_capacity(text.len());
    let mut chars = text.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some(other) => return Err(format!("unknown escape `\\{other}` in text field")),
            None => return Err("dangling backslash in text field".into()),
        }
    }
    Ok(out)
}

/// How a stream is ordered within each partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamMode {
    /// Ascending timestamp, ties broken by ascending id.
    ByTimestamp,
    /// Uniform permutation under the given seed.
    Shuffled(u64),
}

/// Which partitions a shuffle applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamScope {
    TrainOnly,
    TestOnly,
    Both,
}

/// Produce the processing stream: training documents first, then the test
/// partition with labels masked to `Unlabeled`. Partitions outside the
/// shuffle scope stay in timestamp order. The training prefix always
/// precedes the test suffix regardless of mode.
pub fn order_stream(corpus: &Corpus, mode: StreamMode, scope: StreamScope) -> Vec<Document> {
    let sort_key = |d: &Document| (d.timestamp, d.id.clone());
    let mut train: Vec<Document> = corpus.train().to_vec();
    let mut test: Vec<Document> = corpus
        .test()
        .iter()
        .cloned()
        .map(|mut d| {
            d.label = Label::Unlabeled;
            d
        })
        .collect();
    train.sort_by_key(sort_key);
    test.sort_by_key(sort_key);
    if let StreamMode::Shuffled(seed) = mode {
        let mut rng = rng_from_seed(seed);
        if matches!(scope, StreamScope::TrainOnly | StreamScope::Both) {
            train.shuffle(&mut rng);
        }
        if matches!(scope, StreamScope::TestOnly | StreamScope::Both) {
            test.shuffle(&mut rng);
        }
    }
    train.extend(test);
    train
}

/// How synthetic documents of the two classes are arranged in time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClassOrder {
    /// Uniform random interleaving under the corpus seed.
    #[default]
    Interleave,
    /// Strict R, I, R, I alternation while both classes remain.
    Alternate,
    RelevantFirst,
    IrrelevantFirst,
}

impl ClassOrder {
    pub fn parse(s: &str) -> Result<ClassOrder> {
        match s {
            "interleave" => Ok(ClassOrder::Interleave),
            "alternate" => Ok(ClassOrder::Alternate),
            "relevant-first" => Ok(ClassOrder::RelevantFirst),
            "irrelevant-first" => Ok(ClassOrder::IrrelevantFirst),
            other => Err(Error::InvalidParameter(format!(
                "unknown class order `{other}`"
            ))),
        }
    }
}

/// Recipe for a synthetic drifted corpus. Tokens are drawn from a mixture
/// of the document's class vocabulary and a shared vocabulary; an optional
/// drift schedule swaps class words for fresh ones as the stream advances.
#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub relevant_vocab: usize,
    pub irrelevant_vocab: usize,
    pub shared_vocab: usize,
    pub train_relevant: usize,
    pub train_irrelevant: usize,
    pub test_relevant: usize,
    pub test_irrelevant: usize,
    /// Inclusive bounds on the number of token draws per document.
    pub doc_len: (usize, usize),
    /// Probability that a token draw comes from the shared vocabulary.
    pub shared_weight: f64,
    /// Per-document word-swap probability grows as `min(1, rate * index)`.
    pub drift_per_doc: f64,
    pub class_order: ClassOrder,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            relevant_vocab: 40,
            irrelevant_vocab: 40,
            shared_vocab: 20,
            train_relevant: 30,
            train_irrelevant: 30,
            test_relevant: 30,
            test_irrelevant: 30,
            doc_len: (8, 16),
            shared_weight: 0.2,
            drift_per_doc: 0.0,
            class_order: ClassOrder::Interleave,
        }
    }
}

impl SyntheticSpec {
    fn validate(&self) -> Result<()> {
        if self.relevant_vocab == 0 || self.irrelevant_vocab == 0 {
            return Err(Error::InvalidParameter(
                "class vocabulary sizes must be positive".into(),
            ));
        }
        if self.doc_len.0 == 0 || self.doc_len.0 > self.doc_len.1 {
            return Err(Error::InvalidParameter(format!(
                "bad document length range {:?}",
                self.doc_len
            )));
        }
        if !(0.0..=1.0).contains(&self.shared_weight) {
            return Err(Error::InvalidParameter(
                "shared weight must lie in [0,1]".into(),
            ));
        }
        if self.drift_per_doc < 0.0 {
            return Err(Error::InvalidParameter("drift rate must be >= 0".into()));
        }
        Ok(())
    }
}

/// Deterministically generate a synthetic corpus. Timestamps are strictly
/// increasing; test documents keep their true labels in the corpus (the
/// stream masks them).
pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<Corpus> {
    spec.validate()?;
    let mut rng = rng_from_seed(seed);

    // Class vocabularies contain digits so they pass the pipeline unstemmed.
    let mut rel_vocab: Vec<String> = (0..spec.relevant_vocab).map(|i| format!("rel{i}")).collect();
    let mut irr_vocab: Vec<String> = (0..spec.irrelevant_vocab).map(|i| format!("irr{i}")).collect();
    let shared: Vec<String> = (0..spec.shared_vocab).map(|i| format!("shr{i}")).collect();
    let mut fresh_rel = spec.relevant_vocab;
    let mut fresh_irr = spec.irrelevant_vocab;

    let train_labels = arrange(
        spec.class_order,
        spec.train_relevant,
        spec.train_irrelevant,
        &mut rng,
    );
    let test_labels = arrange(
        spec.class_order,
        spec.test_relevant,
        spec.test_irrelevant,
        &mut rng,
    );
    let labels: Vec<bool> = train_labels.into_iter().chain(test_labels).collect();

    let mut documents = Vec::with_capacity(labels.len());
    for (k, &relevant) in labels.iter().enumerate() {
        let drift_p = (spec.drift_per_doc * k as f64).min(1.0);
        if drift_p > 0.0 && rng.random::<f64>() < drift_p {
            if relevant {
                let slot = rng.random_range(0..rel_vocab.len());
                rel_vocab[slot] = format!("rel{fresh_rel}");
                fresh_rel += 1;
            } else {
                let slot = rng.random_range(0..irr_vocab.len());
                irr_vocab[slot] = format!("irr{fresh_irr}");
                fresh_irr += 1;
            }
        }
        let vocab = if relevant { &rel_vocab } else { &irr_vocab };
        let len = rng.random_range(spec.doc_len.0..=spec.doc_len.1);
        let mut tokens = Vec::with_capacity(len);
        for _ in 0..len {
            let from_shared = !shared.is_empty() && rng.random::<f64>() < spec.shared_weight;
            let word = if from_shared {
                &shared[rng.random_range(0..shared.len())]
            } else {
                &vocab[rng.random_range(0..vocab.len())]
            };
            tokens.push(word.clone());
        }
        documents.push(Document {
            id: format!("doc{k:04}"),
            text: tokens.join(" "),
            label: if relevant {
                Label::Relevant
            } else {
                Label::Irrelevant
            },
            timestamp: k as i64,
        });
    }
    Corpus::new(documents, spec.train_relevant + spec.train_irrelevant)
}

fn arrange(
    order: ClassOrder,
    relevant: usize,
    irrelevant: usize,
    rng: &mut crate::seed::PortableRng,
) -> Vec<bool> {
    let mut labels: Vec<bool> = std::iter::repeat_n(true, relevant)
        .chain(std::iter::repeat_n(false, irrelevant))
        .collect();
    match order {
        ClassOrder::Interleave => labels.shuffle(rng),
        ClassOrder::Alternate => {
            let mut out = Vec::with_capacity(labels.len());
            let (mut r, mut i) = (relevant, irrelevant);
            let mut next_relevant = true;
            while r + i > 0 {
                let take_relevant = if r == 0 {
                    false
                } else if i == 0 {
                    true
                } else {
                    next_relevant
                };
                out.push(take_relevant);
                if take_relevant {
                    r -= 1;
                } else {
                    i -= 1;
                }
                next_relevant = !take_relevant;
            }
            labels = out;
        }
        ClassOrder::RelevantFirst => {}
        ClassOrder::IrrelevantFirst => labels.reverse(),
    }
    labels
}
