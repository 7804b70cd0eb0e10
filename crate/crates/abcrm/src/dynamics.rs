//! The cell-dynamics core: per-feature effector/regulator populations,
//! document APCs, binding, reactions, culling and classification.
//!
//! Each document becomes an antigen-presenting cell: a shuffled list of
//! feature-pair slots in which every distinct selected feature of the
//! document appears exactly `n_a` times. Cells bind their feature's slot
//! positions by uniform sampling without replacement from the mixed
//! effector/regulator population (a hypergeometric split). Co-bound slot
//! pairs react: two effectors each duplicate, an effector-regulator pair
//! grows the regulator side, two regulators merely persist. Unbound cells
//! of every pooled feature then die at the configured rates. An unlabeled
//! document is classified after its own react/cull step from the normalized
//! population balance of its features.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::Distribution;

use crate::corpus::{Document, Label, StopWordList, TokenBag};
use crate::features::FeatureSet;
use crate::metrics::Prediction;
use crate::seed::{rng_from_seed, PortableRng};
use crate::{Error, Result};

/// The six model parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParameterSet {
    /// Effector cells seeded for every newly encountered feature.
    pub e0: u32,
    /// Regulator cells seeded when the first encounter is irrelevant or
    /// unlabeled.
    pub r0_minus: u32,
    /// Regulator cells seeded when the first encounter is a labeled
    /// relevant document.
    pub r0_plus: u32,
    /// Death rate of unbound effectors.
    pub d_e: f64,
    /// Death rate of unbound regulators.
    pub d_r: f64,
    /// Slot positions each presented feature occupies on an APC.
    pub n_a: u32,
}

impl ParameterSet {
    pub fn new(e0: u32, r0_plus: u32, r0_minus: u32, d_e: f64, d_r: f64, n_a: u32) -> Result<Self> {
        if e0 == 0 || r0_plus == 0 || r0_minus == 0 {
            return Err(Error::InvalidParameter(
                "initial population counts must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&d_e) || !(0.0..=1.0).contains(&d_r) {
            return Err(Error::InvalidParameter(
                "death rates must lie in [0,1]".into(),
            ));
        }
        if n_a == 0 || n_a % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "n_a must be a positive even integer, got {n_a}"
            )));
        }
        Ok(ParameterSet {
            e0,
            r0_minus,
            r0_plus,
            d_e,
            d_r,
            n_a,
        })
    }
}

/// Behavior switches for the experiment variants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicsConfig {
    pub seed: u64,
    /// When false the cull step is the identity.
    pub cell_death: bool,
    /// Ignore irrelevant training labels: such documents stay in the stream
    /// but seed new features exactly like unlabeled ones (which is already
    /// the r0_minus path, so classification behavior is unchanged).
    pub pu_training: bool,
    /// Re-seed populations additively on every occurrence of a feature, not
    /// only its first.
    pub incremental_bias: bool,
}

impl DynamicsConfig {
    pub fn new(seed: u64) -> Self {
        DynamicsConfig {
            seed,
            cell_death: true,
            pu_training: false,
            incremental_bias: false,
        }
    }
}

/// Effector/regulator counts of one feature population.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CellCounts {
    pub e: u64,
    pub r: u64,
}

impl CellCounts {
    pub fn total(&self) -> u64 {
        self.e + self.r
    }
}

/// The classifier's entire mutable state: one population per feature ever
/// encountered. A feature present with (0,0) has been seen and gone
/// extinct, which is distinct from never having been encountered.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TCellPool {
    populations: BTreeMap<String, CellCounts>,
}

impl TCellPool {
    pub fn new() -> Self {
        TCellPool::default()
    }

    pub fn get(&self, stem: &str) -> Option<CellCounts> {
        self.populations.get(stem).copied()
    }

    pub fn contains(&self, stem: &str) -> bool {
        self.populations.contains_key(stem)
    }

    pub fn insert(&mut self, stem: impl Into<String>, counts: CellCounts) {
        self.populations.insert(stem.into(), counts);
    }

    pub fn len(&self) -> usize {
        self.populations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.populations.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, CellCounts)> {
        self.populations.iter().map(|(k, v)| (k.as_str(), *v))
    }

    fn entry(&mut self, stem: &str) -> Entry<'_, String, CellCounts> {
        self.populations.entry(stem.to_string())
    }
}

/// A document rendered as a shuffled list of feature-pair slots.
#[derive(Debug, Clone)]
pub struct Apc {
    doc_id: String,
    /// Distinct presented features, sorted for determinism.
    features: Vec<String>,
    /// Pairs of indices into `features`; `None` marks the single padding
    /// position of an odd multiset.
    slots: Vec<(u32, Option<u32>)>,
}

impl Apc {
    pub fn doc_id(&self) -> &str {
        &self.doc_id
    }

    pub fn features(&self) -> &[String] {
        &self.features
    }

    pub fn slots(&self) -> &[(u32, Option<u32>)] {
        &self.slots
    }

    pub fn slot_count(&self) -> usize {
        self.slots.len()
    }

    pub fn stem(&self, idx: u32) -> &str {
        &self.features[idx as usize]
    }
}

/// Restrict a token bag to the selected features: the distinct presented
/// stems, sorted. Presence decides membership; in-document counts do not.
pub fn restrict_bag(bag: &TokenBag, features: &FeatureSet) -> Vec<String> {
    bag.counts
        .keys()
        .filter(|stem| features.contains(stem))
        .cloned()
        .collect()
}

/// Build the APC for a document: each distinct feature appears exactly
/// `n_a` times in a uniformly shuffled multiset, paired into consecutive
/// slots. An odd multiset (odd `n_a` with an odd feature count) pads the
/// final slot with an empty position.
pub fn build_apc(
    doc_id: &str,
    doc_features: &[String],
    n_a: u32,
    rng: &mut PortableRng,
) -> Apc {
    let mut multiset: Vec<u32> = Vec::with_capacity(doc_features.len() * n_a as usize);
    for idx in 0..doc_features.len() as u32 {
        multiset.extend(std::iter::repeat_n(idx, n_a as usize));
    }
    multiset.shuffle(rng);
    let mut slots = Vec::with_capacity(multiset.len().div_ceil(2));
    let mut chunks = multiset.chunks_exact(2);
    for pair in &mut chunks {
        slots.push((pair[0], Some(pair[1])));
    }
    if let [last] = chunks.remainder() {
        slots.push((*last, None));
    }
    Apc {
        doc_id: doc_id.to_string(),
        features: doc_features.to_vec(),
        slots,
    }
}

/// Seed populations for the features of an incoming document. Newly
/// encountered features get (e0, r0_plus) when the document is labeled
/// relevant and (e0, r0_minus) otherwise, unlabeled documents included.
/// Under incremental bias the same quantities are also added to features
/// already in the pool.
pub fn init_populations(
    pool: &mut TCellPool,
    doc_features: &[String],
    label: Label,
    params: &ParameterSet,
    config: &DynamicsConfig,
) {
    let seed_label = if config.pu_training && label == Label::Irrelevant {
        Label::Unlabeled
    } else {
        label
    };
    let r_seed = if seed_label == Label::Relevant {
        u64::from(params.r0_plus)
    } else {
        u64::from(params.r0_minus)
    };
    for stem in doc_features {
        match pool.entry(stem) {
            Entry::Vacant(slot) => {
                slot.insert(CellCounts {
                    e: u64::from(params.e0),
                    r: r_seed,
                });
            }
            Entry::Occupied(mut slot) => {
                if config.incremental_bias {
                    let counts = slot.get_mut();
                    counts.e += u64::from(params.e0);
                    counts.r += r_seed;
                }
            }
        }
    }
}

/// What occupies one slot position after binding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotBinding {
    Effector,
    Regulator,
    Unbound,
}

/// The outcome of the binding step: a binding per slot position plus
/// per-feature bound-cell tallies.
#[derive(Debug, Clone)]
pub struct BindingAssignment {
    /// Aligned with the APC's slots. The second element of a padded slot is
    /// `Unbound`.
    slot_bindings: Vec<(SlotBinding, SlotBinding)>,
    /// Per feature index: (bound effectors, bound regulators).
    bound: Vec<(u64, u64)>,
}

impl BindingAssignment {
    pub fn slot_bindings(&self) -> &[(SlotBinding, SlotBinding)] {
        &self.slot_bindings
    }

    pub fn bound_counts(&self, feature_idx: u32) -> (u64, u64) {
        self.bound[feature_idx as usize]
    }

    fn bound_by_stem<'a>(&self, apc: &'a Apc) -> BTreeMap<&'a str, (u64, u64)> {
        apc.features
            .iter()
            .enumerate()
            .map(|(i, stem)| (stem.as_str(), self.bound[i]))
            .collect()
    }
}

/// Bind cells to slot positions. For each feature, min(n_a, population)
/// cells are chosen uniformly without replacement from the individual
/// effectors and regulators and assigned to the feature's positions in slot
/// order; leftover positions stay unbound. The number of bound effectors
/// therefore follows a hypergeometric draw.
pub fn bind(pool: &TCellPool, apc: &Apc, rng: &mut PortableRng) -> BindingAssignment {
    let mut remaining: Vec<(u64, u64)> = apc
        .features
        .iter()
        .map(|stem| {
            let c = pool.get(stem).unwrap_or_default();
            (c.e, c.r)
        })
        .collect();
    let mut bound = vec![(0u64, 0u64); apc.features.len()];
    let mut draw = |idx: u32, rng: &mut PortableRng| -> SlotBinding {
        let (e, r) = remaining[idx as usize];
        if e + r == 0 {
            return SlotBinding::Unbound;
        }
        let effector = if e == 0 {
            false
        } else if r == 0 {
            true
        } else {
            rng.random_range(0..e + r) < e
        };
        let slot = &mut remaining[idx as usize];
        let tally = &mut bound[idx as usize];
        if effector {
            slot.0 -= 1;
            tally.0 += 1;
            SlotBinding::Effector
        } else {
            slot.1 -= 1;
            tally.1 += 1;
            SlotBinding::Regulator
        }
    };
    let slot_bindings = apc
        .slots
        .iter()
        .map(|&(a, b)| {
            let ba = draw(a, rng);
            let bb = match b {
                Some(idx) => draw(idx, rng),
                None => SlotBinding::Unbound,
            };
            (ba, bb)
        })
        .collect();
    BindingAssignment {
        slot_bindings,
        bound,
    }
}

/// Apply the pair reactions. Per co-bound slot: two effectors each
/// duplicate; an effector-regulator pair duplicates the regulator side and
/// leaves the effector unchanged; two regulators change nothing, as does
/// any pair with an unbound or empty position. Increments are accumulated
/// from the assignment and applied at once, so the result is independent of
/// slot order.
pub fn react(pool: &mut TCellPool, apc: &Apc, assignment: &BindingAssignment) {
    let mut delta = vec![(0u64, 0u64); apc.features.len()];
    for (&(fa, fb), &(ba, bb)) in apc.slots.iter().zip(assignment.slot_bindings.iter()) {
        let Some(fb) = fb else { continue };
        match (ba, bb) {
            (SlotBinding::Effector, SlotBinding::Effector) => {
                delta[fa as usize].0 += 1;
                delta[fb as usize].0 += 1;
            }
            (SlotBinding::Effector, SlotBinding::Regulator) => {
                delta[fb as usize].1 += 1;
            }
            (SlotBinding::Regulator, SlotBinding::Effector) => {
                delta[fa as usize].1 += 1;
            }
            (SlotBinding::Regulator, SlotBinding::Regulator) => {}
            (SlotBinding::Unbound, _) | (_, SlotBinding::Unbound) => {}
        }
    }
    for (idx, (de, dr)) in delta.into_iter().enumerate() {
        if de == 0 && dr == 0 {
            continue;
        }
        let stem = &apc.features[idx];
        let entry = pool
            .populations
            .get_mut(stem)
            .expect("populations initialized before react");
        entry.e += de;
        entry.r += dr;
    }
}

fn binomial_deaths(rng: &mut PortableRng, n: u64, p: f64) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    rand_distr::Binomial::new(n, p)
        .expect("validated rate")
        .sample(rng)
}

/// Cull unbound cells of every pooled feature, current document or not.
/// Bound cells are immune for this step; cells born in this document's
/// react step count as unbound and are eligible. A disabled `cell_death`
/// makes this the identity without consuming randomness, as do zero rates.
pub fn cull(
    pool: &mut TCellPool,
    apc: &Apc,
    assignment: &BindingAssignment,
    params: &ParameterSet,
    config: &DynamicsConfig,
    rng: &mut PortableRng,
) {
    if !config.cell_death {
        return;
    }
    let bound = assignment.bound_by_stem(apc);
    for (stem, counts) in pool.populations.iter_mut() {
        let (be, br) = bound.get(stem.as_str()).copied().unwrap_or((0, 0));
        let unbound_e = counts.e - be;
        let unbound_r = counts.r - br;
        counts.e -= binomial_deaths(rng, unbound_e, params.d_e);
        counts.r -= binomial_deaths(rng, unbound_r, params.d_r);
    }
}

/// Classify a document from the pool state after its react/cull step.
/// Each feature contributes its normalized population components; extinct
/// or never-seen features contribute nothing. The tie R(d) >= E(d) goes to
/// relevant, degenerate all-zero documents included. The score R(d) - E(d)
/// is the signed margin used for curve ranking.
pub fn classify(pool: &TCellPool, doc_features: &[String]) -> (bool, f64) {
    let mut r_sum = 0.0;
    let mut e_sum = 0.0;
    for stem in doc_features {
        let Some(counts) = pool.get(stem) else { continue };
        if counts.e == 0 && counts.r == 0 {
            continue;
        }
        let e = counts.e as f64;
        let r = counts.r as f64;
        let norm = (e * e + r * r).sqrt();
        r_sum += r / norm;
        e_sum += e / norm;
    }
    (r_sum >= e_sum, r_sum - e_sum)
}

/// The streaming classifier: pool, generator and document cursor. State
/// persists across documents; a single instance is strictly sequential.
#[derive(Debug, Clone)]
pub struct Abcrm {
    params: ParameterSet,
    config: DynamicsConfig,
    pool: TCellPool,
    rng: PortableRng,
    cursor: u64,
}

impl Abcrm {
    pub fn new(params: ParameterSet, config: DynamicsConfig) -> Abcrm {
        Abcrm {
            params,
            config,
            pool: TCellPool::new(),
            rng: rng_from_seed(config.seed),
            cursor: 0,
        }
    }

    pub fn params(&self) -> &ParameterSet {
        &self.params
    }

    pub fn config(&self) -> &DynamicsConfig {
        &self.config
    }

    pub fn pool(&self) -> &TCellPool {
        &self.pool
    }

    pub fn cursor(&self) -> u64 {
        self.cursor
    }

    /// Feed one document through the APC / seed / bind / react / cull
    /// sequence. Unlabeled documents are additionally classified, after
    /// their own react and cull.
    pub fn process_document(
        &mut self,
        doc_id: &str,
        bag: &TokenBag,
        label: Label,
        features: &FeatureSet,
    ) -> Option<Prediction> {
        let doc_features = restrict_bag(bag, features);
        self.process_restricted(doc_id, &doc_features, label)
    }

    /// Same as [`Abcrm::process_document`] for a pre-restricted feature
    /// list (distinct selected stems, sorted).
    pub fn process_restricted(
        &mut self,
        doc_id: &str,
        doc_features: &[String],
        label: Label,
    ) -> Option<Prediction> {
        let apc = build_apc(doc_id, doc_features, self.params.n_a, &mut self.rng);
        init_populations(&mut self.pool, &apc.features, label, &self.params, &self.config);
        let assignment = bind(&self.pool, &apc, &mut self.rng);
        react(&mut self.pool, &apc, &assignment);
        cull(
            &mut self.pool,
            &apc,
            &assignment,
            &self.params,
            &self.config,
            &mut self.rng,
        );
        self.cursor += 1;
        if label == Label::Unlabeled {
            let (relevant, score) = classify(&self.pool, &apc.features);
            Some(Prediction {
                doc_id: doc_id.to_string(),
                relevant,
                score,
            })
        } else {
            None
        }
    }

    /// Persist the pool plus enough generator state to resume exactly:
    /// `stem \t e \t r` rows under a header carrying the seed, cursor,
    /// parameters, flags and the ChaCha12 word position.
    pub fn save_checkpoint(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let p = &self.params;
        let c = &self.config;
        let mut out = format!(
            "# abcrm-pool v1 seed={} cursor={} e0={} r0_plus={} r0_minus={} d_e={} d_r={} n_a={} cell_death={} pu_training={} incremental_bias={} rng=chacha12 rng_word_pos={}\n",
            c.seed, self.cursor, p.e0, p.r0_plus, p.r0_minus, p.d_e, p.d_r, p.n_a,
            c.cell_death, c.pu_training, c.incremental_bias, self.rng.get_word_pos()
        );
        for (stem, counts) in self.pool.iter() {
            out.push_str(&format!("{stem}\t{}\t{}\n", counts.e, counts.r));
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Abcrm> {
        let path = path.as_ref();
        let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut header: BTreeMap<&str, &str> = BTreeMap::new();
        let mut pool = TCellPool::new();
        for (idx, line) in content.lines().enumerate() {
            let lineno = idx + 1;
            if line.is_empty() {
                continue;
            }
            if let Some(h) = line.strip_prefix('#') {
                for token in h.split_whitespace() {
                    if let Some((k, v)) = token.split_once('=') {
                        header.insert(k, v);
                    }
                }
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(Error::parse(path, lineno, "expected 3 tab-separated fields"));
            }
            let e = fields[1]
                .parse()
                .map_err(|_| Error::parse(path, lineno, "bad effector count"))?;
            let r = fields[2]
                .parse()
                .map_err(|_| Error::parse(path, lineno, "bad regulator count"))?;
            pool.insert(fields[0], CellCounts { e, r });
        }
        let get = |key: &str| -> Result<&str> {
            header
                .get(key)
                .copied()
                .ok_or_else(|| Error::parse(path, 1, format!("missing header key `{key}`")))
        };
        let parse_err = |key: &str| Error::parse(path, 1, format!("bad header value for `{key}`"));
        let seed: u64 = get("seed")?.parse().map_err(|_| parse_err("seed"))?;
        let cursor: u64 = get("cursor")?.parse().map_err(|_| parse_err("cursor"))?;
        let params = ParameterSet::new(
            get("e0")?.parse().map_err(|_| parse_err("e0"))?,
            get("r0_plus")?.parse().map_err(|_| parse_err("r0_plus"))?,
            get("r0_minus")?.parse().map_err(|_| parse_err("r0_minus"))?,
            get("d_e")?.parse().map_err(|_| parse_err("d_e"))?,
            get("d_r")?.parse().map_err(|_| parse_err("d_r"))?,
            get("n_a")?.parse().map_err(|_| parse_err("n_a"))?,
        )?;
        let config = DynamicsConfig {
            seed,
            cell_death: get("cell_death")?.parse().map_err(|_| parse_err("cell_death"))?,
            pu_training: get("pu_training")?.parse().map_err(|_| parse_err("pu_training"))?,
            incremental_bias: get("incremental_bias")?
                .parse()
                .map_err(|_| parse_err("incremental_bias"))?,
        };
        let word_pos: u128 = get("rng_word_pos")?
            .parse()
            .map_err(|_| parse_err("rng_word_pos"))?;
        let mut rng = rng_from_seed(seed);
        rng.set_word_pos(word_pos);
        Ok(Abcrm {
            params,
            config,
            pool,
            rng,
            cursor,
        })
    }
}

/// Run a full document stream and collect predictions for its unlabeled
/// documents. Deterministic under (config seed, stream order, parameters).
pub fn process_stream(
    stream: &[Document],
    features: &FeatureSet,
    stop: &StopWordList,
    params: ParameterSet,
    config: DynamicsConfig,
) -> Vec<Prediction> {
    let mut engine = Abcrm::new(params, config);
    stream
        .iter()
        .filter_map(|doc| {
            let bag = doc.token_bag(stop);
            engine.process_document(&doc.id, &bag, doc.label, features)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{FeatureSet, SelectedFeature};
    use approx::assert_abs_diff_eq;

    fn params_row_11() -> ParameterSet {
        ParameterSet::new(2, 11, 10, 0.2, 0.3, 18).unwrap()
    }

    fn feature_set(stems: &[&str]) -> FeatureSet {
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

    fn stems(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn parameter_set_rejects_odd_or_out_of_range() {
        assert!(ParameterSet::new(2, 11, 10, 0.2, 0.3, 17).is_err());
        assert!(ParameterSet::new(0, 11, 10, 0.2, 0.3, 18).is_err());
        assert!(ParameterSet::new(2, 11, 10, 1.5, 0.3, 18).is_err());
        assert!(params_row_11().e0 == 2);
    }

    #[test]
    fn apc_presents_each_feature_exactly_n_a_times() {
        let mut rng = rng_from_seed(1);
        for (features, n_a) in [(stems(&["a", "b"]), 2u32), (stems(&["a", "b", "c"]), 18)] {
            let apc = build_apc("d", &features, n_a, &mut rng);
            assert_eq!(apc.slot_count(), features.len() * n_a as usize / 2);
            let mut tally = vec![0u32; features.len()];
            for &(a, b) in apc.slots() {
                tally[a as usize] += 1;
                if let Some(b) = b {
                    tally[b as usize] += 1;
                }
            }
            assert!(tally.iter().all(|&t| t == n_a), "{tally:?}");
        }
    }

    #[test]
    fn apc_empty_bag_has_no_slots() {
        let mut rng = rng_from_seed(1);
        let apc = build_apc("d", &[], 18, &mut rng);
        assert_eq!(apc.slot_count(), 0);
    }

    #[test]
    fn apc_odd_multiset_pads_final_slot() {
        // Odd n_a times odd feature count: 3 features x 3 copies = 9
        // positions = 4 slots + padded fifth.
        let mut rng = rng_from_seed(5);
        let apc = build_apc("d", &stems(&["a", "b", "c"]), 3, &mut rng);
        assert_eq!(apc.slot_count(), 5);
        let empties: Vec<usize> = apc
            .slots()
            .iter()
            .enumerate()
            .filter(|(_, (_, b))| b.is_none())
            .map(|(i, _)| i)
            .collect();
        assert_eq!(empties, vec![4]);
    }

    #[test]
    fn seeding_matches_first_document_label() {
        let params = params_row_11();
        let config = DynamicsConfig::new(0);
        let mut pool = TCellPool::new();
        init_populations(&mut pool, &stems(&["a"]), Label::Relevant, &params, &config);
        assert_eq!(pool.get("a").unwrap(), CellCounts { e: 2, r: 11 });
        init_populations(&mut pool, &stems(&["b"]), Label::Unlabeled, &params, &config);
        assert_eq!(pool.get("b").unwrap(), CellCounts { e: 2, r: 10 });
        init_populations(&mut pool, &stems(&["c"]), Label::Irrelevant, &params, &config);
        assert_eq!(pool.get("c").unwrap(), CellCounts { e: 2, r: 10 });
        // Known features are untouched without incremental bias.
        init_populations(&mut pool, &stems(&["a"]), Label::Irrelevant, &params, &config);
        assert_eq!(pool.get("a").unwrap(), CellCounts { e: 2, r: 11 });
    }

    #[test]
    fn incremental_bias_adds_to_known_features() {
        let params = ParameterSet::new(1, 11, 7, 0.0, 0.0, 18).unwrap();
        let mut config = DynamicsConfig::new(0);
        config.incremental_bias = true;
        let mut pool = TCellPool::new();
        pool.insert("f", CellCounts { e: 5, r: 5 });
        init_populations(&mut pool, &stems(&["f"]), Label::Irrelevant, &params, &config);
        assert_eq!(pool.get("f").unwrap(), CellCounts { e: 6, r: 12 });
    }

    #[test]
    fn bind_single_type_population_binds_all() {
        let mut rng = rng_from_seed(3);
        let mut pool = TCellPool::new();
        pool.insert("f", CellCounts { e: 0, r: 5 });
        let apc = build_apc("d", &stems(&["f"]), 2, &mut rng);
        let asg = bind(&pool, &apc, &mut rng);
        assert_eq!(asg.bound_counts(0), (0, 2));
        assert_eq!(
            asg.slot_bindings()[0],
            (SlotBinding::Regulator, SlotBinding::Regulator)
        );
    }

    #[test]
    fn bind_population_smaller_than_slots_leaves_rest_unbound() {
        let mut rng = rng_from_seed(3);
        let mut pool = TCellPool::new();
        pool.insert("f", CellCounts { e: 3, r: 0 });
        let apc = build_apc("d", &stems(&["f"]), 18, &mut rng);
        let asg = bind(&pool, &apc, &mut rng);
        assert_eq!(asg.bound_counts(0), (3, 0));
        let unbound = asg
            .slot_bindings()
            .iter()
            .flat_map(|&(a, b)| [a, b])
            .filter(|&b| b == SlotBinding::Unbound)
            .count();
        assert_eq!(unbound, 15);
    }

    #[test]
    fn bind_tallies_never_exceed_populations() {
        let mut rng = rng_from_seed(4);
        let mut pool = TCellPool::new();
        pool.insert("a", CellCounts { e: 3, r: 7 });
        pool.insert("b", CellCounts { e: 40, r: 1 });
        for _ in 0..50 {
            let apc = build_apc("d", &stems(&["a", "b"]), 8, &mut rng);
            let asg = bind(&pool, &apc, &mut rng);
            for (idx, stem) in ["a", "b"].iter().enumerate() {
                let (be, br) = asg.bound_counts(idx as u32);
                let c = pool.get(stem).unwrap();
                assert!(be <= c.e && br <= c.r);
                assert!(be + br <= 8);
            }
        }
    }

    #[test]
    fn bind_hypergeometric_frequency() {
        // (E,R) = (10,10), n_a = 2: exact P(both E) = (10*9)/(20*19).
        let mut pool = TCellPool::new();
        pool.insert("f", CellCounts { e: 10, r: 10 });
        let trials = 20_000u64;
        let mut both_e = 0u64;
        for seed in 0..trials {
            let mut rng = rng_from_seed(seed);
            let apc = build_apc("d", &stems(&["f"]), 2, &mut rng);
            let asg = bind(&pool, &apc, &mut rng);
            if asg.bound_counts(0) == (2, 0) {
                both_e += 1;
            }
        }
        let freq = both_e as f64 / trials as f64;
        let exact = 90.0 / 380.0;
        assert!((freq - exact).abs() < 0.02, "freq {freq} vs exact {exact}");
    }

    /// Hand-constructed single-slot APC with a chosen binding assignment.
    fn single_slot(pool: &mut TCellPool, kinds: (SlotBinding, SlotBinding)) -> (Apc, BindingAssignment) {
        pool.insert("f", CellCounts { e: 2, r: 4 });
        pool.insert("g", CellCounts { e: 3, r: 4 });
        let apc = Apc {
            doc_id: "d".into(),
            features: stems(&["f", "g"]),
            slots: vec![(0, Some(1))],
        };
        let tally = |b: SlotBinding| match b {
            SlotBinding::Effector => (1, 0),
            SlotBinding::Regulator => (0, 1),
            SlotBinding::Unbound => (0, 0),
        };
        let asg = BindingAssignment {
            slot_bindings: vec![kinds],
            bound: vec![tally(kinds.0), tally(kinds.1)],
        };
        (apc, asg)
    }

    #[test]
    fn react_regulator_pair_is_maintenance() {
        let mut pool = TCellPool::new();
        let (apc, asg) = single_slot(&mut pool, (SlotBinding::Regulator, SlotBinding::Regulator));
        react(&mut pool, &apc, &asg);
        assert_eq!(pool.get("f").unwrap(), CellCounts { e: 2, r: 4 });
        assert_eq!(pool.get("g").unwrap(), CellCounts { e: 3, r: 4 });
    }

    #[test]
    fn react_effector_pair_duplicates_both() {
        let mut pool = TCellPool::new();
        let (apc, asg) = single_slot(&mut pool, (SlotBinding::Effector, SlotBinding::Effector));
        react(&mut pool, &apc, &asg);
        assert_eq!(pool.get("f").unwrap(), CellCounts { e: 3, r: 4 });
        assert_eq!(pool.get("g").unwrap(), CellCounts { e: 4, r: 4 });
    }

    #[test]
    fn react_mixed_pair_grows_regulator_side_only() {
        let mut pool = TCellPool::new();
        let (apc, asg) = single_slot(&mut pool, (SlotBinding::Effector, SlotBinding::Regulator));
        react(&mut pool, &apc, &asg);
        assert_eq!(pool.get("f").unwrap(), CellCounts { e: 2, r: 4 });
        assert_eq!(pool.get("g").unwrap(), CellCounts { e: 3, r: 5 });
    }

    #[test]
    fn react_same_feature_effector_pair_adds_two() {
        let mut pool = TCellPool::new();
        pool.insert("f", CellCounts { e: 2, r: 0 });
        let apc = Apc {
            doc_id: "d".into(),
            features: stems(&["f"]),
            slots: vec![(0, Some(0))],
        };
        let asg = BindingAssignment {
            slot_bindings: vec![(SlotBinding::Effector, SlotBinding::Effector)],
            bound: vec![(2, 0)],
        };
        react(&mut pool, &apc, &asg);
        assert_eq!(pool.get("f").unwrap(), CellCounts { e: 4, r: 0 });
    }

    #[test]
    fn monoculture_doubling() {
        // E >= n_a effectors, no regulators, single-feature document: all
        // n_a positions bind effectors and E grows by exactly n_a.
        let params = ParameterSet::new(2, 11, 10, 0.0, 0.0, 18).unwrap();
        let config = DynamicsConfig::new(9);
        let mut engine = Abcrm::new(params, config);
        engine.pool.insert("f", CellCounts { e: 30, r: 0 });
        engine.process_restricted("d", &stems(&["f"]), Label::Unlabeled);
        assert_eq!(engine.pool().get("f").unwrap(), CellCounts { e: 48, r: 0 });
    }

    #[test]
    fn cull_disabled_or_zero_rate_is_identity() {
        let mut rng = rng_from_seed(2);
        let mut pool = TCellPool::new();
        pool.insert("f", CellCounts { e: 7, r: 9 });
        pool.insert("g", CellCounts { e: 1, r: 1 });
        let before = pool.clone();
        let apc = build_apc("d", &stems(&["f"]), 4, &mut rng);
        let asg = bind(&pool, &apc, &mut rng);

        let params = ParameterSet::new(2, 11, 10, 0.0, 0.0, 4).unwrap();
        let config = DynamicsConfig::new(0);
        let mut culled = pool.clone();
        cull(&mut culled, &apc, &asg, &params, &config, &mut rng);
        // react not applied, so bound cells plus unbound survivors equal the
        // original populations exactly at zero rates.
        assert_eq!(culled, before);

        let params_lethal = params_row_11();
        let mut config_off = DynamicsConfig::new(0);
        config_off.cell_death = false;
        let mut untouched = pool.clone();
        cull(&mut untouched, &apc, &asg, &params_lethal, &config_off, &mut rng);
        assert_eq!(untouched, before);
    }

    #[test]
    fn cull_rate_one_zeroes_fully_unbound_feature() {
        let mut rng = rng_from_seed(2);
        let mut pool = TCellPool::new();
        pool.insert("absent", CellCounts { e: 7, r: 3 });
        pool.insert("present", CellCounts { e: 2, r: 2 });
        let apc = build_apc("d", &stems(&["present"]), 4, &mut rng);
        let asg = bind(&pool, &apc, &mut rng);
        let params = ParameterSet::new(2, 11, 10, 1.0, 1.0, 4).unwrap();
        let config = DynamicsConfig::new(0);
        cull(&mut pool, &apc, &asg, &params, &config, &mut rng);
        assert_eq!(pool.get("absent").unwrap(), CellCounts { e: 0, r: 0 });
        // All four cells of the present feature bound, so they survive.
        assert_eq!(pool.get("present").unwrap(), CellCounts { e: 2, r: 2 });
    }

    #[test]
    fn cull_binomial_mean_matches_expectation() {
        // d_e = 0.2 over 10 unbound effectors: mean removal 2, sd ~1.26.
        let mut total = 0u64;
        let runs = 10_000;
        let params = ParameterSet::new(2, 11, 10, 0.2, 0.0, 4).unwrap();
        let config = DynamicsConfig::new(0);
        for seed in 0..runs {
            let mut rng = rng_from_seed(seed);
            let mut pool = TCellPool::new();
            pool.insert("f", CellCounts { e: 10, r: 0 });
            let apc = build_apc("other", &[], 4, &mut rng);
            let asg = bind(&pool, &apc, &mut rng);
            cull(&mut pool, &apc, &asg, &params, &config, &mut rng);
            total += 10 - pool.get("f").unwrap().e;
        }
        let mean = total as f64 / runs as f64;
        let sigma = (10.0 * 0.2 * 0.8 / runs as f64).sqrt();
        assert!((mean - 2.0).abs() < 3.0 * sigma, "mean {mean}");
    }

    #[test]
    fn classify_margins_and_ties() {
        let mut pool = TCellPool::new();
        pool.insert("a", CellCounts { e: 1, r: 5 });
        pool.insert("b", CellCounts { e: 2, r: 9 });
        let (rel, score) = classify(&pool, &stems(&["a", "b"]));
        assert!(rel && score > 0.0);

        // Empty feature set: all-zero tie goes to relevant.
        let (rel, score) = classify(&pool, &[]);
        assert!(rel);
        assert_abs_diff_eq!(score, 0.0);

        // (3,4) and (4,3) produce the exact 7/5 tie.
        let mut tied = TCellPool::new();
        tied.insert("x", CellCounts { e: 3, r: 4 });
        tied.insert("y", CellCounts { e: 4, r: 3 });
        let (rel, score) = classify(&tied, &stems(&["x", "y"]));
        assert!(rel);
        assert_abs_diff_eq!(score, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn classify_scale_invariant() {
        let mut pool = TCellPool::new();
        pool.insert("a", CellCounts { e: 3, r: 4 });
        pool.insert("b", CellCounts { e: 9, r: 2 });
        let (rel1, s1) = classify(&pool, &stems(&["a", "b"]));
        let mut scaled = TCellPool::new();
        scaled.insert("a", CellCounts { e: 30, r: 40 });
        scaled.insert("b", CellCounts { e: 90, r: 20 });
        let (rel2, s2) = classify(&scaled, &stems(&["a", "b"]));
        assert_eq!(rel1, rel2);
        assert_abs_diff_eq!(s1, s2, epsilon = 1e-12);
    }

    #[test]
    fn stream_of_labeled_docs_yields_no_predictions() {
        let docs = vec![Document {
            id: "a".into(),
            text: "f1 g1".into(),
            label: Label::Relevant,
            timestamp: 0,
        }];
        let preds = process_stream(
            &docs,
            &feature_set(&["f1", "g1"]),
            &StopWordList::empty(),
            params_row_11(),
            DynamicsConfig::new(1),
        );
        assert!(preds.is_empty());
    }

    #[test]
    fn identical_runs_are_identical() {
        let docs: Vec<Document> = (0..30)
            .map(|i| Document {
                id: format!("d{i}"),
                text: if i % 2 == 0 { "f1 g1 h1" } else { "g1 k1" }.into(),
                label: match i % 3 {
                    0 => Label::Relevant,
                    1 => Label::Irrelevant,
                    _ => Label::Unlabeled,
                },
                timestamp: i,
            })
            .collect();
        let fs = feature_set(&["f1", "g1", "h1", "k1"]);
        let stop = StopWordList::empty();
        let a = process_stream(&docs, &fs, &stop, params_row_11(), DynamicsConfig::new(77));
        let b = process_stream(&docs, &fs, &stop, params_row_11(), DynamicsConfig::new(77));
        assert_eq!(a, b);
        assert!(!a.is_empty());
    }

    #[test]
    fn checkpoint_round_trip_resumes_exactly() {
        let fs = feature_set(&["f1", "g1", "h1"]);
        let stop = StopWordList::empty();
        let docs: Vec<Document> = (0..20)
            .map(|i| Document {
                id: format!("d{i}"),
                text: "f1 g1 h1".into(),
                label: if i < 10 {
                    if i % 2 == 0 { Label::Relevant } else { Label::Irrelevant }
                } else {
                    Label::Unlabeled
                },
                timestamp: i,
            })
            .collect();

        // Uninterrupted reference run.
        let mut reference = Abcrm::new(params_row_11(), DynamicsConfig::new(5));
        let mut expected = Vec::new();
        for d in &docs {
            if let Some(p) = reference.process_document(&d.id, &d.token_bag(&stop), d.label, &fs) {
                expected.push(p);
            }
        }

        // Run half, checkpoint, reload, run the rest.
        let mut first = Abcrm::new(params_row_11(), DynamicsConfig::new(5));
        for d in &docs[..10] {
            first.process_document(&d.id, &d.token_bag(&stop), d.label, &fs);
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pool.tsv");
        first.save_checkpoint(&path).unwrap();
        let mut resumed = Abcrm::load_checkpoint(&path).unwrap();
        assert_eq!(resumed.cursor(), 10);
        let mut actual = Vec::new();
        for d in &docs[10..] {
            if let Some(p) = resumed.process_document(&d.id, &d.token_bag(&stop), d.label, &fs) {
                actual.push(p);
            }
        }
        assert_eq!(actual, expected);
    }
}
