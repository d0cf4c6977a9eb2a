//! Shared domain vocabulary: hosts, features, labels, predictions, rankings.
//!
//! Everything here is immutable after construction and safe to share across
//! threads.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Opaque host identifier (a hostname such as `example.eu`).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HostId(String);

impl HostId {
    pub fn new(value: impl Into<String>) -> Result<Self> {
        let value = value.into();
        if value.is_empty() {
            return Err(Error::data("host id must be non-empty"));
        }
        Ok(HostId(value))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for HostId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Which feature family a dense block belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureKind {
    Link,
    Content,
    Nlp,
}

impl FeatureKind {
    /// Dimension of the full-scale corpus for this family. Desk-scale
    /// datasets declare their own (smaller) width through the file header;
    /// consistency across hosts is what gets enforced.
    pub const fn reference_dim(self) -> usize {
        match self {
            FeatureKind::Link => 176,
            FeatureKind::Content => 95,
            FeatureKind::Nlp => 180,
        }
    }
}

/// Dense feature vector plus its column names.
///
/// Names are reference-counted: every host in a dataset shares the single
/// list that came from the file header.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBlock<R: Real> {
    kind: FeatureKind,
    names: Arc<[String]>,
    values: Vec<R>,
}

impl<R: Real> FeatureBlock<R> {
    pub fn new(kind: FeatureKind, names: Arc<[String]>, values: Vec<R>) -> Result<Self> {
        if names.len() != values.len() {
            return Err(Error::data(format!(
                "feature block has {} names but {} values",
                names.len(),
                values.len()
            )));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::data(format!(
                "feature {} ({:?}) is not finite",
                names[bad], kind
            )));
        }
        Ok(FeatureBlock {
            kind,
            names,
            values,
        })
    }

    pub fn kind(&self) -> FeatureKind {
        self.kind
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[R] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Host-level aggregate term counts, optionally tf-idf weighted.
///
/// Entries are (term_id, tf) with strictly ascending ids inside the
/// dictionary range. `weights` runs parallel to `entries` once attached.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseTermVector<R: Real> {
    entries: Vec<(u32, u32)>,
    weights: Option<Vec<R>>,
}

/// Upper bound on term ids: the dictionary holds the top terms only.
pub const DICTIONARY_CAPACITY: u32 = 50_000;

impl<R: Real> SparseTermVector<R> {
    pub fn new(entries: Vec<(u32, u32)>) -> Result<Self> {
        for window in entries.windows(2) {
            if window[0].0 >= window[1].0 {
                return Err(Error::data(format!(
                    "term ids must be strictly ascending, saw {} then {}",
                    window[0].0, window[1].0
                )));
            }
        }
        if let Some(&(id, _)) = entries.iter().find(|(id, _)| *id >= DICTIONARY_CAPACITY) {
            return Err(Error::data(format!(
                "term id {id} outside dictionary range [0, {DICTIONARY_CAPACITY})"
            )));
        }
        Ok(SparseTermVector {
            entries,
            weights: None,
        })
    }

    pub fn empty() -> Self {
        SparseTermVector {
            entries: Vec::new(),
            weights: None,
        }
    }

    pub fn with_weights(entries: Vec<(u32, u32)>, weights: Vec<R>) -> Result<Self> {
        if entries.len() != weights.len() {
            return Err(Error::data("weights must run parallel to entries"));
        }
        let mut v = SparseTermVector::new(entries)?;
        v.weights = Some(weights);
        Ok(v)
    }

    pub fn entries(&self) -> &[(u32, u32)] {
        &self.entries
    }

    pub fn weights(&self) -> Option<&[R]> {
        self.weights.as_deref()
    }

    pub fn is_weighted(&self) -> bool {
        self.weights.is_some()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// One dictionary row: the term string and its page-level document frequency.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DictEntry {
    pub term: String,
    pub df: u32,
}

/// The top-terms dictionary: term metadata plus the page count used for idf.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dictionary {
    entries: BTreeMap<u32, DictEntry>,
    corpus_size: u32,
}

impl Dictionary {
    pub fn new(entries: BTreeMap<u32, DictEntry>, corpus_size: u32) -> Result<Self> {
        if corpus_size == 0 {
            return Err(Error::data("dictionary corpus size must be positive"));
        }
        if entries.len() as u32 > DICTIONARY_CAPACITY {
            return Err(Error::data(format!(
                "dictionary holds at most {DICTIONARY_CAPACITY} entries"
            )));
        }
        for (id, entry) in &entries {
            if *id >= DICTIONARY_CAPACITY {
                return Err(Error::data(format!(
                    "dictionary term id {id} outside [0, {DICTIONARY_CAPACITY})"
                )));
            }
            if entry.df == 0 || entry.df > corpus_size {
                return Err(Error::data(format!(
                    "term {id} has df {} outside [1, {corpus_size}]",
                    entry.df
                )));
            }
        }
        Ok(Dictionary {
            entries,
            corpus_size,
        })
    }

    pub fn get(&self, term_id: u32) -> Option<&DictEntry> {
        self.entries.get(&term_id)
    }

    pub fn corpus_size(&self) -> u32 {
        self.corpus_size
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&u32, &DictEntry)> {
        self.entries.iter()
    }
}

/// The six mutually exclusive host genres.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GenreLabel {
    WebSpam,
    NewsEditorial,
    Commercial,
    EducationalResearch,
    Discussion,
    PersonalLeisure,
}

impl GenreLabel {
    pub const ALL: [GenreLabel; 6] = [
        GenreLabel::WebSpam,
        GenreLabel::NewsEditorial,
        GenreLabel::Commercial,
        GenreLabel::EducationalResearch,
        GenreLabel::Discussion,
        GenreLabel::PersonalLeisure,
    ];

    pub fn canonical_name(self) -> &'static str {
        match self {
            GenreLabel::WebSpam => "WebSpam",
            GenreLabel::NewsEditorial => "News/Editorial",
            GenreLabel::Commercial => "Commercial",
            GenreLabel::EducationalResearch => "Educational/Research",
            GenreLabel::Discussion => "Discussion",
            GenreLabel::PersonalLeisure => "Personal/Leisure",
        }
    }

    pub fn from_name(name: &str) -> Option<GenreLabel> {
        Self::ALL
            .into_iter()
            .find(|g| g.canonical_name() == name)
    }

    /// File-name-safe form of the canonical name.
    pub fn slug(self) -> &'static str {
        match self {
            GenreLabel::WebSpam => "WebSpam",
            GenreLabel::NewsEditorial => "News_Editorial",
            GenreLabel::Commercial => "Commercial",
            GenreLabel::EducationalResearch => "Educational_Research",
            GenreLabel::Discussion => "Discussion",
            GenreLabel::PersonalLeisure => "Personal_Leisure",
        }
    }
}

impl fmt::Display for GenreLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.canonical_name())
    }
}

/// The three intrinsic quality facets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Facet {
    Neutrality,
    Bias,
    Trustiness,
}

impl Facet {
    pub const ALL: [Facet; 3] = [Facet::Neutrality, Facet::Bias, Facet::Trustiness];

    pub fn canonical_name(self) -> &'static str {
        match self {
            Facet::Neutrality => "Neutrality",
            Facet::Bias => "Bias",
            Facet::Trustiness => "Trustiness",
        }
    }

    pub fn from_name(name: &str) -> Option<Facet> {
        Self::ALL.into_iter().find(|f| f.canonical_name() == name)
    }

    /// Level that counts as the positive class in binary training:
    /// level 3 for neutrality and trustiness, level 1 for bias.
    pub fn positive_level(self) -> Level {
        match self {
            Facet::Neutrality | Facet::Trustiness => Level::THREE,
            Facet::Bias => Level::ONE,
        }
    }

    /// Level assigned when the binary prediction is negative.
    pub fn negative_level(self) -> Level {
        match self {
            Facet::Neutrality | Facet::Trustiness => Level::ONE,
            Facet::Bias => Level::THREE,
        }
    }
}

impl fmt::Display for Facet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.canonical_name())
    }
}

/// Facet level on the 1 (problematic) to 3 (normal) scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Level(u8);

impl Level {
    pub const ONE: Level = Level(1);
    pub const TWO: Level = Level(2);
    pub const THREE: Level = Level(3);

    pub fn new(value: u8) -> Result<Level> {
        if (1..=3).contains(&value) {
            Ok(Level(value))
        } else {
            Err(Error::data(format!("facet level {value} outside {{1,2,3}}")))
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One facet together with its level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FacetValue {
    pub facet: Facet,
    pub level: Level,
}

/// Ground truth (or predicted) labels for one host; any field may be missing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LabelSet {
    pub genre: Option<GenreLabel>,
    pub neutrality: Option<Level>,
    pub bias: Option<Level>,
    pub trust: Option<Level>,
}

impl LabelSet {
    pub fn facet_level(&self, facet: Facet) -> Option<Level> {
        match facet {
            Facet::Neutrality => self.neutrality,
            Facet::Bias => self.bias,
            Facet::Trustiness => self.trust,
        }
    }

    /// Binary view for one category: `Some(true)` when the host belongs to
    /// the positive class, `None` when the relevant label is missing.
    pub fn binary_class(&self, category: Category) -> Option<bool> {
        match category {
            Category::Genre(g) => self.genre.map(|got| got == g),
            Category::Facet(f) => self
                .facet_level(f)
                .map(|level| level == f.positive_level()),
        }
    }
}

/// One of the nine ranked categories: a genre or a facet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Category {
    Genre(GenreLabel),
    Facet(Facet),
}

impl Category {
    pub fn canonical_name(self) -> &'static str {
        match self {
            Category::Genre(g) => g.canonical_name(),
            Category::Facet(f) => f.canonical_name(),
        }
    }

    pub fn from_name(name: &str) -> Option<Category> {
        GenreLabel::from_name(name)
            .map(Category::Genre)
            .or_else(|| Facet::from_name(name).map(Category::Facet))
    }

    pub fn slug(self) -> &'static str {
        match self {
            Category::Genre(g) => g.slug(),
            Category::Facet(f) => f.canonical_name(),
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.canonical_name())
    }
}

/// All nine categories in the fixed reporting order: the six genres, then
/// trustiness, bias, neutrality.
pub fn category_universe() -> [Category; 9] {
    [
        Category::Genre(GenreLabel::WebSpam),
        Category::Genre(GenreLabel::NewsEditorial),
        Category::Genre(GenreLabel::Commercial),
        Category::Genre(GenreLabel::EducationalResearch),
        Category::Genre(GenreLabel::Discussion),
        Category::Genre(GenreLabel::PersonalLeisure),
        Category::Facet(Facet::Trustiness),
        Category::Facet(Facet::Bias),
        Category::Facet(Facet::Neutrality),
    ]
}

/// Which classifier produced a prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Source {
    Tree,
    Cfc,
    Svm,
    Ensemble,
}

impl Source {
    pub fn name(self) -> &'static str {
        match self {
            Source::Tree => "tree",
            Source::Cfc => "cfc",
            Source::Svm => "svm",
            Source::Ensemble => "ensemble",
        }
    }
}

/// Binary decision with confidence for one (host, category) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction<R: Real> {
    pub host: HostId,
    pub category: Category,
    pub positive: bool,
    pub confidence: R,
    pub source: Source,
}

impl<R: Real> Prediction<R> {
    pub fn new(
        host: HostId,
        category: Category,
        positive: bool,
        confidence: R,
        source: Source,
    ) -> Result<Self> {
        if !(confidence >= R::zero() && confidence <= R::one()) {
            return Err(Error::data(format!(
                "confidence {confidence} outside [0, 1]"
            )));
        }
        Ok(Prediction {
            host,
            category,
            positive,
            confidence,
            source,
        })
    }

    /// Single comparable positive-confidence scale used for ranking:
    /// the confidence itself for positive decisions, its complement
    /// otherwise.
    pub fn positive_scale(&self) -> R {
        if self.positive {
            self.confidence
        } else {
            R::one() - self.confidence
        }
    }
}

/// One row of a ranked list.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedItem<R: Real> {
    pub host: HostId,
    pub score: R,
    pub gain: R,
}

/// Ordered (host, score) pairs with gains attached; scores are
/// non-increasing and score ties are broken by ascending host id.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedList<R: Real> {
    items: Vec<RankedItem<R>>,
}

impl<R: Real> RankedList<R> {
    /// Build from unordered scores. Gains start at zero and are attached
    /// separately once ground truth is known.
    pub fn from_scores(scores: Vec<(HostId, R)>) -> Result<Self> {
        if let Some((host, score)) = scores.iter().find(|(_, s)| !s.is_finite()) {
            return Err(Error::data(format!(
                "score {score} for {host} is not finite"
            )));
        }
        let mut items: Vec<RankedItem<R>> = scores
            .into_iter()
            .map(|(host, score)| RankedItem {
                host,
                score,
                gain: R::zero(),
            })
            .collect();
        items.sort_by(|a, b| {
            b.score
                .partial_cmp(&a.score)
                .expect("scores are finite")
                .then_with(|| a.host.cmp(&b.host))
        });
        Ok(RankedList { items })
    }

    /// Attach a gain to every item, keeping the order.
    pub fn attach_gains<F>(&mut self, mut gain_of: F) -> Result<()>
    where
        F: FnMut(&HostId) -> Result<R>,
    {
        for item in &mut self.items {
            let g = gain_of(&item.host)?;
            if !(g >= R::zero()) {
                return Err(Error::data(format!(
                    "gain {g} for {} is negative or NaN",
                    item.host
                )));
            }
            item.gain = g;
        }
        Ok(())
    }

    pub fn items(&self) -> &[RankedItem<R>] {
        &self.items
    }

    pub fn gains(&self) -> Vec<R> {
        self.items.iter().map(|i| i.gain).collect()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn host(s: &str) -> HostId {
        HostId::new(s).unwrap()
    }

    #[test]
    fn universe_is_nine_categories_in_report_order() {
        let universe = category_universe();
        assert_eq!(universe.len(), 9);
        assert_eq!(universe[0], Category::Genre(GenreLabel::WebSpam));
        assert_eq!(universe[5], Category::Genre(GenreLabel::PersonalLeisure));
        assert_eq!(universe[6], Category::Facet(Facet::Trustiness));
        assert_eq!(universe[8], Category::Facet(Facet::Neutrality));
    }

    #[test]
    fn category_names_round_trip() {
        for cat in category_universe() {
            assert_eq!(Category::from_name(cat.canonical_name()), Some(cat));
        }
        assert_eq!(Category::from_name("Spam"), None);
    }

    #[test]
    fn empty_host_id_rejected() {
        assert!(HostId::new("").is_err());
    }

    #[test]
    fn facet_positive_levels_follow_training_view() {
        assert_eq!(Facet::Neutrality.positive_level(), Level::THREE);
        assert_eq!(Facet::Trustiness.positive_level(), Level::THREE);
        assert_eq!(Facet::Bias.positive_level(), Level::ONE);
    }

    #[test]
    fn level_outside_scale_rejected() {
        assert!(Level::new(0).is_err());
        assert!(Level::new(4).is_err());
        assert_eq!(Level::new(2).unwrap(), Level::TWO);
    }

    #[test]
    fn binary_class_uses_table_semantics() {
        let labels = LabelSet {
            genre: Some(GenreLabel::Commercial),
            neutrality: Some(Level::THREE),
            bias: Some(Level::THREE),
            trust: None,
        };
        assert_eq!(
            labels.binary_class(Category::Genre(GenreLabel::Commercial)),
            Some(true)
        );
        assert_eq!(
            labels.binary_class(Category::Genre(GenreLabel::WebSpam)),
            Some(false)
        );
        assert_eq!(
            labels.binary_class(Category::Facet(Facet::Neutrality)),
            Some(true)
        );
        assert_eq!(labels.binary_class(Category::Facet(Facet::Bias)), Some(false));
        assert_eq!(labels.binary_class(Category::Facet(Facet::Trustiness)), None);
    }

    #[test]
    fn sparse_vector_rejects_unsorted_and_out_of_range() {
        assert!(SparseTermVector::<f64>::new(vec![(3, 2), (7, 1)]).is_ok());
        assert!(SparseTermVector::<f64>::new(vec![(7, 1), (3, 2)]).is_err());
        assert!(SparseTermVector::<f64>::new(vec![(3, 2), (3, 5)]).is_err());
        assert!(SparseTermVector::<f64>::new(vec![(50_000, 1)]).is_err());
    }

    #[test]
    fn feature_block_checks_shape_and_finiteness() {
        let names: Arc<[String]> = vec!["a".to_string(), "b".to_string()].into();
        assert!(
            FeatureBlock::new(FeatureKind::Link, names.clone(), vec![1.0, 2.0]).is_ok()
        );
        assert!(FeatureBlock::new(FeatureKind::Link, names.clone(), vec![1.0]).is_err());
        assert!(
            FeatureBlock::new(FeatureKind::Link, names, vec![1.0, f64::NAN]).is_err()
        );
    }

    #[test]
    fn prediction_confidence_must_be_in_unit_interval() {
        let p = Prediction::new(
            host("h1"),
            Category::Genre(GenreLabel::WebSpam),
            true,
            0.5,
            Source::Tree,
        );
        assert!(p.is_ok());
        assert!(Prediction::new(
            host("h1"),
            Category::Genre(GenreLabel::WebSpam),
            true,
            1.5,
            Source::Tree
        )
        .is_err());
    }

    #[test]
    fn positive_scale_folds_negative_decisions() {
        let pos = Prediction::new(
            host("h1"),
            Category::Facet(Facet::Bias),
            true,
            0.9,
            Source::Ensemble,
        )
        .unwrap();
        let neg = Prediction::new(
            host("h2"),
            Category::Facet(Facet::Bias),
            false,
            0.9,
            Source::Ensemble,
        )
        .unwrap();
        assert_eq!(pos.positive_scale(), 0.9);
        assert!((neg.positive_scale() - 0.1_f64).abs() < 1e-15);
    }

    #[test]
    fn ranked_list_sorts_desc_then_breaks_ties_by_host() {
        let list = RankedList::from_scores(vec![
            (host("h3"), 0.5),
            (host("h1"), 0.9),
            (host("h4"), 0.5),
            (host("h2"), 0.5),
        ])
        .unwrap();
        let order: Vec<&str> = list.items().iter().map(|i| i.host.as_str()).collect();
        assert_eq!(order, ["h1", "h2", "h3", "h4"]);
    }

    #[test]
    fn ranked_list_construction_is_deterministic_under_permutation() {
        let scores = vec![
            (host("b"), 0.25),
            (host("a"), 0.25),
            (host("c"), 0.75),
            (host("d"), 0.25),
        ];
        let mut permuted = scores.clone();
        permuted.reverse();
        permuted.swap(0, 2);
        let first = RankedList::from_scores(scores).unwrap();
        let second = RankedList::from_scores(permuted).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn ranked_list_rejects_non_finite_scores_and_negative_gains() {
        assert!(RankedList::from_scores(vec![(host("h1"), f64::NAN)]).is_err());
        let mut list = RankedList::from_scores(vec![(host("h1"), 1.0)]).unwrap();
        assert!(list.attach_gains(|_| Ok(-1.0)).is_err());
        assert!(list.attach_gains(|_| Ok(2.0)).is_ok());
        assert_eq!(list.gains(), vec![2.0]);
    }
}
