//! Per-category training of the three classifiers on their feature
//! families, majority voting with max-confidence assignment, genre
//! resolution, and the optional news re-check.
//!
//! Every category trains one-vs-rest: the tree on normalized link+content
//! rows with SMOTE applied to the minority class, the centroid classifier
//! on tf-idf term vectors, and the SVM on normalized page vectors with the
//! host decision aggregated from page margins. Multilingual mode trains
//! the tree alone. A host with no crawled pages loses only its SVM vote.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cfc::{self, CfcModel};
use crate::dtree::{self, TreeConfig, TreeNode};
use crate::error::{Error, Result};
use crate::ingest::{tfidf_weight, Dataset, HostRecord};
use crate::linsvm::{self, SvmConfig, SvmModel};
use crate::model::{
    category_universe, Category, Dictionary, FeatureBlock, GenreLabel, HostId, LabelSet,
    Prediction, RankedList, Source,
};
use crate::preprocess::{fit_normalizer, smote_oversample, NormalizationModel, SmoteConfig};
use crate::scalar::Real;

/// Feature-set availability mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// All three classifiers on their own feature families.
    Standard,
    /// Tree only, on link+content: the cross-language configuration.
    Multilingual,
}

/// Training configuration bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnsembleConfig {
    pub mode: Mode,
    pub tree: TreeConfig,
    pub smote: SmoteConfig,
    pub svm: SvmConfig,
    pub cfc_b: f64,
    /// Train the five news-vs-genre models needed by the news re-check.
    pub train_news_pairwise: bool,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            mode: Mode::Standard,
            tree: TreeConfig::default(),
            smote: SmoteConfig::default(),
            svm: SvmConfig::default(),
            cfc_b: std::f64::consts::E,
            train_news_pairwise: false,
        }
    }
}

/// Tree plus the normalizer fitted on its training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeVoter<R: Real> {
    pub normalizer: NormalizationModel<R>,
    pub tree: TreeNode<R>,
}

/// SVM plus the normalizer fitted on its page rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmVoter<R: Real> {
    pub normalizer: NormalizationModel<R>,
    pub model: SvmModel<R>,
}

/// The trained sub-models for one category. Absent entries reflect the
/// mode (multilingual keeps only the tree) or a feature family that had no
/// usable training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryModel<R: Real> {
    pub category: Category,
    pub tree: Option<TreeVoter<R>>,
    pub cfc: Option<CfcModel<R>>,
    pub svm: Option<SvmVoter<R>>,
}

/// The full trained ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleModel<R: Real> {
    pub mode: Mode,
    pub dictionary: Option<Dictionary>,
    pub categories: Vec<CategoryModel<R>>,
    /// News-vs-genre models for the post-processing re-check, keyed by the
    /// opposing genre. Empty unless trained.
    pub news_pairwise: Vec<(GenreLabel, CategoryModel<R>)>,
}

/// One classifier's contribution to a vote.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubVote<R: Real> {
    pub source: Source,
    pub positive: bool,
    pub confidence: R,
}

/// Majority decision for one (host, category) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct VoteResult<R: Real> {
    pub host: HostId,
    pub category: Category,
    pub votes: Vec<SubVote<R>>,
    pub winner: bool,
    pub confidence: R,
}

impl<R: Real> VoteResult<R> {
    /// Ranking score on the shared positive-confidence scale.
    pub fn positive_scale(&self) -> R {
        if self.winner {
            self.confidence
        } else {
            R::one() - self.confidence
        }
    }
}

/// Combine classifier votes: strict majority wins and takes the maximum
/// confidence among winner-side voters. A two-voter disagreement goes to
/// the strictly more confident voter; an exact confidence tie goes
/// negative.
pub fn combine_votes<R: Real>(votes: &[SubVote<R>]) -> Result<(bool, R)> {
    if votes.is_empty() {
        return Err(Error::data("no classifier votes to combine"));
    }
    let positives = votes.iter().filter(|v| v.positive).count();
    let negatives = votes.len() - positives;
    let winner = if positives != negatives {
        positives > negatives
    } else {
        // Tied panel: the side holding the strictly highest confidence
        // wins; a confidence tie resolves negative.
        let side_max = |side: bool| {
            votes
                .iter()
                .filter(|v| v.positive == side)
                .map(|v| v.confidence)
                .fold(R::zero(), |acc, c| acc.max(c))
        };
        side_max(true) > side_max(false)
    };
    let confidence = votes
        .iter()
        .filter(|v| v.positive == winner)
        .map(|v| v.confidence)
        .fold(R::zero(), |acc, c| acc.max(c));
    Ok((winner, confidence))
}

/// Confidence multiplier applied by the news re-check when more than two
/// pairwise verdicts disagree.
pub fn apply_news_rule<R: Real>(confidence: R, non_news_verdicts: usize) -> R {
    if non_news_verdicts > 2 {
        confidence * R::from_f64_const(0.4)
    } else {
        confidence
    }
}

fn concat_features<R: Real>(host: &HostRecord<R>) -> Vec<R> {
    let mut row = Vec::with_capacity(host.link.len() + host.content.len());
    row.extend_from_slice(host.link.values());
    row.extend_from_slice(host.content.values());
    row
}

/// Train the sub-models of one binary problem over the given participant
/// hosts (indices into `train.hosts` with their binary labels).
fn train_category_model<R: Real>(
    train: &Dataset<R>,
    participants: &[(usize, bool)],
    category: Category,
    cfg: &EnsembleConfig,
) -> Result<CategoryModel<R>> {
    let name = category.canonical_name();
    let positives = participants.iter().filter(|(_, y)| *y).count();
    let negatives = participants.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::data(format!(
            "category {name} has {positives} positive and {negatives} negative training hosts"
        )));
    }

    // Tree on link+content, SMOTE-balanced.
    let rows: Vec<Vec<R>> = participants
        .iter()
        .map(|&(i, _)| concat_features(&train.hosts[i]))
        .collect();
    let labels: Vec<bool> = participants.iter().map(|&(_, y)| y).collect();
    let normalizer = fit_normalizer(&rows)?;
    let mut normalized: Vec<Vec<R>> = rows
        .iter()
        .map(|r| normalizer.apply(r))
        .collect::<Result<_>>()?;
    let mut tree_labels = labels.clone();
    let minority_label = match positives.cmp(&negatives) {
        std::cmp::Ordering::Less => Some(true),
        std::cmp::Ordering::Greater => Some(false),
        std::cmp::Ordering::Equal => None,
    };
    if let Some(minority_label) = minority_label {
        let minority_rows: Vec<Vec<R>> = normalized
            .iter()
            .zip(&tree_labels)
            .filter(|(_, &y)| y == minority_label)
            .map(|(r, _)| r.clone())
            .collect();
        if minority_rows.len() >= 2 {
            for synthetic in smote_oversample(&minority_rows, &cfg.smote)? {
                normalized.push(synthetic);
                tree_labels.push(minority_label);
            }
        }
    }
    let tree = dtree::train_tree(&normalized, &tree_labels, &cfg.tree)?;
    let tree = Some(TreeVoter { normalizer, tree });

    if cfg.mode == Mode::Multilingual {
        return Ok(CategoryModel {
            category,
            tree,
            cfc: None,
            svm: None,
        });
    }

    // Centroids on tf-idf term vectors.
    let dictionary = train
        .dictionary
        .as_ref()
        .ok_or_else(|| Error::data("standard mode needs the term dictionary"))?;
    let docs: Vec<(crate::model::SparseTermVector<R>, String)> = participants
        .iter()
        .map(|&(i, y)| {
            let weighted = tfidf_weight(&train.hosts[i].terms, dictionary)?;
            let class = if y { cfc::POSITIVE } else { cfc::NEGATIVE };
            Ok((weighted, class.to_string()))
        })
        .collect::<Result<_>>()?;
    let cfc_model = Some(cfc::build_centroids(&docs, R::from_f64_const(cfg.cfc_b))?);

    // SVM on page vectors; skipped when a class contributes no pages.
    let mut page_rows: Vec<Vec<R>> = Vec::new();
    let mut page_labels: Vec<bool> = Vec::new();
    for &(i, y) in participants {
        if let Some(pages) = train.pages_of(&train.hosts[i].id) {
            for page in pages {
                page_rows.push(page.values().to_vec());
                page_labels.push(y);
            }
        }
    }
    let svm = if page_labels.iter().any(|&y| y) && page_labels.iter().any(|&y| !y) {
        let normalizer = fit_normalizer(&page_rows)?;
        let normalized: Vec<Vec<R>> = page_rows
            .iter()
            .map(|r| normalizer.apply(r))
            .collect::<Result<_>>()?;
        let model = linsvm::train_svm(&normalized, &page_labels, &cfg.svm)?;
        Some(SvmVoter { normalizer, model })
    } else {
        None
    };

    Ok(CategoryModel {
        category,
        tree,
        cfc: cfc_model,
        svm,
    })
}

/// Train one binary model per category; optionally also the five
/// news-vs-genre models used by the news re-check.
pub fn train_ensemble<R: Real>(train: &Dataset<R>, cfg: &EnsembleConfig) -> Result<EnsembleModel<R>> {
    cfg.tree.validate()?;
    cfg.smote.validate()?;
    cfg.svm.validate()?;
    if !(cfg.cfc_b > 1.0) {
        return Err(Error::config(format!("cfc base {} must exceed 1", cfg.cfc_b)));
    }

    let categories: Vec<CategoryModel<R>> = category_universe()
        .into_par_iter()
        .map(|category| {
            let participants: Vec<(usize, bool)> = train
                .hosts
                .iter()
                .enumerate()
                .filter_map(|(i, host)| {
                    let labels = train.labels.get(&host.id)?;
                    labels.binary_class(category).map(|y| (i, y))
                })
                .collect();
            train_category_model(train, &participants, category, cfg)
        })
        .collect::<Result<_>>()?;

    let news_pairwise = if cfg.train_news_pairwise && cfg.mode == Mode::Standard {
        GenreLabel::ALL
            .into_par_iter()
            .filter(|&g| g != GenreLabel::NewsEditorial)
            .map(|opponent| {
                let participants: Vec<(usize, bool)> = train
                    .hosts
                    .iter()
                    .enumerate()
                    .filter_map(|(i, host)| {
                        match train.labels.get(&host.id).and_then(|l| l.genre) {
                            Some(g) if g == GenreLabel::NewsEditorial => Some((i, true)),
                            Some(g) if g == opponent => Some((i, false)),
                            _ => None,
                        }
                    })
                    .collect();
                let model = train_category_model(
                    train,
                    &participants,
                    Category::Genre(GenreLabel::NewsEditorial),
                    cfg,
                )
                .map_err(|e| {
                    Error::data(format!(
                        "news-vs-{} pairwise model: {e}",
                        opponent.canonical_name()
                    ))
                })?;
                Ok((opponent, model))
            })
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };

    Ok(EnsembleModel {
        mode: cfg.mode,
        dictionary: if cfg.mode == Mode::Standard {
            train.dictionary.clone()
        } else {
            None
        },
        categories,
        news_pairwise,
    })
}

/// Prediction-time switches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PredictOptions {
    pub news_postprocess: bool,
}

/// Predicted labels plus the genre confidence on the positive scale.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment<R: Real> {
    pub labels: LabelSet,
    pub genre_confidence: R,
}

/// Everything the ensemble produces for a test set.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictOutput<R: Real> {
    /// Host-major, category-universe order.
    pub votes: Vec<VoteResult<R>>,
    pub rankings: Vec<(Category, RankedList<R>)>,
    pub assignments: BTreeMap<HostId, Assignment<R>>,
}

impl<R: Real> PredictOutput<R> {
    pub fn vote_for(&self, host: &HostId, category: Category) -> Option<&VoteResult<R>> {
        self.votes
            .iter()
            .find(|v| v.host == *host && v.category == category)
    }
}

/// Resolve one genre from the six per-genre votes: the most confident
/// positive wins; with no positives, the genre with the largest positive
/// evidence (one minus the negative confidence). Ties keep the earlier
/// genre in universe order. Returns the winner with its confidence on the
/// positive scale.
pub fn assign_genre<R: Real>(genre_votes: &[&VoteResult<R>]) -> Result<(GenreLabel, R)> {
    let mut ordered = Vec::with_capacity(6);
    for genre in GenreLabel::ALL {
        let vote = genre_votes
            .iter()
            .find(|v| v.category == Category::Genre(genre))
            .ok_or_else(|| {
                Error::Internal(format!("missing genre vote for {genre} in assignment"))
            })?;
        ordered.push((genre, vote));
    }
    let positive_best = ordered
        .iter()
        .filter(|(_, v)| v.winner)
        .fold(None::<(GenreLabel, R)>, |best, (g, v)| match best {
            Some((_, c)) if c >= v.confidence => best,
            _ => Some((*g, v.confidence)),
        });
    if let Some(best) = positive_best {
        return Ok(best);
    }
    let fallback = ordered
        .iter()
        .fold(None::<(GenreLabel, R)>, |best, (g, v)| {
            let evidence = v.positive_scale();
            match best {
                Some((_, c)) if c >= evidence => best,
                _ => Some((*g, evidence)),
            }
        })
        .expect("six genres always present");
    Ok(fallback)
}

impl<R: Real> EnsembleModel<R> {
    fn category_model(&self, category: Category) -> Result<&CategoryModel<R>> {
        self.categories
            .iter()
            .find(|m| m.category == category)
            .ok_or_else(|| {
                Error::data(format!(
                    "ensemble has no model for category {}",
                    category.canonical_name()
                ))
            })
    }

    fn sub_votes(
        &self,
        model: &CategoryModel<R>,
        host: &HostRecord<R>,
        pages: Option<&[FeatureBlock<R>]>,
    ) -> Result<Vec<SubVote<R>>> {
        let mut votes = Vec::with_capacity(3);
        if let Some(tree) = &model.tree {
            let row = tree.normalizer.apply(&concat_features(host))?;
            let (positive, confidence) = dtree::predict_tree(&tree.tree, &row)?;
            votes.push(SubVote {
                source: Source::Tree,
                positive,
                confidence,
            });
        }
        if let Some(cfc_model) = &model.cfc {
            let dictionary = self
                .dictionary
                .as_ref()
                .ok_or_else(|| Error::Internal("cfc model without a dictionary".into()))?;
            let weighted = tfidf_weight(&host.terms, dictionary)?;
            let (positive, confidence) = cfc_model.classify_binary(&weighted)?;
            votes.push(SubVote {
                source: Source::Cfc,
                positive,
                confidence,
            });
        }
        if let Some(svm) = &model.svm {
            // A host with no crawled pages loses only this vote.
            if let Some(pages) = pages.filter(|p| !p.is_empty()) {
                let margins: Vec<R> = pages
                    .iter()
                    .map(|page| {
                        let row = svm.normalizer.apply(page.values())?;
                        svm.model.margin(&row)
                    })
                    .collect::<Result<_>>()?;
                let (positive, confidence) = linsvm::host_score_from_pages(&margins)?;
                votes.push(SubVote {
                    source: Source::Svm,
                    positive,
                    confidence,
                });
            }
        }
        Ok(votes)
    }

    /// Majority vote for one (host, category) pair.
    pub fn vote(
        &self,
        host: &HostRecord<R>,
        pages: Option<&[FeatureBlock<R>]>,
        category: Category,
    ) -> Result<VoteResult<R>> {
        let model = self.category_model(category)?;
        let votes = self.sub_votes(model, host, pages)?;
        let (winner, confidence) = combine_votes(&votes)?;
        Ok(VoteResult {
            host: host.id.clone(),
            category,
            votes,
            winner,
            confidence,
        })
    }

    /// Count non-news verdicts among the five pairwise models and apply
    /// the confidence rule to a news-predicted host.
    pub fn news_postprocess(
        &self,
        host: &HostRecord<R>,
        pages: Option<&[FeatureBlock<R>]>,
        news_confidence: R,
    ) -> Result<R> {
        if self.news_pairwise.len() != 5 {
            return Err(Error::data(
                "news re-check needs the five pairwise models (train with news pairwise enabled)",
            ));
        }
        let mut non_news = 0;
        for (_, model) in &self.news_pairwise {
            let votes = self.sub_votes(model, host, pages)?;
            let (winner, _) = combine_votes(&votes)?;
            if !winner {
                non_news += 1;
            }
        }
        Ok(apply_news_rule(news_confidence, non_news))
    }

    /// Vote on every (host, category) pair, rank every category, and
    /// assign genres and facet levels.
    pub fn predict_all(&self, test: &Dataset<R>, opts: &PredictOptions) -> Result<PredictOutput<R>> {
        let mut output = self.predict_base(test)?;
        if opts.news_postprocess {
            self.rerank_news(test, &mut output)?;
        }
        Ok(output)
    }

    fn predict_base(&self, test: &Dataset<R>) -> Result<PredictOutput<R>> {
        let universe = category_universe();
        let per_host: Vec<Vec<VoteResult<R>>> = test
            .hosts
            .par_iter()
            .map(|host| {
                let pages = test.pages_of(&host.id);
                universe
                    .iter()
                    .map(|&category| self.vote(host, pages, category))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;

        let mut assignments = BTreeMap::new();
        for votes in &per_host {
            let genre_votes: Vec<&VoteResult<R>> = votes
                .iter()
                .filter(|v| matches!(v.category, Category::Genre(_)))
                .collect();
            let (genre, genre_confidence) = assign_genre(&genre_votes)?;
            let mut labels = LabelSet {
                genre: Some(genre),
                ..LabelSet::default()
            };
            for vote in votes {
                if let Category::Facet(facet) = vote.category {
                    let level = if vote.winner {
                        facet.positive_level()
                    } else {
                        facet.negative_level()
                    };
                    match facet {
                        crate::model::Facet::Neutrality => labels.neutrality = Some(level),
                        crate::model::Facet::Bias => labels.bias = Some(level),
                        crate::model::Facet::Trustiness => labels.trust = Some(level),
                    }
                }
            }
            assignments.insert(
                votes[0].host.clone(),
                Assignment {
                    labels,
                    genre_confidence,
                },
            );
        }

        let votes: Vec<VoteResult<R>> = per_host.into_iter().flatten().collect();
        let rankings = universe
            .iter()
            .map(|&category| {
                let scores: Vec<(HostId, R)> = votes
                    .iter()
                    .filter(|v| v.category == category)
                    .map(|v| (v.host.clone(), v.positive_scale()))
                    .collect();
                Ok((category, RankedList::from_scores(scores)?))
            })
            .collect::<Result<Vec<_>>>()?;

        Ok(PredictOutput {
            votes,
            rankings,
            assignments,
        })
    }

    /// Apply the news re-check: for every host assigned the news genre,
    /// scale its genre confidence and its news-ranking score by the rule
    /// factor, then re-sort the news ranking. Raw votes stay untouched.
    fn rerank_news(&self, test: &Dataset<R>, output: &mut PredictOutput<R>) -> Result<()> {
        let news = Category::Genre(GenreLabel::NewsEditorial);
        let mut adjusted: BTreeMap<HostId, R> = BTreeMap::new();
        for host in &test.hosts {
            let assignment = output
                .assignments
                .get_mut(&host.id)
                .ok_or_else(|| Error::Internal(format!("no assignment for {}", host.id)))?;
            if assignment.labels.genre != Some(GenreLabel::NewsEditorial) {
                continue;
            }
            let pages = test.pages_of(&host.id);
            let updated = self.news_postprocess(host, pages, assignment.genre_confidence)?;
            if updated != assignment.genre_confidence {
                assignment.genre_confidence = updated;
                adjusted.insert(host.id.clone(), updated);
            }
        }
        if adjusted.is_empty() {
            return Ok(());
        }
        for (category, ranking) in &mut output.rankings {
            if *category != news {
                continue;
            }
            let scores: Vec<(HostId, R)> = ranking
                .items()
                .iter()
                .map(|item| {
                    let score = adjusted.get(&item.host).copied().unwrap_or(item.score);
                    (item.host.clone(), score)
                })
                .collect();
            *ranking = RankedList::from_scores(scores)?;
        }
        Ok(())
    }
}

/// Write ensemble votes as `host<TAB>category<TAB>decision<TAB>confidence`
/// rows under the `predictions/1` tag.
pub fn write_predictions<R: Real, W: Write>(
    votes: &[VoteResult<R>],
    out: &mut W,
) -> std::io::Result<()> {
    writeln!(out, "#predictions/1")?;
    for vote in votes {
        writeln!(
            out,
            "{}\t{}\t{}\t{}",
            vote.host,
            vote.category.canonical_name(),
            if vote.winner { "positive" } else { "negative" },
            vote.confidence
        )?;
    }
    Ok(())
}

/// Parse a `predictions/1` file back into ensemble-sourced predictions.
pub fn parse_predictions<R: Real>(path: &Path) -> Result<Vec<Prediction<R>>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut predictions = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cells: Vec<&str> = line.split('\t').collect();
        if cells.len() != 4 {
            return Err(Error::parse(
                path,
                line_no,
                format!("expected 4 cells, found {}", cells.len()),
            ));
        }
        let host = HostId::new(cells[0])
            .map_err(|_| Error::parse(path, line_no, "empty host id"))?;
        let category = Category::from_name(cells[1])
            .ok_or_else(|| Error::parse(path, line_no, format!("unknown category {:?}", cells[1])))?;
        let positive = match cells[2] {
            "positive" => true,
            "negative" => false,
            other => {
                return Err(Error::parse(
                    path,
                    line_no,
                    format!("decision {other:?} is not positive/negative"),
                ))
            }
        };
        let confidence = cells[3]
            .parse::<f64>()
            .ok()
            .map(R::from_f64_const)
            .ok_or_else(|| Error::parse(path, line_no, format!("bad confidence {:?}", cells[3])))?;
        predictions.push(
            Prediction::new(host, category, positive, confidence, Source::Ensemble)
                .map_err(|e| Error::parse(path, line_no, e.to_string()))?,
        );
    }
    Ok(predictions)
}

/// Write predicted label assignments in the labels file format under the
/// `assignments/1` tag.
pub fn write_assignments<R: Real, W: Write>(
    assignments: &BTreeMap<HostId, Assignment<R>>,
    out: &mut W,
) -> std::io::Result<()> {
    writeln!(out, "#assignments/1")?;
    for (host, assignment) in assignments {
        let labels = &assignment.labels;
        let facet = |level: Option<crate::model::Level>| {
            level.map_or("-".to_string(), |l| l.to_string())
        };
        writeln!(
            out,
            "{host}\t{}\t{}\t{}\t{}",
            labels.genre.map_or("-", |g| g.canonical_name()),
            facet(labels.neutrality),
            facet(labels.bias),
            facet(labels.trust),
        )?;
    }
    Ok(())
}

// ── model persistence ──

const FORMAT_TAG: &str = "ensemble/1";
const DICTIONARY_FILE: &str = "dictionary.tsv";

fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::Standard => "standard",
        Mode::Multilingual => "multilingual",
    }
}

fn norm_line<R: Real>(prefix: &str, values: &[R]) -> String {
    let mut line = prefix.to_string();
    for v in values {
        line.push(' ');
        line.push_str(&v.to_string());
    }
    line
}

fn parse_norm_line<R: Real>(line: &str, prefix: &str) -> Result<Vec<R>> {
    line.strip_prefix(prefix)
        .map(|rest| {
            rest.split(' ')
                .filter(|t| !t.is_empty())
                .map(|t| t.parse::<f64>().ok().map(R::from_f64_const))
                .collect::<Option<Vec<R>>>()
        })
        .flatten()
        .ok_or_else(|| Error::data(format!("bad {prefix} line in ensemble index")))
}

fn save_category<R: Real>(
    dir: &Path,
    stem: &str,
    model: &CategoryModel<R>,
    index: &mut String,
) -> Result<()> {
    let write_to = |name: &str, contents: Vec<u8>| -> Result<()> {
        let path = dir.join(name);
        fs::write(&path, contents).map_err(|e| Error::io(&path, e))
    };
    if let Some(tree) = &model.tree {
        let file = format!("{stem}.tree.txt");
        let mut buf = Vec::new();
        dtree::write_tree(&tree.tree, &mut buf).map_err(|e| Error::Internal(e.to_string()))?;
        write_to(&file, buf)?;
        index.push_str(&format!("tree {file}\n"));
        index.push_str(&norm_line("tree_norm_min", tree.normalizer.mins()));
        index.push('\n');
        index.push_str(&norm_line("tree_norm_max", tree.normalizer.maxs()));
        index.push('\n');
    }
    if let Some(cfc_model) = &model.cfc {
        let file = format!("{stem}.cfc.txt");
        let mut buf = Vec::new();
        cfc::write_cfc(cfc_model, &mut buf).map_err(|e| Error::Internal(e.to_string()))?;
        write_to(&file, buf)?;
        index.push_str(&format!("cfc {file}\n"));
    }
    if let Some(svm) = &model.svm {
        let file = format!("{stem}.svm.txt");
        let mut buf = Vec::new();
        linsvm::write_svm(&svm.model, &mut buf).map_err(|e| Error::Internal(e.to_string()))?;
        write_to(&file, buf)?;
        index.push_str(&format!("svm {file}\n"));
        index.push_str(&norm_line("svm_norm_min", svm.normalizer.mins()));
        index.push('\n');
        index.push_str(&norm_line("svm_norm_max", svm.normalizer.maxs()));
        index.push('\n');
    }
    Ok(())
}

impl<R: Real> EnsembleModel<R> {
    /// Persist the model into a directory: an `ensemble/1` index plus one
    /// file per sub-model, and the dictionary when present.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut index = format!("{FORMAT_TAG}\nmode {}\n", mode_name(self.mode));
        if let Some(dictionary) = &self.dictionary {
            let path = dir.join(DICTIONARY_FILE);
            let mut buf = Vec::new();
            crate::harness::write_dictionary(dictionary, &mut buf)
                .map_err(|e| Error::Internal(e.to_string()))?;
            fs::write(&path, buf).map_err(|e| Error::io(&path, e))?;
            index.push_str(&format!("dictionary {DICTIONARY_FILE}\n"));
        }
        for model in &self.categories {
            index.push_str(&format!("category {}\n", model.category.slug()));
            save_category(dir, model.category.slug(), model, &mut index)?;
        }
        for (opponent, model) in &self.news_pairwise {
            index.push_str(&format!("pairwise {}\n", opponent.slug()));
            let stem = format!("news_vs_{}", opponent.slug());
            save_category(dir, &stem, model, &mut index)?;
        }
        let index_path = dir.join("ensemble.txt");
        fs::write(&index_path, index).map_err(|e| Error::io(&index_path, e))
    }

    /// Load a model previously written by [`EnsembleModel::save`].
    pub fn load(dir: &Path) -> Result<Self> {
        let index_path = dir.join("ensemble.txt");
        let text = fs::read_to_string(&index_path).map_err(|e| Error::io(&index_path, e))?;
        let mut lines = text.lines().peekable();
        if lines.next() != Some(FORMAT_TAG) {
            return Err(Error::data(format!("expected {FORMAT_TAG} header")));
        }
        let mode = match lines.next().and_then(|l| l.strip_prefix("mode ")) {
            Some("standard") => Mode::Standard,
            Some("multilingual") => Mode::Multilingual,
            other => return Err(Error::data(format!("bad mode line {other:?}"))),
        };
        let mut dictionary = None;
        if let Some(line) = lines.peek() {
            if let Some(file) = line.strip_prefix("dictionary ") {
                dictionary = Some(crate::ingest::parse_dictionary(&dir.join(file))?);
                lines.next();
            }
        }

        let mut categories = Vec::new();
        let mut news_pairwise = Vec::new();
        while let Some(line) = lines.next() {
            if line.is_empty() {
                continue;
            }
            let (kind, name) = line
                .split_once(' ')
                .ok_or_else(|| Error::data(format!("bad index line {line:?}")))?;
            let category = match kind {
                "category" => Category::from_name(&name.replace('_', "/"))
                    .or_else(|| Category::from_name(name))
                    .ok_or_else(|| Error::data(format!("unknown category slug {name:?}")))?,
                "pairwise" => Category::Genre(GenreLabel::NewsEditorial),
                other => return Err(Error::data(format!("unknown index record {other:?}"))),
            };

            let mut tree = None;
            let mut cfc_model = None;
            let mut svm = None;
            while let Some(&next) = lines.peek() {
                if next.starts_with("category ") || next.starts_with("pairwise ") {
                    break;
                }
                let line = lines.next().expect("peeked");
                if let Some(file) = line.strip_prefix("tree ") {
                    let text = fs::read(dir.join(file))
                        .map_err(|e| Error::io(&dir.join(file), e))?;
                    let node = dtree::read_tree(&mut text.as_slice())?;
                    let mins = parse_norm_line(
                        lines.next().unwrap_or_default(),
                        "tree_norm_min",
                    )?;
                    let maxs = parse_norm_line(
                        lines.next().unwrap_or_default(),
                        "tree_norm_max",
                    )?;
                    tree = Some(TreeVoter {
                        normalizer: NormalizationModel::from_bounds(mins, maxs)?,
                        tree: node,
                    });
                } else if let Some(file) = line.strip_prefix("cfc ") {
                    let text = fs::read(dir.join(file))
                        .map_err(|e| Error::io(&dir.join(file), e))?;
                    cfc_model = Some(cfc::read_cfc(&mut text.as_slice())?);
                } else if let Some(file) = line.strip_prefix("svm ") {
                    let text = fs::read(dir.join(file))
                        .map_err(|e| Error::io(&dir.join(file), e))?;
                    let model = linsvm::read_svm(&mut text.as_slice())?;
                    let mins =
                        parse_norm_line(lines.next().unwrap_or_default(), "svm_norm_min")?;
                    let maxs =
                        parse_norm_line(lines.next().unwrap_or_default(), "svm_norm_max")?;
                    svm = Some(SvmVoter {
                        normalizer: NormalizationModel::from_bounds(mins, maxs)?,
                        model,
                    });
                } else {
                    return Err(Error::data(format!("unexpected index line {line:?}")));
                }
            }
            let model = CategoryModel {
                category,
                tree,
                cfc: cfc_model,
                svm,
            };
            if kind == "pairwise" {
                let opponent = GenreLabel::ALL
                    .into_iter()
                    .find(|g| g.slug() == name)
                    .ok_or_else(|| Error::data(format!("unknown genre slug {name:?}")))?;
                news_pairwise.push((opponent, model));
            } else {
                categories.push(model);
            }
        }
        Ok(EnsembleModel {
            mode,
            dictionary,
            categories,
            news_pairwise,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sv(source: Source, positive: bool, confidence: f64) -> SubVote<f64> {
        SubVote {
            source,
            positive,
            confidence,
        }
    }

    #[test]
    fn majority_takes_max_confidence_of_winning_side() {
        let votes = [
            sv(Source::Tree, true, 0.9),
            sv(Source::Cfc, true, 0.6),
            sv(Source::Svm, false, 0.99),
        ];
        let (winner, confidence) = combine_votes(&votes).unwrap();
        assert!(winner);
        assert_eq!(confidence, 0.9);
    }

    #[test]
    fn two_voter_tie_goes_to_the_more_confident() {
        let votes = [sv(Source::Tree, true, 0.8), sv(Source::Cfc, false, 0.6)];
        let (winner, confidence) = combine_votes(&votes).unwrap();
        assert!(winner);
        assert_eq!(confidence, 0.8);

        let votes = [sv(Source::Tree, true, 0.6), sv(Source::Cfc, false, 0.8)];
        let (winner, confidence) = combine_votes(&votes).unwrap();
        assert!(!winner);
        assert_eq!(confidence, 0.8);
    }

    #[test]
    fn two_voter_equal_confidence_resolves_negative() {
        let votes = [sv(Source::Tree, true, 0.7), sv(Source::Svm, false, 0.7)];
        let (winner, confidence) = combine_votes(&votes).unwrap();
        assert!(!winner);
        assert_eq!(confidence, 0.7);
    }

    #[test]
    fn unanimous_negative_panel() {
        let votes = [
            sv(Source::Tree, false, 0.5),
            sv(Source::Cfc, false, 0.5),
            sv(Source::Svm, false, 0.5),
        ];
        let (winner, confidence) = combine_votes(&votes).unwrap();
        assert!(!winner);
        assert_eq!(confidence, 0.5);
    }

    #[test]
    fn empty_panel_is_an_error() {
        assert!(combine_votes::<f64>(&[]).is_err());
    }

    #[test]
    fn vote_combination_is_permutation_invariant() {
        let votes = [
            sv(Source::Tree, true, 0.61),
            sv(Source::Cfc, false, 0.93),
            sv(Source::Svm, true, 0.87),
        ];
        let reference = combine_votes(&votes).unwrap();
        let permutations = [
            [votes[0], votes[1], votes[2]],
            [votes[0], votes[2], votes[1]],
            [votes[1], votes[0], votes[2]],
            [votes[1], votes[2], votes[0]],
            [votes[2], votes[0], votes[1]],
            [votes[2], votes[1], votes[0]],
        ];
        for p in permutations {
            assert_eq!(combine_votes(&p).unwrap(), reference);
        }
    }

    #[test]
    fn news_rule_applies_only_above_two_verdicts() {
        assert_eq!(apply_news_rule(0.8_f64, 3), 0.8 * 0.4);
        assert_eq!(apply_news_rule(0.8_f64, 2), 0.8);
        assert_eq!(apply_news_rule(0.0_f64, 5), 0.0);
    }

    #[test]
    fn news_rule_never_increases_confidence() {
        for verdicts in 0..=5 {
            for &c in &[0.0_f64, 0.3, 0.9, 1.0] {
                assert!(apply_news_rule(c, verdicts) <= c);
            }
        }
    }

    fn vote_result(category: Category, winner: bool, confidence: f64) -> VoteResult<f64> {
        VoteResult {
            host: HostId::new("h1").unwrap(),
            category,
            votes: vec![],
            winner,
            confidence,
        }
    }

    #[test]
    fn genre_assignment_prefers_confident_positives() {
        let mut votes: Vec<VoteResult<f64>> = GenreLabel::ALL
            .into_iter()
            .map(|g| vote_result(Category::Genre(g), false, 0.9))
            .collect();
        votes[2] = vote_result(Category::Genre(GenreLabel::Commercial), true, 0.8);
        votes[4] = vote_result(Category::Genre(GenreLabel::Discussion), true, 0.9);
        let refs: Vec<&VoteResult<f64>> = votes.iter().collect();
        let (genre, confidence) = assign_genre(&refs).unwrap();
        assert_eq!(genre, GenreLabel::Discussion);
        assert_eq!(confidence, 0.9);
    }

    #[test]
    fn genre_assignment_falls_back_to_least_negative() {
        let confidences = [0.9, 0.8, 0.7, 0.85, 0.6, 0.55];
        let votes: Vec<VoteResult<f64>> = GenreLabel::ALL
            .into_iter()
            .zip(confidences)
            .map(|(g, c)| vote_result(Category::Genre(g), false, c))
            .collect();
        let refs: Vec<&VoteResult<f64>> = votes.iter().collect();
        let (genre, confidence) = assign_genre(&refs).unwrap();
        assert_eq!(genre, GenreLabel::PersonalLeisure);
        assert!((confidence - 0.45).abs() < 1e-12);
    }

    #[test]
    fn single_positive_genre_wins_directly() {
        let mut votes: Vec<VoteResult<f64>> = GenreLabel::ALL
            .into_iter()
            .map(|g| vote_result(Category::Genre(g), false, 0.95))
            .collect();
        votes[2] = vote_result(Category::Genre(GenreLabel::Commercial), true, 0.8);
        let refs: Vec<&VoteResult<f64>> = votes.iter().collect();
        let (genre, confidence) = assign_genre(&refs).unwrap();
        assert_eq!(genre, GenreLabel::Commercial);
        assert_eq!(confidence, 0.8);
    }
}
