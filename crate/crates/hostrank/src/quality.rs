//! The utility-score rule and quality rankings.
//!
//! A host's utility is an integer aggregate of its genre and facets: base
//! value 5 for news/editorial and educational/research, 4 for discussion,
//! 3 for commercial and personal/leisure, 0 for web spam; then +2 for
//! neutrality 3, -2 for bias 1, +2 for trustiness 3. The score ranges over
//! [-2, 9]. Quality rankings sort by utility, break ties by genre
//! confidence and then host id, and attach `max(score, 0)` as the gain.

use std::collections::BTreeMap;
use std::io::Write;

use crate::ensemble::{EnsembleModel, Mode, PredictOptions};
use crate::error::{Error, Result};
use crate::ingest::Dataset;
use crate::model::{GenreLabel, HostId, LabelSet, Level, RankedList};
use crate::scalar::Real;

/// The integer utility rule.
pub fn utility_score(genre: GenreLabel, neutrality: Level, bias: Level, trust: Level) -> i32 {
    let mut value = match genre {
        GenreLabel::NewsEditorial | GenreLabel::EducationalResearch => 5,
        GenreLabel::Discussion => 4,
        GenreLabel::Commercial | GenreLabel::PersonalLeisure => 3,
        GenreLabel::WebSpam => 0,
    };
    if neutrality == Level::THREE {
        value += 2;
    }
    if bias == Level::ONE {
        value -= 2;
    }
    if trust == Level::THREE {
        value += 2;
    }
    value
}

fn complete_labels(host: &HostId, labels: &LabelSet) -> Result<(GenreLabel, Level, Level, Level)> {
    let missing = |what: &str| {
        Error::data(format!("host {host} has no predicted {what} to rank by"))
    };
    Ok((
        labels.genre.ok_or_else(|| missing("genre"))?,
        labels.neutrality.ok_or_else(|| missing("neutrality"))?,
        labels.bias.ok_or_else(|| missing("bias"))?,
        labels.trust.ok_or_else(|| missing("trust"))?,
    ))
}

/// Rank hosts by predicted utility, descending; ties by genre confidence,
/// then host id. The stored score is the composite key `utility +
/// confidence`, which keeps the list's non-increasing-score invariant
/// while the confidence tiebreak stays inside the score. Gains are the
/// predicted utilities clamped at zero.
pub fn rank_by_quality<R: Real>(
    hosts: &[(HostId, LabelSet)],
    confidences: &BTreeMap<HostId, R>,
) -> Result<RankedList<R>> {
    let mut scores = Vec::with_capacity(hosts.len());
    let mut gains: BTreeMap<HostId, R> = BTreeMap::new();
    for (host, labels) in hosts {
        let (genre, neutrality, bias, trust) = complete_labels(host, labels)?;
        let utility = utility_score(genre, neutrality, bias, trust);
        let confidence = *confidences
            .get(host)
            .ok_or_else(|| Error::data(format!("host {host} has no genre confidence")))?;
        if !(confidence >= R::zero() && confidence <= R::one()) {
            return Err(Error::data(format!(
                "confidence {confidence} for {host} outside [0, 1]"
            )));
        }
        scores.push((host.clone(), R::from_f64_const(utility as f64) + confidence));
        gains.insert(host.clone(), R::from_f64_const(utility.max(0) as f64));
    }
    let mut list = RankedList::from_scores(scores)?;
    list.attach_gains(|host| Ok(gains[host]))?;
    Ok(list)
}

/// Run the full quality pipeline on a dataset through a tree-only
/// (multilingual-mode) model.
pub fn multilingual_rank<R: Real>(
    model: &EnsembleModel<R>,
    hosts: &Dataset<R>,
) -> Result<RankedList<R>> {
    if model.mode != Mode::Multilingual {
        return Err(Error::data(
            "multilingual ranking needs a model trained in multilingual mode",
        ));
    }
    let output = model.predict_all(hosts, &PredictOptions::default())?;
    let assignments: Vec<(HostId, LabelSet)> = output
        .assignments
        .iter()
        .map(|(host, a)| (host.clone(), a.labels))
        .collect();
    let confidences: BTreeMap<HostId, R> = output
        .assignments
        .iter()
        .map(|(host, a)| (host.clone(), a.genre_confidence))
        .collect();
    rank_by_quality(&assignments, &confidences)
}

/// Write a quality ranking as `rank<TAB>host_id<TAB>utility_score<TAB>confidence`
/// rows under the `ranking/1` tag. Utilities and confidences are recovered
/// from the composite scores.
pub fn write_quality_ranking<R: Real, W: Write>(
    ranking: &RankedList<R>,
    confidences: &BTreeMap<HostId, R>,
    out: &mut W,
) -> Result<()> {
    writeln!(out, "#ranking/1 quality").map_err(|e| Error::Internal(e.to_string()))?;
    for (index, item) in ranking.items().iter().enumerate() {
        let confidence = *confidences
            .get(&item.host)
            .ok_or_else(|| Error::data(format!("host {} has no confidence", item.host)))?;
        let utility = (item.score - confidence).as_f64().round() as i64;
        writeln!(out, "{}\t{}\t{utility}\t{confidence}", index + 1, item.host)
            .map_err(|e| Error::Internal(e.to_string()))?;
    }
    Ok(())
}
