//! Discounted cumulated gain evaluation and per-task reports.
//!
//! The discount starts at rank 2: `DCG[1] = G[1]`, `DCG[i] = DCG[i-1] +
//! G[i] / log2(i)`. NDCG divides by the DCG of the gain-descending ideal
//! ordering and is an error, never silently 0 or 1, when every gain is
//! zero. Rankings are evaluated at full list length.

use std::collections::BTreeMap;
use std::io::Write;

use crate::error::{Error, Result};
use crate::model::{Category, HostId, LabelSet, RankedList};
use crate::quality::utility_score;
use crate::scalar::Real;

/// Which of the three evaluation protocols to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskId {
    Task1,
    Task2,
    Task3,
}

impl TaskId {
    pub fn from_number(n: u8) -> Result<TaskId> {
        match n {
            1 => Ok(TaskId::Task1),
            2 => Ok(TaskId::Task2),
            3 => Ok(TaskId::Task3),
            other => Err(Error::config(format!("task {other} outside {{1,2,3}}"))),
        }
    }
}

/// Per-category NDCG values plus their mean (genre/facet reports only).
#[derive(Debug, Clone, PartialEq)]
pub struct NdcgReport<R: Real> {
    pub rows: Vec<(String, R)>,
    pub average: Option<R>,
}

/// Discounted cumulated gain of a gain sequence in ranked order.
pub fn dcg<R: Real>(gains: &[R]) -> Result<R> {
    let mut total = R::zero();
    for (index, &gain) in gains.iter().enumerate() {
        if !(gain >= R::zero()) {
            return Err(Error::data(format!(
                "gain {gain} at rank {} is negative or NaN",
                index + 1
            )));
        }
        let rank = index + 1;
        if rank == 1 {
            total = gain;
        } else {
            total = total + gain / R::from_count(rank).log2();
        }
    }
    Ok(total)
}

/// Normalized DCG of a ranked list with gains attached.
pub fn ndcg<R: Real>(ranked: &RankedList<R>) -> Result<R> {
    let gains = ranked.gains();
    let actual = dcg(&gains)?;
    let mut ideal_gains = gains;
    ideal_gains.sort_by(|a, b| b.partial_cmp(a).expect("gains are finite"));
    let ideal = dcg(&ideal_gains)?;
    if ideal <= R::zero() {
        return Err(Error::data(
            "ndcg undefined: every gain in the ranking is zero",
        ));
    }
    Ok(actual / ideal)
}

/// Gain a host contributes to a genre/facet ranking: binary membership in
/// the category's positive class.
fn task1_gain<R: Real>(
    category: Category,
    host: &HostId,
    truth: &BTreeMap<HostId, LabelSet>,
) -> Result<R> {
    let labels = truth
        .get(host)
        .ok_or_else(|| Error::data(format!("host {host} has no ground truth")))?;
    let member = labels.binary_class(category).ok_or_else(|| {
        Error::data(format!(
            "host {host} lacks a ground-truth label for {category}"
        ))
    })?;
    Ok(if member { R::one() } else { R::zero() })
}

/// Gain a host contributes to a quality ranking: its true utility score
/// clamped at zero.
pub fn utility_gain<R: Real>(host: &HostId, truth: &BTreeMap<HostId, LabelSet>) -> Result<R> {
    let labels = truth
        .get(host)
        .ok_or_else(|| Error::data(format!("host {host} has no ground truth")))?;
    let missing =
        |what: &str| Error::data(format!("host {host} lacks a ground-truth {what} label"));
    let genre = labels.genre.ok_or_else(|| missing("genre"))?;
    let neutrality = labels.neutrality.ok_or_else(|| missing("neutrality"))?;
    let bias = labels.bias.ok_or_else(|| missing("bias"))?;
    let trust = labels.trust.ok_or_else(|| missing("trust"))?;
    let score = utility_score(genre, neutrality, bias, trust);
    Ok(R::from_f64_const(score.max(0) as f64))
}

/// Evaluate rankings against ground truth.
///
/// Task 1 expects one ranking per category, labeled with the canonical
/// category name, and reports the per-category NDCG plus their average.
/// Tasks 2 and 3 expect quality rankings (any labels) and use true utility
/// scores as gains; no average row is reported.
pub fn report<R: Real>(
    task: TaskId,
    rankings: &[(String, RankedList<R>)],
    truth: &BTreeMap<HostId, LabelSet>,
) -> Result<NdcgReport<R>> {
    let mut rows = Vec::with_capacity(rankings.len());
    for (label, ranking) in rankings {
        let mut ranking = ranking.clone();
        match task {
            TaskId::Task1 => {
                let category = Category::from_name(label).ok_or_else(|| {
                    Error::data(format!("unknown category {label:?} in a task-1 report"))
                })?;
                ranking.attach_gains(|host| task1_gain(category, host, truth))?;
            }
            TaskId::Task2 | TaskId::Task3 => {
                ranking.attach_gains(|host| utility_gain(host, truth))?;
            }
        }
        let value = ndcg(&ranking)
            .map_err(|e| Error::data(format!("category {label}: {e}")))?;
        rows.push((label.clone(), value));
    }
    let average = match task {
        TaskId::Task1 => {
            let sum = rows.iter().fold(R::zero(), |acc, (_, v)| acc + *v);
            Some(sum / R::from_count(rows.len().max(1)))
        }
        _ => None,
    };
    Ok(NdcgReport { rows, average })
}

/// Write a report as `category<TAB>ndcg` rows (plus the average for task
/// 1) under the `report/1` tag.
pub fn write_report<R: Real, W: Write>(report: &NdcgReport<R>, out: &mut W) -> std::io::Result<()> {
    writeln!(out, "#report/1")?;
    for (label, value) in &report.rows {
        writeln!(out, "{label}\t{value}")?;
    }
    if let Some(average) = report.average {
        writeln!(out, "average\t{average}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Facet, GenreLabel, Level};

    fn host(s: &str) -> HostId {
        HostId::new(s).unwrap()
    }

    fn ranking(scored: &[(&str, f64, f64)]) -> RankedList<f64> {
        let mut list = RankedList::from_scores(
            scored.iter().map(|(h, s, _)| (host(h), *s)).collect(),
        )
        .unwrap();
        let gains: BTreeMap<HostId, f64> =
            scored.iter().map(|(h, _, g)| (host(h), *g)).collect();
        list.attach_gains(|h| Ok(gains[h])).unwrap();
        list
    }

    #[test]
    fn dcg_matches_hand_computation() {
        // 3 + 2/log2(2) + 1/log2(3)
        let expected = 3.0 + 2.0 + 1.0 / 3.0_f64.log2();
        let got = dcg(&[3.0, 2.0, 1.0]).unwrap();
        assert!((got - expected).abs() < 1e-12);
        assert!((got - 5.63093).abs() < 1e-5);
    }

    #[test]
    fn dcg_trivial_cases() {
        assert_eq!(dcg(&[7.5]).unwrap(), 7.5);
        assert_eq!(dcg::<f64>(&[]).unwrap(), 0.0);
        assert!(dcg(&[1.0, -0.5]).is_err());
    }

    #[test]
    fn ndcg_of_ideal_ordering_is_exactly_one() {
        let list = ranking(&[("h1", 0.9, 3.0), ("h2", 0.5, 2.0), ("h3", 0.1, 1.0)]);
        assert_eq!(ndcg(&list).unwrap(), 1.0);
    }

    #[test]
    fn ndcg_of_reversed_ordering_matches_hand_value() {
        // Ranked gains [1,2,3] against ideal [3,2,1].
        let list = ranking(&[("h1", 0.9, 1.0), ("h2", 0.5, 2.0), ("h3", 0.1, 3.0)]);
        let got = ndcg(&list).unwrap();
        let expected = (1.0 + 2.0 + 3.0 / 3.0_f64.log2()) / (3.0 + 2.0 + 1.0 / 3.0_f64.log2());
        assert!((got - expected).abs() < 1e-12);
        assert!((got - 0.86891).abs() < 1e-5, "{got}");
    }

    #[test]
    fn ndcg_with_all_zero_gains_is_an_error() {
        let list = ranking(&[("h1", 0.9, 0.0), ("h2", 0.5, 0.0)]);
        assert!(ndcg(&list).is_err());
    }

    #[test]
    fn appending_zero_gain_items_never_changes_ndcg() {
        let placed = ranking(&[("h1", 0.9, 3.0), ("h2", 0.5, 1.0)]);
        let padded = ranking(&[
            ("h1", 0.9, 3.0),
            ("h2", 0.5, 1.0),
            ("h3", 0.2, 0.0),
            ("h4", 0.1, 0.0),
        ]);
        let a = ndcg(&placed).unwrap();
        let b = ndcg(&padded).unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    fn full_labels(genre: GenreLabel, n: u8, b: u8, t: u8) -> LabelSet {
        LabelSet {
            genre: Some(genre),
            neutrality: Some(Level::new(n).unwrap()),
            bias: Some(Level::new(b).unwrap()),
            trust: Some(Level::new(t).unwrap()),
        }
    }

    #[test]
    fn task1_report_averages_all_categories() {
        // One host per genre, facet levels chosen so each facet also has a
        // positive host.
        let mut truth = BTreeMap::new();
        truth.insert(host("h1"), full_labels(GenreLabel::WebSpam, 1, 1, 1));
        truth.insert(host("h2"), full_labels(GenreLabel::NewsEditorial, 3, 3, 3));
        truth.insert(host("h3"), full_labels(GenreLabel::Commercial, 3, 3, 3));
        truth.insert(host("h4"), full_labels(GenreLabel::EducationalResearch, 1, 3, 3));
        truth.insert(host("h5"), full_labels(GenreLabel::Discussion, 3, 1, 1));
        truth.insert(host("h6"), full_labels(GenreLabel::PersonalLeisure, 1, 3, 1));

        // Perfect ordering for each category: positives above negatives.
        let rankings: Vec<(String, RankedList<f64>)> = crate::model::category_universe()
            .iter()
            .map(|cat| {
                let scores = truth
                    .iter()
                    .map(|(h, labels)| {
                        let score = if labels.binary_class(*cat).unwrap() {
                            0.9
                        } else {
                            0.1
                        };
                        (h.clone(), score)
                    })
                    .collect();
                (
                    cat.canonical_name().to_string(),
                    RankedList::from_scores(scores).unwrap(),
                )
            })
            .collect();

        let report = report(TaskId::Task1, &rankings, &truth).unwrap();
        assert_eq!(report.rows.len(), 9);
        for (label, value) in &report.rows {
            assert_eq!(*value, 1.0, "category {label}");
        }
        assert_eq!(report.average, Some(1.0));
    }

    #[test]
    fn task2_report_uses_true_utility_gains() {
        let mut truth = BTreeMap::new();
        // Utility 9 and utility 2 hosts.
        truth.insert(host("h1"), full_labels(GenreLabel::NewsEditorial, 3, 3, 3));
        truth.insert(host("h2"), full_labels(GenreLabel::Discussion, 1, 1, 1));

        let ideal = RankedList::from_scores(vec![(host("h1"), 0.9), (host("h2"), 0.2)]).unwrap();
        let report =
            report(TaskId::Task2, &[("English".to_string(), ideal)], &truth).unwrap();
        assert_eq!(report.rows.len(), 1);
        assert_eq!(report.rows[0].1, 1.0);
        assert_eq!(report.average, None);
    }

    #[test]
    fn report_errors_on_missing_truth() {
        let truth = BTreeMap::new();
        let list = RankedList::from_scores(vec![(host("h9"), 0.5)]).unwrap();
        let err = report(TaskId::Task2, &[("q".to_string(), list)], &truth).unwrap_err();
        assert!(err.to_string().contains("h9"), "{err}");
    }

    #[test]
    fn report_writer_emits_versioned_rows() {
        let r = NdcgReport {
            rows: vec![("WebSpam".to_string(), 0.5_f64)],
            average: Some(0.5),
        };
        let mut buf = Vec::new();
        write_report(&r, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "#report/1\nWebSpam\t0.5\naverage\t0.5\n");
    }
}
