//! Independent oracles for the verification suites: literal, brute-force
//! transcriptions of each rule, kept separate from the implementation path
//! they check.

use hostrank::dtree::TreeNode;
use hostrank::model::{GenreLabel, Level, SparseTermVector};

// ── utility rule, transcribed from the aggregation pseudocode ──

pub fn oracle_utility(genre: GenreLabel, neutrality: Level, bias: Level, trust: Level) -> i32 {
    let mut value = 0;
    if genre == GenreLabel::NewsEditorial || genre == GenreLabel::EducationalResearch {
        value = 5;
    } else if genre == GenreLabel::Discussion {
        value = 4;
    } else if genre == GenreLabel::Commercial || genre == GenreLabel::PersonalLeisure {
        value = 3;
    }
    // Web spam falls through every branch: it keeps the initial 0.
    if neutrality.value() == 3 {
        value += 2;
    }
    if bias.value() == 1 {
        value -= 2;
    }
    if trust.value() == 3 {
        value += 2;
    }
    value
}

// ── discounted gain, re-summed from the definition ──

pub fn oracle_dcg(gains: &[f64]) -> f64 {
    let mut total = 0.0;
    for (i, &g) in gains.iter().enumerate() {
        let rank = (i + 1) as f64;
        if i == 0 {
            total = g;
        } else {
            total += g / rank.log2();
        }
    }
    total
}

// ── decision tree, grown by exhaustive candidate enumeration ──

fn oracle_entropy(pos: usize, neg: usize) -> f64 {
    let n = (pos + neg) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let mut h = 0.0;
    for c in [pos, neg] {
        if c > 0 {
            let p = c as f64 / n;
            h -= p * p.log2();
        }
    }
    h
}

struct OracleCandidate {
    feature: usize,
    threshold: f64,
    gain: f64,
    ratio: f64,
}

fn oracle_candidates(
    x: &[Vec<f64>],
    y: &[bool],
    rows: &[usize],
    min_instances: usize,
) -> Vec<OracleCandidate> {
    let dim = x[rows[0]].len();
    let n = rows.len();
    let pos = rows.iter().filter(|&&r| y[r]).count();
    let parent = oracle_entropy(pos, n - pos);

    let mut out = Vec::new();
    for feature in 0..dim {
        let mut values: Vec<f64> = rows.iter().map(|&r| x[r][feature]).collect();
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        values.dedup();
        for pair in values.windows(2) {
            let threshold = (pair[0] + pair[1]) / 2.0;
            let left: Vec<usize> = rows
                .iter()
                .copied()
                .filter(|&r| x[r][feature] <= threshold)
                .collect();
            let right: Vec<usize> = rows
                .iter()
                .copied()
                .filter(|&r| x[r][feature] > threshold)
                .collect();
            if left.len() < min_instances || right.len() < min_instances {
                continue;
            }
            let lp = left.iter().filter(|&&r| y[r]).count();
            let rp = right.iter().filter(|&&r| y[r]).count();
            let weighted = (left.len() as f64 / n as f64) * oracle_entropy(lp, left.len() - lp)
                + (right.len() as f64 / n as f64) * oracle_entropy(rp, right.len() - rp);
            let gain = (parent - weighted).max(0.0);
            let split_info = oracle_entropy(left.len(), right.len());
            let ratio = if split_info > 0.0 { gain / split_info } else { 0.0 };
            out.push(OracleCandidate {
                feature,
                threshold,
                gain,
                ratio,
            });
        }
    }
    out
}

fn oracle_choose(
    x: &[Vec<f64>],
    y: &[bool],
    rows: &[usize],
    min_instances: usize,
) -> Option<(usize, f64)> {
    let candidates = oracle_candidates(x, y, rows, min_instances);
    if candidates.is_empty() {
        return None;
    }
    let max_gain = candidates.iter().map(|c| c.gain).fold(0.0, f64::max);
    if max_gain <= 1e-10 {
        return None;
    }
    let mean = candidates.iter().map(|c| c.gain).sum::<f64>() / candidates.len() as f64;
    let mut best: Option<&OracleCandidate> = None;
    for c in candidates.iter().filter(|c| c.gain + 1e-12 >= mean) {
        best = match best {
            None => Some(c),
            Some(b) => {
                if c.ratio > b.ratio
                    || (c.ratio == b.ratio
                        && (c.feature < b.feature
                            || (c.feature == b.feature && c.threshold < b.threshold)))
                {
                    Some(c)
                } else {
                    Some(b)
                }
            }
        };
    }
    best.map(|c| (c.feature, c.threshold))
}

pub fn oracle_grow(x: &[Vec<f64>], y: &[bool], min_instances: usize) -> TreeNode<f64> {
    let rows: Vec<usize> = (0..x.len()).collect();
    oracle_grow_rows(x, y, &rows, min_instances)
}

fn oracle_grow_rows(
    x: &[Vec<f64>],
    y: &[bool],
    rows: &[usize],
    min_instances: usize,
) -> TreeNode<f64> {
    let pos = rows.iter().filter(|&&r| y[r]).count();
    let neg = rows.len() - pos;
    if pos == 0 || neg == 0 {
        return TreeNode::Leaf { pos, neg };
    }
    match oracle_choose(x, y, rows, min_instances) {
        None => TreeNode::Leaf { pos, neg },
        Some((feature, threshold)) => {
            let left: Vec<usize> = rows
                .iter()
                .copied()
                .filter(|&r| x[r][feature] <= threshold)
                .collect();
            let right: Vec<usize> = rows
                .iter()
                .copied()
                .filter(|&r| x[r][feature] > threshold)
                .collect();
            TreeNode::Split {
                feature,
                threshold,
                left: Box::new(oracle_grow_rows(x, y, &left, min_instances)),
                right: Box::new(oracle_grow_rows(x, y, &right, min_instances)),
            }
        }
    }
}

// ── centroid weights, recomputed by scanning the corpus per query ──

pub fn oracle_cfc_weight(
    docs: &[(SparseTermVector<f64>, String)],
    term: u32,
    category: &str,
    b: f64,
) -> f64 {
    let mut categories: Vec<&str> = docs.iter().map(|(_, c)| c.as_str()).collect();
    categories.sort();
    categories.dedup();

    let contains = |doc: &SparseTermVector<f64>| {
        doc.entries().iter().any(|&(t, tf)| t == term && tf > 0)
    };
    let class_size = docs.iter().filter(|(_, c)| c == category).count();
    let df = docs
        .iter()
        .filter(|(d, c)| c == category && contains(d))
        .count();
    let cf = categories
        .iter()
        .filter(|cat| {
            docs.iter()
                .any(|(d, c)| c == **cat && contains(d))
        })
        .count();
    if cf == 0 {
        return 0.0;
    }
    b.powf(df as f64 / class_size as f64) * (categories.len() as f64 / cf as f64).ln()
}

// ── convex objective oracle: multi-scale grid over (w, b) ──

fn primal_objective(w: &[f64], b: f64, x: &[Vec<f64>], y: &[bool], cost: f64) -> f64 {
    let reg: f64 = 0.5 * w.iter().map(|v| v * v).sum::<f64>();
    let hinge: f64 = x
        .iter()
        .zip(y)
        .map(|(row, &label)| {
            let margin: f64 = row.iter().zip(w).map(|(a, c)| a * c).sum::<f64>() + b;
            let sign = if label { 1.0 } else { -1.0 };
            (1.0 - sign * margin).max(0.0)
        })
        .sum();
    reg + cost * hinge
}

/// Best primal objective found by iterated grid refinement over the
/// stacked (w, b) parameters.
pub fn oracle_svm_best_objective(x: &[Vec<f64>], y: &[bool], cost: f64) -> f64 {
    let dim = x[0].len() + 1;
    let mut center = vec![0.0; dim];
    let mut half = 20.0;
    let steps: Vec<f64> = (-3..=3).map(|s| s as f64 / 3.0).collect();
    for _ in 0..40 {
        let mut best = center.clone();
        let mut best_value = f64::INFINITY;
        let mut point = vec![0.0; dim];
        let mut index = vec![0usize; dim];
        loop {
            for d in 0..dim {
                point[d] = center[d] + steps[index[d]] * half;
            }
            let value = primal_objective(&point[..dim - 1], point[dim - 1], x, y, cost);
            if value < best_value {
                best_value = value;
                best.copy_from_slice(&point);
            }
            // Odometer over the grid.
            let mut d = 0;
            loop {
                index[d] += 1;
                if index[d] < steps.len() {
                    break;
                }
                index[d] = 0;
                d += 1;
                if d == dim {
                    break;
                }
            }
            if d == dim {
                break;
            }
        }
        center = best;
        half *= 0.6;
    }
    primal_objective(&center[..dim - 1], center[dim - 1], x, y, cost)
}

// ── majority vote, recomputed from the counting rule ──

pub fn oracle_vote(votes: &[(bool, f64)]) -> (bool, f64) {
    let positives = votes.iter().filter(|(p, _)| *p).count();
    let negatives = votes.len() - positives;
    let winner = if positives > negatives {
        true
    } else if negatives > positives {
        false
    } else {
        let best_for = |side: bool| {
            votes
                .iter()
                .filter(|(p, _)| *p == side)
                .map(|(_, c)| *c)
                .fold(f64::MIN, f64::max)
        };
        // Higher confidence wins the tie; equal confidence goes negative.
        best_for(true) > best_for(false)
    };
    let confidence = votes
        .iter()
        .filter(|(p, _)| *p == winner)
        .map(|(_, c)| *c)
        .fold(f64::MIN, f64::max);
    (winner, confidence)
}
