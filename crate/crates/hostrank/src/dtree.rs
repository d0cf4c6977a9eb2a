//! Gain-ratio decision tree over dense features: the ensemble's classifier
//! for the link+content family.
//!
//! Growth follows the classic recipe: candidate thresholds are midpoints of
//! consecutive distinct sorted values, both branches must keep at least
//! `min_instances` rows, and the chosen split maximizes gain ratio among
//! candidates whose information gain is at least the mean gain. Pruning is
//! bottom-up subtree replacement under the pessimistic binomial upper bound
//! controlled by the confidence factor. Prediction routes `value <=
//! threshold` to the left branch and reports Laplace-smoothed leaf
//! confidence, ties predicting positive. No subtree raising is performed.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Training parameters. Defaults: confidence factor 0.25, minimum 2
/// instances per branch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeConfig {
    pub confidence_factor: f64,
    pub min_instances: usize,
    /// Accepted for interface parity with the other classifiers; training
    /// is fully deterministic and never consults it.
    pub seed: u64,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            confidence_factor: 0.25,
            min_instances: 2,
            seed: 1,
        }
    }
}

impl TreeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.confidence_factor > 0.0 && self.confidence_factor < 1.0) {
            return Err(Error::config(format!(
                "confidence factor {} outside (0, 1)",
                self.confidence_factor
            )));
        }
        if self.min_instances == 0 {
            return Err(Error::config("min_instances must be at least 1"));
        }
        Ok(())
    }
}

/// A trained tree: leaves carry per-class counts, splits carry the feature
/// index and midpoint threshold.
#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode<R: Real> {
    Leaf {
        pos: usize,
        neg: usize,
    },
    Split {
        feature: usize,
        threshold: R,
        left: Box<TreeNode<R>>,
        right: Box<TreeNode<R>>,
    },
}

impl<R: Real> TreeNode<R> {
    /// Total (pos, neg) counts beneath this node.
    pub fn counts(&self) -> (usize, usize) {
        match self {
            TreeNode::Leaf { pos, neg } => (*pos, *neg),
            TreeNode::Split { left, right, .. } => {
                let (lp, ln) = left.counts();
                let (rp, rn) = right.counts();
                (lp + rp, ln + rn)
            }
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.leaf_count() + right.leaf_count(),
        }
    }

    /// Pessimistic error bound of this node's subtree: the weighted sum of
    /// leaf bounds.
    pub fn pessimistic_bound(&self, z: f64) -> f64 {
        match self {
            TreeNode::Leaf { pos, neg } => pessimistic_error_rate(*pos.min(neg), pos + neg, z),
            TreeNode::Split { left, right, .. } => {
                let (lp, ln) = left.counts();
                let (rp, rn) = right.counts();
                let n = (lp + ln + rp + rn) as f64;
                ((lp + ln) as f64 / n) * left.pessimistic_bound(z)
                    + ((rp + rn) as f64 / n) * right.pessimistic_bound(z)
            }
        }
    }
}

/// Upper limit of the binomial confidence interval on the error rate, via
/// the normal approximation. `errors` of `n` observed; z is the one-sided
/// normal quantile for the confidence factor.
pub fn pessimistic_error_rate(errors: usize, n: usize, z: f64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    let f = errors as f64 / n;
    let z2 = z * z;
    (f + z2 / (2.0 * n) + z * (f / n - f * f / n + z2 / (4.0 * n * n)).sqrt()) / (1.0 + z2 / n)
}

/// One-sided z for the given confidence factor, clamped at zero so factors
/// of 0.5 and above fall back to the raw error rate.
pub fn z_for_confidence(confidence_factor: f64) -> f64 {
    normal_quantile(1.0 - confidence_factor).max(0.0)
}

/// Inverse standard normal CDF (Acklam's rational approximation, relative
/// error below 1.2e-9 across (0, 1)).
pub fn normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile needs p in (0, 1), got {p}");
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -((((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0))
    }
}

fn entropy(pos: usize, neg: usize) -> f64 {
    let n = pos + neg;
    if n == 0 {
        return 0.0;
    }
    let mut h = 0.0;
    for count in [pos, neg] {
        if count > 0 {
            let p = count as f64 / n as f64;
            h -= p * p.log2();
        }
    }
    h
}

/// A candidate split with its quality measures, all derived from integer
/// counts so enumeration order cannot perturb them.
#[derive(Debug, Clone, Copy)]
struct Candidate<R: Real> {
    feature: usize,
    threshold: R,
    gain: f64,
    gain_ratio: f64,
}

const GAIN_EPS: f64 = 1e-10;

fn candidate_splits<R: Real>(
    x: &[Vec<R>],
    y: &[bool],
    rows: &[usize],
    min_instances: usize,
) -> Vec<Candidate<R>> {
    let dim = x[rows[0]].len();
    let n = rows.len();
    let (pos, neg) = class_counts(y, rows);
    let parent_entropy = entropy(pos, neg);

    let mut candidates = Vec::new();
    for feature in 0..dim {
        let mut ordered: Vec<(R, bool)> = rows.iter().map(|&r| (x[r][feature], y[r])).collect();
        ordered.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite features"));

        let mut left_pos = 0usize;
        let mut left_neg = 0usize;
        for i in 0..n - 1 {
            if ordered[i].1 {
                left_pos += 1;
            } else {
                left_neg += 1;
            }
            if ordered[i].0 == ordered[i + 1].0 {
                continue;
            }
            let left_n = i + 1;
            let right_n = n - left_n;
            if left_n < min_instances || right_n < min_instances {
                continue;
            }
            let threshold = (ordered[i].0 + ordered[i + 1].0) / R::from_f64_const(2.0);
            let right_pos = pos - left_pos;
            let right_neg = neg - left_neg;
            let weighted = (left_n as f64 / n as f64) * entropy(left_pos, left_neg)
                + (right_n as f64 / n as f64) * entropy(right_pos, right_neg);
            let gain = (parent_entropy - weighted).max(0.0);
            let split_info = entropy(left_n, right_n);
            let gain_ratio = if split_info > 0.0 { gain / split_info } else { 0.0 };
            candidates.push(Candidate {
                feature,
                threshold,
                gain,
                gain_ratio,
            });
        }
    }
    candidates
}

fn class_counts(y: &[bool], rows: &[usize]) -> (usize, usize) {
    let pos = rows.iter().filter(|&&r| y[r]).count();
    (pos, rows.len() - pos)
}

/// Choose the best split under the gain-ratio rule, or None when the node
/// should become a leaf. Ties break toward the lowest feature index, then
/// the lowest threshold.
fn choose_split<R: Real>(
    x: &[Vec<R>],
    y: &[bool],
    rows: &[usize],
    min_instances: usize,
) -> Option<(usize, R)> {
    let candidates = candidate_splits(x, y, rows, min_instances);
    if candidates.is_empty() {
        return None;
    }
    let max_gain = candidates.iter().map(|c| c.gain).fold(0.0, f64::max);
    if max_gain <= GAIN_EPS {
        return None;
    }
    let mean_gain = candidates.iter().map(|c| c.gain).sum::<f64>() / candidates.len() as f64;
    let best = candidates
        .iter()
        .filter(|c| c.gain + 1e-12 >= mean_gain)
        .max_by(|a, b| {
            a.gain_ratio
                .partial_cmp(&b.gain_ratio)
                .expect("ratios are finite")
                .then_with(|| b.feature.cmp(&a.feature))
                .then_with(|| {
                    b.threshold
                        .partial_cmp(&a.threshold)
                        .expect("thresholds are finite")
                })
        })?;
    Some((best.feature, best.threshold))
}

fn grow<R: Real>(x: &[Vec<R>], y: &[bool], rows: &[usize], cfg: &TreeConfig) -> TreeNode<R> {
    let (pos, neg) = class_counts(y, rows);
    if pos == 0 || neg == 0 {
        return TreeNode::Leaf { pos, neg };
    }
    match choose_split(x, y, rows, cfg.min_instances) {
        None => TreeNode::Leaf { pos, neg },
        Some((feature, threshold)) => {
            let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
                rows.iter().partition(|&&r| x[r][feature] <= threshold);
            TreeNode::Split {
                feature,
                threshold,
                left: Box::new(grow(x, y, &left_rows, cfg)),
                right: Box::new(grow(x, y, &right_rows, cfg)),
            }
        }
    }
}

fn validate_training_input<R: Real>(x: &[Vec<R>], y: &[bool]) -> Result<()> {
    if x.is_empty() {
        return Err(Error::data("cannot train a tree on no rows"));
    }
    if x.len() != y.len() {
        return Err(Error::data(format!(
            "{} rows but {} labels",
            x.len(),
            y.len()
        )));
    }
    let dim = x[0].len();
    for row in x {
        if row.len() != dim {
            return Err(Error::data("ragged training rows"));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::data("non-finite feature value in training data"));
        }
    }
    Ok(())
}

/// Grow an unpruned tree.
pub fn grow_tree<R: Real>(x: &[Vec<R>], y: &[bool], cfg: &TreeConfig) -> Result<TreeNode<R>> {
    cfg.validate()?;
    validate_training_input(x, y)?;
    let rows: Vec<usize> = (0..x.len()).collect();
    Ok(grow(x, y, &rows, cfg))
}

/// Grow and then prune.
pub fn train_tree<R: Real>(x: &[Vec<R>], y: &[bool], cfg: &TreeConfig) -> Result<TreeNode<R>> {
    Ok(prune_tree(grow_tree(x, y, cfg)?, cfg))
}

/// Bottom-up subtree replacement: a subtree collapses to a leaf when the
/// leaf's pessimistic error bound does not exceed the weighted sum of its
/// children's bounds.
pub fn prune_tree<R: Real>(tree: TreeNode<R>, cfg: &TreeConfig) -> TreeNode<R> {
    let z = z_for_confidence(cfg.confidence_factor);
    prune(tree, z).0
}

fn prune<R: Real>(node: TreeNode<R>, z: f64) -> (TreeNode<R>, f64) {
    match node {
        TreeNode::Leaf { pos, neg } => {
            let bound = pessimistic_error_rate(pos.min(neg), pos + neg, z);
            (TreeNode::Leaf { pos, neg }, bound)
        }
        TreeNode::Split {
            feature,
            threshold,
            left,
            right,
        } => {
            let (left, left_bound) = prune(*left, z);
            let (right, right_bound) = prune(*right, z);
            let (lp, ln) = left.counts();
            let (rp, rn) = right.counts();
            let (pos, neg) = (lp + rp, ln + rn);
            let n = (pos + neg) as f64;
            let subtree_bound =
                ((lp + ln) as f64 / n) * left_bound + ((rp + rn) as f64 / n) * right_bound;
            let leaf_bound = pessimistic_error_rate(pos.min(neg), pos + neg, z);
            if leaf_bound <= subtree_bound {
                (TreeNode::Leaf { pos, neg }, leaf_bound)
            } else {
                (
                    TreeNode::Split {
                        feature,
                        threshold,
                        left: Box::new(left),
                        right: Box::new(right),
                    },
                    subtree_bound,
                )
            }
        }
    }
}

/// Route a vector to its leaf and report (positive, confidence).
///
/// Ties in leaf counts predict positive; confidence is Laplace-smoothed,
/// (majority + 1) / (total + 2).
pub fn predict_tree<R: Real>(tree: &TreeNode<R>, v: &[R]) -> Result<(bool, R)> {
    let mut node = tree;
    loop {
        match node {
            TreeNode::Leaf { pos, neg } => {
                let positive = pos >= neg;
                let majority = *pos.max(neg);
                let confidence = R::from_count(majority + 1) / R::from_count(pos + neg + 2);
                return Ok((positive, confidence));
            }
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                let value = *v.get(*feature).ok_or_else(|| {
                    Error::data(format!(
                        "dimension mismatch: tree splits on feature {feature}, vector has {}",
                        v.len()
                    ))
                })?;
                node = if value <= *threshold { left } else { right };
            }
        }
    }
}

const FORMAT_TAG: &str = "dtree/1";

/// Serialize in preorder under the `dtree/1` tag.
pub fn write_tree<R: Real, W: Write>(tree: &TreeNode<R>, out: &mut W) -> std::io::Result<()> {
    writeln!(out, "{FORMAT_TAG}")?;
    write_node(tree, out)
}

fn write_node<R: Real, W: Write>(node: &TreeNode<R>, out: &mut W) -> std::io::Result<()> {
    match node {
        TreeNode::Leaf { pos, neg } => writeln!(out, "l {pos} {neg}"),
        TreeNode::Split {
            feature,
            threshold,
            left,
            right,
        } => {
            writeln!(out, "s {feature} {threshold}")?;
            write_node(left, out)?;
            write_node(right, out)
        }
    }
}

/// Parse a `dtree/1` dump.
pub fn read_tree<R: Real, B: BufRead>(input: &mut B) -> Result<TreeNode<R>> {
    let mut lines = Vec::new();
    for line in input.lines() {
        let line = line.map_err(|e| Error::data(format!("tree read failed: {e}")))?;
        if !line.is_empty() {
            lines.push(line);
        }
    }
    if lines.first().map(String::as_str) != Some(FORMAT_TAG) {
        return Err(Error::data(format!("expected {FORMAT_TAG} header")));
    }
    let mut cursor = 1;
    let tree = read_node(&lines, &mut cursor)?;
    if cursor != lines.len() {
        return Err(Error::data("trailing lines after tree"));
    }
    Ok(tree)
}

fn read_node<R: Real>(lines: &[String], cursor: &mut usize) -> Result<TreeNode<R>> {
    let line = lines
        .get(*cursor)
        .ok_or_else(|| Error::data("truncated tree dump"))?;
    *cursor += 1;
    let mut parts = line.split(' ');
    match parts.next() {
        Some("l") => {
            let pos = parse_usize(parts.next())?;
            let neg = parse_usize(parts.next())?;
            Ok(TreeNode::Leaf { pos, neg })
        }
        Some("s") => {
            let feature = parse_usize(parts.next())?;
            let threshold = parts
                .next()
                .and_then(|s| s.parse::<f64>().ok())
                .map(R::from_f64_const)
                .ok_or_else(|| Error::data("bad split threshold"))?;
            let left = Box::new(read_node(lines, cursor)?);
            let right = Box::new(read_node(lines, cursor)?);
            Ok(TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            })
        }
        other => Err(Error::data(format!("unknown tree record {other:?}"))),
    }
}

fn parse_usize(cell: Option<&str>) -> Result<usize> {
    cell.and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::data("bad count in tree dump"))
}
