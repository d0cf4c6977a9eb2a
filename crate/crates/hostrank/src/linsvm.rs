//! Linear soft-margin SVM trained on page-level vectors: the ensemble's
//! classifier for the NLP family.
//!
//! The primal objective is `0.5 ||w||^2 + cost * sum_i hinge(y_i (w.x_i +
//! b))` with an unregularized intercept. The solver works on the dual:
//! maximal-violating-pair selection with exact two-variable updates, the
//! classic sequential minimal optimization scheme. It is fully
//! deterministic; the config seed exists only for interface parity. The
//! dual objective is non-increasing across iterations and the trace is
//! exposed for verification.
//!
//! Margins map to confidences through the logistic function folded onto
//! [0.5, 1]; a margin of exactly zero predicts negative.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Solver parameters. Defaults: cost 0.04, KKT tolerance 1e-4, at most
/// 1000 epochs (each epoch is one pass worth of pair updates).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmConfig {
    pub cost: f64,
    pub tolerance: f64,
    pub max_epochs: usize,
    /// Accepted for interface parity; the solver is deterministic and
    /// never consults it.
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            cost: 0.04,
            tolerance: 1e-4,
            max_epochs: 1000,
            seed: 1,
        }
    }
}

impl SvmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cost > 0.0) {
            return Err(Error::config(format!("svm cost {} must be positive", self.cost)));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::config("svm tolerance must be positive"));
        }
        if self.max_epochs == 0 {
            return Err(Error::config("svm max_epochs must be positive"));
        }
        Ok(())
    }
}

/// Trained hyperplane.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel<R: Real> {
    pub weights: Vec<R>,
    pub intercept: R,
}

impl<R: Real> SvmModel<R> {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// Signed distance surrogate `w.v + intercept`.
    pub fn margin(&self, v: &[R]) -> Result<R> {
        if v.len() != self.weights.len() {
            return Err(Error::data(format!(
                "dimension mismatch: model has {}, vector has {}",
                self.weights.len(),
                v.len()
            )));
        }
        Ok(self
            .weights
            .iter()
            .zip(v)
            .fold(self.intercept, |acc, (&w, &x)| acc + w * x))
    }
}

/// Primal objective of a model on a dataset: `0.5||w||^2 + cost * sum hinge`.
pub fn svm_objective<R: Real>(model: &SvmModel<R>, x: &[Vec<R>], y: &[bool], cost: f64) -> f64 {
    let reg: f64 = 0.5
        * model
            .weights
            .iter()
            .map(|&w| w.as_f64() * w.as_f64())
            .sum::<f64>();
    let hinge: f64 = x
        .iter()
        .zip(y)
        .map(|(row, &label)| {
            let margin = model.margin(row).expect("training rows share the dim");
            let sign = if label { 1.0 } else { -1.0 };
            (1.0 - sign * margin.as_f64()).max(0.0)
        })
        .sum();
    reg + cost * hinge
}

/// Train and discard the objective trace.
pub fn train_svm<R: Real>(x: &[Vec<R>], y: &[bool], cfg: &SvmConfig) -> Result<SvmModel<R>> {
    train_svm_traced(x, y, cfg).map(|(model, _)| model)
}

/// Train, returning the per-epoch dual objective trace alongside the model.
pub fn train_svm_traced<R: Real>(
    x: &[Vec<R>],
    y: &[bool],
    cfg: &SvmConfig,
) -> Result<(SvmModel<R>, Vec<f64>)> {
    cfg.validate()?;
    if x.is_empty() || x.len() != y.len() {
        return Err(Error::data("svm needs matching, non-empty rows and labels"));
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
    if y.iter().all(|&l| l) || y.iter().all(|&l| !l) {
        return Err(Error::data("svm needs both classes in the training data"));
    }

    let n = x.len();
    let rows: Vec<Vec<f64>> = x
        .iter()
        .map(|row| row.iter().map(|v| v.as_f64()).collect())
        .collect();
    let sign: Vec<f64> = y.iter().map(|&l| if l { 1.0 } else { -1.0 }).collect();
    let c = cfg.cost;

    let mut solver = Smo {
        rows: &rows,
        sign: &sign,
        alpha: vec![0.0; n],
        gradient: vec![-1.0; n],
        w: vec![0.0; dim],
        q_cache: vec![None; n],
        c,
    };

    let mut trace = Vec::new();
    let max_iterations = cfg.max_epochs.saturating_mul(n.max(1));
    let mut converged = false;
    for iteration in 0..max_iterations {
        let (i, j, gap) = solver.select_pair();
        if gap <= cfg.tolerance {
            converged = true;
            trace.push(solver.dual_objective());
            break;
        }
        solver.update_pair(i, j);
        if iteration % n == n - 1 {
            trace.push(solver.dual_objective());
        }
    }
    if !converged {
        trace.push(solver.dual_objective());
    }

    let intercept = solver.intercept();
    let weights = solver.w.iter().map(|&w| R::from_f64_const(w)).collect();
    Ok((
        SvmModel {
            weights,
            intercept: R::from_f64_const(intercept),
        },
        trace,
    ))
}

/// Working state of the sequential minimal optimization on the dual
/// `min 0.5 a'Qa - e'a` with `0 <= a <= C` and `sum sign_i a_i = 0`,
/// where `Q_ij = sign_i sign_j x_i.x_j`.
struct Smo<'a> {
    rows: &'a [Vec<f64>],
    sign: &'a [f64],
    alpha: Vec<f64>,
    /// gradient[i] = (Q alpha)_i - 1 = sign_i (w.x_i) - 1
    gradient: Vec<f64>,
    /// w = sum alpha_i sign_i x_i
    w: Vec<f64>,
    q_cache: Vec<Option<Vec<f64>>>,
    c: f64,
}

const TAU: f64 = 1e-12;

impl Smo<'_> {
    fn in_up_set(&self, t: usize) -> bool {
        (self.sign[t] > 0.0 && self.alpha[t] < self.c)
            || (self.sign[t] < 0.0 && self.alpha[t] > 0.0)
    }

    fn in_low_set(&self, t: usize) -> bool {
        (self.sign[t] > 0.0 && self.alpha[t] > 0.0)
            || (self.sign[t] < 0.0 && self.alpha[t] < self.c)
    }

    /// Maximal violating pair: the argmax of -sign*gradient over the up
    /// set and the argmin over the low set, with the KKT gap between them.
    fn select_pair(&self) -> (usize, usize, f64) {
        let mut best_i = usize::MAX;
        let mut m = f64::NEG_INFINITY;
        let mut best_j = usize::MAX;
        let mut big_m = f64::INFINITY;
        for t in 0..self.alpha.len() {
            let value = -self.sign[t] * self.gradient[t];
            if self.in_up_set(t) && value > m {
                m = value;
                best_i = t;
            }
            if self.in_low_set(t) && value < big_m {
                big_m = value;
                best_j = t;
            }
        }
        (best_i, best_j, m - big_m)
    }

    fn q_row(&mut self, i: usize) -> &[f64] {
        if self.q_cache[i].is_none() {
            let xi = &self.rows[i];
            let row: Vec<f64> = self
                .rows
                .iter()
                .enumerate()
                .map(|(t, xt)| self.sign[i] * self.sign[t] * dot(xi, xt))
                .collect();
            self.q_cache[i] = Some(row);
        }
        self.q_cache[i].as_deref().expect("just filled")
    }

    /// Exact minimization over the (i, j) pair inside the feasible box.
    fn update_pair(&mut self, i: usize, j: usize) {
        let qii = self.q_row(i)[i];
        let qjj = self.q_row(j)[j];
        let qij = self.q_row(i)[j];
        let (old_i, old_j) = (self.alpha[i], self.alpha[j]);
        let c = self.c;

        if self.sign[i] != self.sign[j] {
            let quad = (qii + qjj + 2.0 * qij).max(TAU);
            let delta = (-self.gradient[i] - self.gradient[j]) / quad;
            let diff = old_i - old_j;
            self.alpha[i] += delta;
            self.alpha[j] += delta;
            if diff > 0.0 {
                if self.alpha[j] < 0.0 {
                    self.alpha[j] = 0.0;
                    self.alpha[i] = diff;
                }
                if self.alpha[i] > c {
                    self.alpha[i] = c;
                    self.alpha[j] = c - diff;
                }
            } else {
                if self.alpha[i] < 0.0 {
                    self.alpha[i] = 0.0;
                    self.alpha[j] = -diff;
                }
                if self.alpha[j] > c {
                    self.alpha[j] = c;
                    self.alpha[i] = c + diff;
                }
            }
        } else {
            let quad = (qii + qjj - 2.0 * qij).max(TAU);
            let delta = (self.gradient[i] - self.gradient[j]) / quad;
            let sum = old_i + old_j;
            self.alpha[i] -= delta;
            self.alpha[j] += delta;
            if sum > c {
                if self.alpha[i] > c {
                    self.alpha[i] = c;
                    self.alpha[j] = sum - c;
                }
                if self.alpha[j] > c {
                    self.alpha[j] = c;
                    self.alpha[i] = sum - c;
                }
            } else {
                if self.alpha[j] < 0.0 {
                    self.alpha[j] = 0.0;
                    self.alpha[i] = sum;
                }
                if self.alpha[i] < 0.0 {
                    self.alpha[i] = 0.0;
                    self.alpha[j] = sum;
                }
            }
        }

        let delta_i = self.alpha[i] - old_i;
        let delta_j = self.alpha[j] - old_j;
        if delta_i == 0.0 && delta_j == 0.0 {
            return;
        }
        {
            let qi = self.q_row(i).to_vec();
            let qj = self.q_row(j).to_vec();
            for t in 0..self.gradient.len() {
                self.gradient[t] += delta_i * qi[t] + delta_j * qj[t];
            }
        }
        for (d, w) in self.w.iter_mut().enumerate() {
            *w += delta_i * self.sign[i] * self.rows[i][d]
                + delta_j * self.sign[j] * self.rows[j][d];
        }
    }

    fn dual_objective(&self) -> f64 {
        // f(a) = 0.5 a'Qa - e'a = 0.5 sum a_i (gradient_i - 1)
        0.5 * self
            .alpha
            .iter()
            .zip(&self.gradient)
            .map(|(&a, &g)| a * (g - 1.0))
            .sum::<f64>()
    }

    /// Intercept from the KKT conditions: for a free support vector,
    /// -sign*gradient equals the required intercept; the midpoint of the
    /// feasibility window covers the boundary-only case.
    fn intercept(&self) -> f64 {
        let mut m = f64::NEG_INFINITY;
        let mut big_m = f64::INFINITY;
        for t in 0..self.alpha.len() {
            let value = -self.sign[t] * self.gradient[t];
            if self.in_up_set(t) {
                m = m.max(value);
            }
            if self.in_low_set(t) {
                big_m = big_m.min(value);
            }
        }
        0.5 * (m + big_m)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Fold a margin onto a (decision, confidence) pair: positive iff the
/// margin is strictly positive, confidence is the logistic value folded to
/// [0.5, 1].
pub fn confidence_from_margin<R: Real>(margin: R) -> (bool, R) {
    let m = margin.as_f64();
    let sigma = 1.0 / (1.0 + (-m).exp());
    let confidence = sigma.max(1.0 - sigma);
    (m > 0.0, R::from_f64_const(confidence))
}

/// Score a single vector.
pub fn svm_confidence<R: Real>(model: &SvmModel<R>, v: &[R]) -> Result<(bool, R)> {
    Ok(confidence_from_margin(model.margin(v)?))
}

/// Aggregate page margins into one host decision: the host margin is the
/// arithmetic mean of its page margins.
pub fn host_score_from_pages<R: Real>(margins: &[R]) -> Result<(bool, R)> {
    if margins.is_empty() {
        return Err(Error::data("host has no page margins to aggregate"));
    }
    let sum = margins.iter().fold(R::zero(), |acc, &m| acc + m);
    let mean = sum / R::from_count(margins.len());
    Ok(confidence_from_margin(mean))
}

const FORMAT_TAG: &str = "linsvm/1";

/// Serialize under the `linsvm/1` tag: dimension, intercept, weights.
pub fn write_svm<R: Real, W: Write>(model: &SvmModel<R>, out: &mut W) -> std::io::Result<()> {
    writeln!(out, "{FORMAT_TAG}")?;
    writeln!(out, "dim {}", model.weights.len())?;
    writeln!(out, "intercept {}", model.intercept)?;
    write!(out, "w")?;
    for w in &model.weights {
        write!(out, " {w}")?;
    }
    writeln!(out)
}

/// Parse a `linsvm/1` dump.
pub fn read_svm<R: Real, B: BufRead>(input: &mut B) -> Result<SvmModel<R>> {
    let lines: Vec<String> = input
        .lines()
        .collect::<std::io::Result<_>>()
        .map_err(|e| Error::data(format!("svm read failed: {e}")))?;
    if lines.first().map(String::as_str) != Some(FORMAT_TAG) {
        return Err(Error::data(format!("expected {FORMAT_TAG} header")));
    }
    let dim: usize = lines
        .get(1)
        .and_then(|l| l.strip_prefix("dim "))
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::data("bad svm dim line"))?;
    let intercept = lines
        .get(2)
        .and_then(|l| l.strip_prefix("intercept "))
        .and_then(|s| s.parse::<f64>().ok())
        .map(R::from_f64_const)
        .ok_or_else(|| Error::data("bad svm intercept line"))?;
    let weights: Vec<R> = lines
        .get(3)
        .and_then(|l| l.strip_prefix("w"))
        .map(|rest| {
            rest.split(' ')
                .filter(|t| !t.is_empty())
                .map(|t| t.parse::<f64>().ok().map(R::from_f64_const))
                .collect::<Option<Vec<R>>>()
        })
        .flatten()
        .ok_or_else(|| Error::data("bad svm weight line"))?;
    if weights.len() != dim {
        return Err(Error::data("svm weight count does not match dim"));
    }
    Ok(SvmModel { weights, intercept })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tight() -> SvmConfig {
        SvmConfig {
            cost: 10.0,
            tolerance: 1e-8,
            max_epochs: 10_000,
            seed: 1,
        }
    }

    #[test]
    fn symmetric_pair_reaches_the_analytic_optimum() {
        // x = -1 labeled negative, x = +1 labeled positive, large cost:
        // the optimum is w = 1, intercept = 0, objective 0.5.
        let x = vec![vec![-1.0_f64], vec![1.0]];
        let y = vec![false, true];
        let model = train_svm(&x, &y, &tight()).unwrap();
        assert!(model.weights[0] > 0.0);
        assert!((model.weights[0] - 1.0).abs() < 1e-6, "{model:?}");
        assert!(model.intercept.abs() < 1e-6, "{model:?}");
        let (pos, _) = svm_confidence(&model, &[1.0]).unwrap();
        let (neg, _) = svm_confidence(&model, &[-1.0]).unwrap();
        assert!(pos);
        assert!(!neg);
        let objective = svm_objective(&model, &x, &y, 10.0);
        assert!((objective - 0.5).abs() < 1e-6, "{objective}");
    }

    #[test]
    fn single_class_input_is_rejected() {
        let x = vec![vec![0.0], vec![1.0]];
        assert!(train_svm(&x, &[true, true], &SvmConfig::default()).is_err());
        let bad_cost = SvmConfig {
            cost: 0.0,
            ..SvmConfig::default()
        };
        assert!(train_svm(&x, &[true, false], &bad_cost).is_err());
    }

    #[test]
    fn separable_data_trains_to_zero_error_at_high_cost() {
        let x: Vec<Vec<f64>> = (0..12)
            .map(|i| vec![i as f64, if i < 6 { -2.0 } else { 2.0 }])
            .collect();
        let y: Vec<bool> = (0..12).map(|i| i >= 6).collect();
        let model = train_svm(&x, &y, &tight()).unwrap();
        for (row, &label) in x.iter().zip(&y) {
            let (positive, _) = svm_confidence(&model, row).unwrap();
            assert_eq!(positive, label, "row {row:?}");
        }
    }

    #[test]
    fn dual_objective_trace_is_non_increasing() {
        let x: Vec<Vec<f64>> = (0..16)
            .map(|i| vec![(i % 5) as f64 - 2.0, ((i * 3) % 7) as f64 - 3.0])
            .collect();
        let y: Vec<bool> = (0..16).map(|i| (i % 3) != 0).collect();
        let cfg = SvmConfig {
            cost: 1.0,
            tolerance: 1e-10,
            max_epochs: 5000,
            seed: 1,
        };
        let (_, trace) = train_svm_traced(&x, &y, &cfg).unwrap();
        assert!(trace.len() > 1);
        for pair in trace.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-12, "{pair:?}");
        }
    }

    #[test]
    fn training_is_deterministic() {
        let x: Vec<Vec<f64>> = (0..20)
            .map(|i| vec![(i % 4) as f64, ((i * 5) % 9) as f64, (i % 2) as f64])
            .collect();
        let y: Vec<bool> = (0..20).map(|i| (i % 5) < 2).collect();
        let a = train_svm(&x, &y, &SvmConfig::default()).unwrap();
        let b = train_svm(&x, &y, &SvmConfig::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn margin_confidence_examples() {
        // margin 0: negative at confidence 0.5
        let (positive, confidence) = confidence_from_margin(0.0_f64);
        assert!(!positive);
        assert_eq!(confidence, 0.5);
        // margin -2: negative at sigma(2) = 0.88079...
        let (positive, confidence) = confidence_from_margin(-2.0_f64);
        assert!(!positive);
        assert!((confidence - 0.8807970779778823).abs() < 1e-12);
        // huge margin: confidence approaches 1
        let (positive, confidence) = confidence_from_margin(500.0_f64);
        assert!(positive);
        assert!((confidence - 1.0).abs() < 1e-12);
    }

    #[test]
    fn confidence_is_symmetric_and_monotone_in_magnitude() {
        let mut previous = 0.0_f64;
        for step in 0..200 {
            let margin = step as f64 * 0.05;
            let (_, up) = confidence_from_margin(margin);
            let (_, down) = confidence_from_margin(-margin);
            assert!((up - down).abs() < 1e-15);
            assert!(up >= previous);
            previous = up;
        }
    }

    #[test]
    fn host_aggregation_is_the_margin_mean() {
        let model = SvmModel {
            weights: vec![1.0],
            intercept: 0.0,
        };
        let margins: Vec<f64> = [[1.0], [1.0], [1.0]]
            .iter()
            .map(|p| model.margin(&p[..]).unwrap())
            .collect();
        let (positive, confidence) = host_score_from_pages(&margins).unwrap();
        assert!(positive);
        assert_eq!(confidence, confidence_from_margin(1.0_f64).1);

        // Margins +2 and -2 cancel: negative at 0.5.
        let (positive, confidence) = host_score_from_pages(&[2.0_f64, -2.0]).unwrap();
        assert!(!positive);
        assert_eq!(confidence, 0.5);

        // A single page behaves exactly like svm_confidence.
        let single = host_score_from_pages(&[3.0_f64]).unwrap();
        assert_eq!(single, confidence_from_margin(3.0_f64));

        assert!(host_score_from_pages::<f64>(&[]).is_err());
    }

    #[test]
    fn margin_dimension_mismatch_errors() {
        let model = SvmModel {
            weights: vec![1.0, 2.0],
            intercept: 0.0,
        };
        assert!(model.margin(&[1.0]).is_err());
    }

    #[test]
    fn persistence_round_trips_bit_exactly() {
        let model: SvmModel<f64> = SvmModel {
            weights: vec![0.1, -2.25, 1.0 / 3.0],
            intercept: -0.07,
        };
        let mut buf = Vec::new();
        write_svm(&model, &mut buf).unwrap();
        let parsed: SvmModel<f64> = read_svm(&mut buf.as_slice()).unwrap();
        assert_eq!(parsed.intercept.to_bits(), model.intercept.to_bits());
        for (a, b) in parsed.weights.iter().zip(&model.weights) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
