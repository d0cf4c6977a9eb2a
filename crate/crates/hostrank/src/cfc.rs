//! Class-feature-centroid classifier over tf-idf term vectors: the
//! ensemble's classifier for the term-frequency family.
//!
//! Each category gets one centroid. The weight of term t in the centroid of
//! category c is
//!
//! ```text
//! weight(t, c) = b^(DF_t_c / |c|) * ln(|C| / CF_t)
//! ```
//!
//! where DF_t_c counts documents of c containing t, |c| is the document
//! count of c, |C| the number of categories, and CF_t the number of
//! categories with at least one document containing t. The inner-class
//! factor rewards terms frequent within the class; the inter-class factor
//! zeroes out terms present in every category. Classification is cosine
//! similarity between the tf-idf document vector and each centroid.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::model::SparseTermVector;
use crate::scalar::Real;

/// Category names used by the ensemble's one-vs-rest protocol.
pub const POSITIVE: &str = "positive";
pub const NEGATIVE: &str = "negative";

/// Per-category sparse centroids. Zero weights are not stored.
#[derive(Debug, Clone, PartialEq)]
pub struct CfcModel<R: Real> {
    categories: Vec<String>,
    centroids: Vec<BTreeMap<u32, R>>,
    b: R,
}

/// Build centroids from (document, category) pairs.
///
/// Requires at least two categories, each with at least one document.
pub fn build_centroids<R: Real>(
    docs: &[(SparseTermVector<R>, String)],
    b: R,
) -> Result<CfcModel<R>> {
    if !(b > R::one()) {
        return Err(Error::config(format!("cfc base b must exceed 1, got {b}")));
    }
    if docs.is_empty() {
        return Err(Error::data("cannot build centroids from an empty corpus"));
    }
    let mut categories: Vec<String> = docs.iter().map(|(_, c)| c.clone()).collect();
    categories.sort();
    categories.dedup();
    if categories.len() < 2 {
        return Err(Error::data(format!(
            "centroids need at least 2 categories, got {}",
            categories.len()
        )));
    }
    let index_of: BTreeMap<&str, usize> = categories
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();

    // Document counts per category, document frequency per (term, category),
    // and the set of categories containing each term.
    let mut docs_per_category = vec![0usize; categories.len()];
    let mut df: BTreeMap<(u32, usize), usize> = BTreeMap::new();
    let mut categories_with_term: BTreeMap<u32, BTreeSet<usize>> = BTreeMap::new();
    for (doc, category) in docs {
        let c = index_of[category.as_str()];
        docs_per_category[c] += 1;
        for &(term, tf) in doc.entries() {
            if tf == 0 {
                continue;
            }
            *df.entry((term, c)).or_insert(0) += 1;
            categories_with_term.entry(term).or_default().insert(c);
        }
    }

    let total_categories = categories.len() as f64;
    let mut centroids = vec![BTreeMap::new(); categories.len()];
    for (&term, present_in) in &categories_with_term {
        let inter = (total_categories / present_in.len() as f64).ln();
        if inter == 0.0 {
            continue; // term appears in every category
        }
        for c in 0..categories.len() {
            let term_df = df.get(&(term, c)).copied().unwrap_or(0) as f64;
            let intra = b.as_f64().powf(term_df / docs_per_category[c] as f64);
            let weight = intra * inter;
            if weight > 0.0 {
                centroids[c].insert(term, R::from_f64_const(weight));
            }
        }
    }

    Ok(CfcModel {
        categories,
        centroids,
        b,
    })
}

impl<R: Real> CfcModel<R> {
    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn b(&self) -> R {
        self.b
    }

    pub fn centroid(&self, category: &str) -> Option<&BTreeMap<u32, R>> {
        let i = self.categories.iter().position(|c| c == category)?;
        Some(&self.centroids[i])
    }

    /// Cosine similarity of the (tf-idf weighted) document against every
    /// centroid, in category order. Zero-norm vectors score 0.
    pub fn classify(&self, doc: &SparseTermVector<R>) -> Result<Vec<(String, R)>> {
        let weights = doc
            .weights()
            .ok_or_else(|| Error::data("cfc needs a tf-idf weighted document"))?;
        let entries = doc.entries();
        let doc_norm = weights
            .iter()
            .fold(R::zero(), |acc, &w| acc + w * w)
            .sqrt();

        let scores = self
            .categories
            .iter()
            .zip(&self.centroids)
            .map(|(category, centroid)| {
                let centroid_norm = centroid
                    .values()
                    .fold(R::zero(), |acc, &w| acc + w * w)
                    .sqrt();
                let score = if doc_norm > R::zero() && centroid_norm > R::zero() {
                    let dot = entries
                        .iter()
                        .zip(weights)
                        .fold(R::zero(), |acc, (&(term, _), &w)| {
                            match centroid.get(&term) {
                                Some(&cw) => acc + w * cw,
                                None => acc,
                            }
                        });
                    dot / (doc_norm * centroid_norm)
                } else {
                    R::zero()
                };
                (category.clone(), score)
            })
            .collect();
        Ok(scores)
    }

    /// Binary protocol for the ensemble: positive iff the positive
    /// centroid's score strictly exceeds the negative one's; confidence is
    /// the normalized score ratio, or 0.5 when both scores are zero.
    pub fn classify_binary(&self, doc: &SparseTermVector<R>) -> Result<(bool, R)> {
        if self.categories.len() != 2
            || self.categories[0] != NEGATIVE
            || self.categories[1] != POSITIVE
        {
            return Err(Error::data(
                "binary classification needs exactly the positive/negative categories",
            ));
        }
        let scores = self.classify(doc)?;
        let negative_score = scores[0].1;
        let positive_score = scores[1].1;
        let total = positive_score + negative_score;
        let positive = positive_score > negative_score;
        let confidence_in_positive = if total > R::zero() {
            positive_score / total
        } else {
            R::from_f64_const(0.5)
        };
        let confidence = if positive {
            confidence_in_positive
        } else {
            R::one() - confidence_in_positive
        };
        Ok((positive, confidence))
    }
}

const FORMAT_TAG: &str = "cfc/1";

/// Serialize under the `cfc/1` tag: the base, then one line per category
/// with its sparse weights.
pub fn write_cfc<R: Real, W: Write>(model: &CfcModel<R>, out: &mut W) -> std::io::Result<()> {
    writeln!(out, "{FORMAT_TAG}")?;
    writeln!(out, "b {}", model.b)?;
    for (category, centroid) in model.categories.iter().zip(&model.centroids) {
        write!(out, "{category}\t")?;
        let mut first = true;
        for (term, weight) in centroid {
            if !first {
                write!(out, " ")?;
            }
            write!(out, "{term}:{weight}")?;
            first = false;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Parse a `cfc/1` dump.
pub fn read_cfc<R: Real, B: BufRead>(input: &mut B) -> Result<CfcModel<R>> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .transpose()
        .map_err(|e| Error::data(format!("cfc read failed: {e}")))?
        .ok_or_else(|| Error::data("empty cfc dump"))?;
    if header != FORMAT_TAG {
        return Err(Error::data(format!("expected {FORMAT_TAG} header")));
    }
    let b_line = lines
        .next()
        .transpose()
        .map_err(|e| Error::data(format!("cfc read failed: {e}")))?
        .ok_or_else(|| Error::data("missing cfc base line"))?;
    let b = b_line
        .strip_prefix("b ")
        .and_then(|s| s.parse::<f64>().ok())
        .map(R::from_f64_const)
        .ok_or_else(|| Error::data("bad cfc base line"))?;

    let mut categories = Vec::new();
    let mut centroids = Vec::new();
    for line in lines {
        let line = line.map_err(|e| Error::data(format!("cfc read failed: {e}")))?;
        if line.is_empty() {
            continue;
        }
        let (category, rest) = line
            .split_once('\t')
            .ok_or_else(|| Error::data("malformed cfc category line"))?;
        let mut centroid = BTreeMap::new();
        for token in rest.split(' ').filter(|t| !t.is_empty()) {
            let (term, weight) = token
                .split_once(':')
                .ok_or_else(|| Error::data(format!("malformed cfc weight {token:?}")))?;
            let term: u32 = term
                .parse()
                .map_err(|_| Error::data(format!("bad term id {term:?}")))?;
            let weight = weight
                .parse::<f64>()
                .ok()
                .map(R::from_f64_const)
                .ok_or_else(|| Error::data(format!("bad weight {weight:?}")))?;
            centroid.insert(term, weight);
        }
        categories.push(category.to_string());
        centroids.push(centroid);
    }
    if categories.len() < 2 {
        return Err(Error::data("cfc dump holds fewer than 2 categories"));
    }
    Ok(CfcModel {
        categories,
        centroids,
        b,
    })
}
