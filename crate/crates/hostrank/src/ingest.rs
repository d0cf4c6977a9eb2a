//! File parsing and dataset assembly.
//!
//! All inputs are UTF-8, tab-separated text. Lines starting with `#` are
//! comments, except where a format defines a structural header (feature
//! files, page NLP files, and the dictionary). Missing numeric cells are
//! written `NA` and resolve to 0.0; tf-idf uses raw tf times natural-log
//! idf with document frequencies taken from the dictionary as given.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{
    DictEntry, Dictionary, FeatureBlock, FeatureKind, GenreLabel, HostId, LabelSet, Level,
    SparseTermVector,
};
use crate::scalar::Real;

/// One host with its dense feature blocks and aggregate term vector.
#[derive(Debug, Clone, PartialEq)]
pub struct HostRecord<R: Real> {
    pub id: HostId,
    pub link: FeatureBlock<R>,
    pub content: FeatureBlock<R>,
    pub terms: SparseTermVector<R>,
}

/// A parsed dataset: hosts, labels, and the optional term dictionary and
/// per-page NLP blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<R: Real> {
    pub hosts: Vec<HostRecord<R>>,
    pub labels: BTreeMap<HostId, LabelSet>,
    pub dictionary: Option<Dictionary>,
    pub pages: Option<BTreeMap<HostId, Vec<FeatureBlock<R>>>>,
}

impl<R: Real> Dataset<R> {
    /// Assemble a dataset from parsed parts, checking the cross-file
    /// invariants: every labeled host has features, and block dimensions
    /// are uniform.
    pub fn assemble(
        link: BTreeMap<HostId, FeatureBlock<R>>,
        content: BTreeMap<HostId, FeatureBlock<R>>,
        terms: BTreeMap<HostId, SparseTermVector<R>>,
        labels: BTreeMap<HostId, LabelSet>,
        dictionary: Option<Dictionary>,
        pages: Option<BTreeMap<HostId, Vec<FeatureBlock<R>>>>,
    ) -> Result<Self> {
        let ids: BTreeSet<HostId> = link.keys().cloned().collect();
        let content_ids: BTreeSet<HostId> = content.keys().cloned().collect();
        if ids != content_ids {
            let missing = ids
                .symmetric_difference(&content_ids)
                .next()
                .expect("sets differ");
            return Err(Error::data(format!(
                "host {missing} present in only one of the link/content feature files"
            )));
        }
        for labeled in labels.keys() {
            if !ids.contains(labeled) {
                return Err(Error::data(format!(
                    "labeled host {labeled} has no feature records"
                )));
            }
        }
        let mut terms = terms;
        let mut hosts = Vec::with_capacity(ids.len());
        for id in ids {
            let link_block = link.get(&id).expect("checked above").clone();
            let content_block = content.get(&id).expect("checked above").clone();
            let term_vec = terms.remove(&id).unwrap_or_else(SparseTermVector::empty);
            hosts.push(HostRecord {
                id,
                link: link_block,
                content: content_block,
                terms: term_vec,
            });
        }
        if let Some(extra) = terms.keys().next() {
            return Err(Error::data(format!("term vector for unknown host {extra}")));
        }
        let dataset = Dataset {
            hosts,
            labels,
            dictionary,
            pages,
        };
        dataset.check_dimensions()?;
        Ok(dataset)
    }

    fn check_dimensions(&self) -> Result<()> {
        if let Some(first) = self.hosts.first() {
            let link_dim = first.link.len();
            let content_dim = first.content.len();
            for h in &self.hosts {
                if h.link.len() != link_dim || h.content.len() != content_dim {
                    return Err(Error::data(format!(
                        "feature dimensions for {} differ from the rest of the dataset",
                        h.id
                    )));
                }
            }
        }
        if let Some(pages) = &self.pages {
            let mut dim = None;
            for (host, blocks) in pages {
                for block in blocks {
                    let d = *dim.get_or_insert(block.len());
                    if block.len() != d {
                        return Err(Error::data(format!(
                            "NLP dimension {} for {host} differs from {d}",
                            block.len()
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn host(&self, id: &HostId) -> Option<&HostRecord<R>> {
        self.hosts
            .binary_search_by(|h| h.id.cmp(id))
            .ok()
            .map(|i| &self.hosts[i])
    }

    pub fn pages_of(&self, id: &HostId) -> Option<&[FeatureBlock<R>]> {
        self.pages
            .as_ref()
            .and_then(|p| p.get(id))
            .map(|v| v.as_slice())
    }
}

/// Paths of the files making up one dataset. Term and page files are
/// optional so the link+content-only mode can run without them.
#[derive(Debug, Clone)]
pub struct DatasetPaths {
    pub link: PathBuf,
    pub content: PathBuf,
    pub labels: PathBuf,
    pub terms: Option<PathBuf>,
    pub nlp: Option<PathBuf>,
}

impl DatasetPaths {
    /// Standard file layout inside a dataset directory.
    pub fn in_dir(dir: &Path) -> Self {
        let existing = |name: &str| {
            let p = dir.join(name);
            p.exists().then_some(p)
        };
        DatasetPaths {
            link: dir.join("link.tsv"),
            content: dir.join("content.tsv"),
            labels: dir.join("labels.tsv"),
            terms: existing("terms.tsv"),
            nlp: existing("nlp.tsv"),
        }
    }
}

/// Load and assemble a dataset from disk.
pub fn load_dataset<R: Real>(
    paths: &DatasetPaths,
    dictionary: Option<&Path>,
) -> Result<Dataset<R>> {
    let dict = dictionary.map(parse_dictionary).transpose()?;
    let link = parse_host_features(&paths.link, FeatureKind::Link)?;
    let content = parse_host_features(&paths.content, FeatureKind::Content)?;
    let terms = match (&paths.terms, &dict) {
        (Some(path), Some(dict)) => parse_term_vectors(path, dict)?,
        (Some(_), None) => {
            return Err(Error::data(
                "term vectors given without a dictionary to validate them",
            ))
        }
        (None, _) => BTreeMap::new(),
    };
    let labels = parse_labels(&paths.labels)?;
    let pages = paths.nlp.as_deref().map(parse_page_nlp).transpose()?;
    Dataset::assemble(link, content, terms, labels, dict, pages)
}

fn open_lines(path: &Path) -> Result<impl Iterator<Item = (usize, std::io::Result<String>)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(BufReader::new(file)
        .lines()
        .enumerate()
        .map(|(i, line)| (i + 1, line)))
}

fn parse_cell<R: Real>(path: &Path, line_no: usize, cell: &str) -> Result<R> {
    if cell == "NA" {
        return Ok(R::zero());
    }
    cell.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .map(R::from_f64_const)
        .ok_or_else(|| Error::parse(path, line_no, format!("non-numeric cell {cell:?}")))
}

fn parse_host_cell(path: &Path, line_no: usize, cell: &str) -> Result<HostId> {
    HostId::new(cell).map_err(|_| Error::parse(path, line_no, "empty host id"))
}

/// Parse a host-level dense feature file.
///
/// Format: header `#host_id<TAB>name...`, then one row per host with as
/// many numeric cells as header names. `NA` cells become 0.0.
pub fn parse_host_features<R: Real>(
    path: &Path,
    kind: FeatureKind,
) -> Result<BTreeMap<HostId, FeatureBlock<R>>> {
    let mut lines = open_lines(path)?;
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "missing header line"))?;
    let header = header.map_err(|e| Error::io(path, e))?;
    let mut columns = header.split('\t');
    if columns.next() != Some("#host_id") {
        return Err(Error::parse(path, 1, "header must start with #host_id"));
    }
    let names: Arc<[String]> = columns.map(str::to_string).collect::<Vec<_>>().into();
    if names.is_empty() {
        return Err(Error::parse(path, 1, "header names no feature columns"));
    }

    let mut blocks = BTreeMap::new();
    for (line_no, line) in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let mut cells = line.split('\t');
        let host = parse_host_cell(path, line_no, cells.next().unwrap_or(""))?;
        let values: Vec<R> = cells
            .map(|c| parse_cell(path, line_no, c))
            .collect::<Result<_>>()?;
        if values.len() != names.len() {
            return Err(Error::parse(
                path,
                line_no,
                format!(
                    "expected {} value cells, found {}",
                    names.len(),
                    values.len()
                ),
            ));
        }
        let block = FeatureBlock::new(kind, names.clone(), values)
            .map_err(|e| Error::parse(path, line_no, e.to_string()))?;
        if blocks.insert(host.clone(), block).is_some() {
            return Err(Error::parse(
                path,
                line_no,
                format!("duplicate row for host {host}"),
            ));
        }
    }
    Ok(blocks)
}

/// Parse host-level aggregate term vectors.
///
/// Format: `host_id<TAB>id:tf id:tf ...`; entries are canonicalized to
/// ascending term id, duplicates and ids outside the dictionary are
/// rejected.
pub fn parse_term_vectors<R: Real>(
    path: &Path,
    dict: &Dictionary,
) -> Result<BTreeMap<HostId, SparseTermVector<R>>> {
    let mut vectors = BTreeMap::new();
    for (line_no, line) in open_lines(path)? {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (host_cell, rest) = line.split_once('\t').unwrap_or((line.as_str(), ""));
        let host = parse_host_cell(path, line_no, host_cell)?;
        let mut entries = Vec::new();
        for token in rest.split(' ').filter(|t| !t.is_empty()) {
            let (id_str, tf_str) = token
                .split_once(':')
                .ok_or_else(|| Error::parse(path, line_no, format!("malformed entry {token:?}")))?;
            let id: u32 = id_str
                .parse()
                .map_err(|_| Error::parse(path, line_no, format!("bad term id {id_str:?}")))?;
            let tf: i64 = tf_str
                .parse()
                .map_err(|_| {
                    Error::parse(path, line_no, format!("bad term frequency {tf_str:?}"))
                })?;
            if tf < 0 {
                return Err(Error::parse(
                    path,
                    line_no,
                    format!("negative term frequency {tf}"),
                ));
            }
            if dict.get(id).is_none() {
                return Err(Error::parse(
                    path,
                    line_no,
                    format!("term id {id} not in dictionary"),
                ));
            }
            entries.push((id, tf as u32));
        }
        entries.sort_by_key(|&(id, _)| id);
        if let Some(dup) = entries.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::parse(
                path,
                line_no,
                format!("duplicate term id {}", dup[0].0),
            ));
        }
        let vector = SparseTermVector::new(entries)
            .map_err(|e| Error::parse(path, line_no, e.to_string()))?;
        if vectors.insert(host.clone(), vector).is_some() {
            return Err(Error::parse(
                path,
                line_no,
                format!("duplicate row for host {host}"),
            ));
        }
    }
    Ok(vectors)
}

/// tf-idf weighting: weight_i = tf_i * ln(corpus_size / df_i).
///
/// Idempotent on the tf entries; the returned vector carries the weights.
pub fn tfidf_weight<R: Real>(
    v: &SparseTermVector<R>,
    dict: &Dictionary,
) -> Result<SparseTermVector<R>> {
    let n = dict.corpus_size() as f64;
    let mut weights = Vec::with_capacity(v.len());
    for &(id, tf) in v.entries() {
        let entry = dict
            .get(id)
            .ok_or_else(|| Error::data(format!("term id {id} not in dictionary")))?;
        if entry.df == 0 {
            return Err(Error::data(format!(
                "term id {id} has zero document frequency"
            )));
        }
        let idf = (n / entry.df as f64).ln();
        weights.push(R::from_f64_const(tf as f64 * idf));
    }
    SparseTermVector::with_weights(v.entries().to_vec(), weights)
}

/// Parse the ground-truth label file.
///
/// Format: `host_id<TAB>genre<TAB>neutrality<TAB>bias<TAB>trust` where the
/// genre is one of the six canonical names (or `-` when unknown) and facet
/// cells are `1`, `2`, `3`, or `-`.
pub fn parse_labels(path: &Path) -> Result<BTreeMap<HostId, LabelSet>> {
    let mut labels = BTreeMap::new();
    for (line_no, line) in open_lines(path)? {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cells: Vec<&str> = line.split('\t').collect();
        if cells.len() != 5 {
            return Err(Error::parse(
                path,
                line_no,
                format!("expected 5 cells, found {}", cells.len()),
            ));
        }
        let host = parse_host_cell(path, line_no, cells[0])?;
        let genre = match cells[1] {
            "-" => None,
            name => Some(
                GenreLabel::from_name(name)
                    .ok_or_else(|| Error::parse(path, line_no, format!("unknown genre {name:?}")))?,
            ),
        };
        let facet = |cell: &str| -> Result<Option<Level>> {
            match cell {
                "-" => Ok(None),
                "1" => Ok(Some(Level::ONE)),
                "2" => Ok(Some(Level::TWO)),
                "3" => Ok(Some(Level::THREE)),
                other => Err(Error::parse(
                    path,
                    line_no,
                    format!("facet level {other:?} outside {{1,2,3,-}}"),
                )),
            }
        };
        let set = LabelSet {
            genre,
            neutrality: facet(cells[2])?,
            bias: facet(cells[3])?,
            trust: facet(cells[4])?,
        };
        if labels.insert(host.clone(), set).is_some() {
            return Err(Error::parse(
                path,
                line_no,
                format!("duplicate row for host {host}"),
            ));
        }
    }
    Ok(labels)
}

/// Parse the per-page NLP feature file, grouping pages by host.
///
/// Format: header `#host_id<TAB>page_url<TAB>name...`, then one row per
/// page. Columns named `bigram_*` are dropped. Rows are canonicalized to
/// (host, page_url) order so the result does not depend on file order.
pub fn parse_page_nlp<R: Real>(path: &Path) -> Result<BTreeMap<HostId, Vec<FeatureBlock<R>>>> {
    let mut lines = open_lines(path)?;
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "missing header line"))?;
    let header = header.map_err(|e| Error::io(path, e))?;
    let mut columns = header.split('\t');
    if columns.next() != Some("#host_id") || columns.next() != Some("page_url") {
        return Err(Error::parse(
            path,
            1,
            "header must start with #host_id\tpage_url",
        ));
    }
    let raw_names: Vec<String> = columns.map(str::to_string).collect();
    if raw_names.is_empty() {
        return Err(Error::parse(path, 1, "header names no feature columns"));
    }
    let kept: Vec<usize> = raw_names
        .iter()
        .enumerate()
        .filter(|(_, n)| !n.starts_with("bigram_"))
        .map(|(i, _)| i)
        .collect();
    let names: Arc<[String]> = kept
        .iter()
        .map(|&i| raw_names[i].clone())
        .collect::<Vec<_>>()
        .into();

    let mut rows: Vec<(HostId, String, Vec<R>)> = Vec::new();
    for (line_no, line) in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split('\t').collect();
        if cells.len() != raw_names.len() + 2 {
            return Err(Error::parse(
                path,
                line_no,
                format!(
                    "expected {} cells, found {}",
                    raw_names.len() + 2,
                    cells.len()
                ),
            ));
        }
        let host = parse_host_cell(path, line_no, cells[0])?;
        let url = cells[1].to_string();
        let values: Vec<R> = kept
            .iter()
            .map(|&i| parse_cell(path, line_no, cells[i + 2]))
            .collect::<Result<_>>()?;
        rows.push((host, url, values));
    }
    rows.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(&b.1)));

    let mut pages: BTreeMap<HostId, Vec<FeatureBlock<R>>> = BTreeMap::new();
    for (host, _, values) in rows {
        let block = FeatureBlock::new(FeatureKind::Nlp, names.clone(), values)?;
        pages.entry(host).or_default().push(block);
    }
    Ok(pages)
}

/// Parse the dictionary file.
///
/// Format: first line `#N=<corpus_size>`, then rows `term_id<TAB>term<TAB>df`.
pub fn parse_dictionary(path: &Path) -> Result<Dictionary> {
    let mut lines = open_lines(path)?;
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "missing #N= header line"))?;
    let header = header.map_err(|e| Error::io(path, e))?;
    let corpus_size: u32 = header
        .strip_prefix("#N=")
        .and_then(|n| n.parse().ok())
        .ok_or_else(|| Error::parse(path, 1, "first line must be #N=<corpus_size>"))?;

    let mut entries = BTreeMap::new();
    for (line_no, line) in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cells: Vec<&str> = line.split('\t').collect();
        if cells.len() != 3 {
            return Err(Error::parse(
                path,
                line_no,
                format!("expected 3 cells, found {}", cells.len()),
            ));
        }
        let id: u32 = cells[0]
            .parse()
            .map_err(|_| Error::parse(path, line_no, format!("bad term id {:?}", cells[0])))?;
        let df: u32 = cells[2]
            .parse()
            .map_err(|_| Error::parse(path, line_no, format!("bad df {:?}", cells[2])))?;
        let prev = entries.insert(
            id,
            DictEntry {
                term: cells[1].to_string(),
                df,
            },
        );
        if prev.is_some() {
            return Err(Error::parse(path, line_no, format!("duplicate term id {id}")));
        }
    }
    Dictionary::new(entries, corpus_size).map_err(|e| match e {
        Error::Data(msg) => Error::parse(path, 1, msg),
        other => other,
    })
}
