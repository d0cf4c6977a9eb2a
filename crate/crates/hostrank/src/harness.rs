//! Synthetic dataset generation with planted signal, and the end-to-end
//! task runners.
//!
//! The generator mirrors the production corpus's class imbalance: each
//! category's positive rate defaults to the published training
//! distribution, genres are drawn from the renormalized rates (they are
//! mutually exclusive), facets independently. Every category plants a
//! disjoint feature block in each dense family (Gaussian mean shift of
//! `signal` for positive hosts) and a disjoint topic-word block in the
//! vocabulary, so each classifier sees family-specific signal. Everything
//! is drawn from one seeded generator in a fixed order: identical specs
//! produce byte-identical files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ensemble::{
    train_ensemble, write_assignments, write_predictions, EnsembleConfig, Mode, PredictOptions,
};
use crate::error::{Error, Result};
use crate::eval::{report, NdcgReport, TaskId};
use crate::ingest::{load_dataset, DatasetPaths};
use crate::model::{
    category_universe, Category, Dictionary, Facet, GenreLabel, HostId, LabelSet, RankedList,
};
use crate::quality::{multilingual_rank, rank_by_quality, write_quality_ranking};
use crate::rng::SplitMix64;
use crate::scalar::Real;

/// Per-category positive rates. Defaults follow the published training
/// distribution; genre rates are renormalized to sum to one when assigning
/// the mutually exclusive genres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CategoryRates {
    pub webspam: f64,
    pub news: f64,
    pub commercial: f64,
    pub educational: f64,
    pub discussion: f64,
    pub personal: f64,
    pub bias: f64,
    pub neutrality: f64,
    pub trust: f64,
}

impl Default for CategoryRates {
    fn default() -> Self {
        CategoryRates {
            webspam: 0.04,
            news: 0.047,
            commercial: 0.454,
            educational: 0.43,
            discussion: 0.053,
            personal: 0.237,
            bias: 0.017,
            neutrality: 0.966,
            trust: 0.981,
        }
    }
}

impl CategoryRates {
    fn genre_rate(&self, genre: GenreLabel) -> f64 {
        match genre {
            GenreLabel::WebSpam => self.webspam,
            GenreLabel::NewsEditorial => self.news,
            GenreLabel::Commercial => self.commercial,
            GenreLabel::EducationalResearch => self.educational,
            GenreLabel::Discussion => self.discussion,
            GenreLabel::PersonalLeisure => self.personal,
        }
    }

    fn facet_rate(&self, facet: Facet) -> f64 {
        match facet {
            Facet::Neutrality => self.neutrality,
            Facet::Bias => self.bias,
            Facet::Trustiness => self.trust,
        }
    }

    fn validate(&self) -> Result<()> {
        let all = [
            self.webspam,
            self.news,
            self.commercial,
            self.educational,
            self.discussion,
            self.personal,
            self.bias,
            self.neutrality,
            self.trust,
        ];
        if all.iter().any(|r| !(*r > 0.0 && *r < 1.0)) {
            return Err(Error::config("category rates must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Generator parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub n_train_hosts: usize,
    pub n_test_hosts: usize,
    pub pages_per_host_min: usize,
    pub pages_per_host_max: usize,
    pub link_dim: usize,
    pub content_dim: usize,
    pub nlp_dim: usize,
    pub vocab_size: usize,
    pub rates: CategoryRates,
    pub signal: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_train_hosts: 500,
            n_test_hosts: 200,
            pages_per_host_min: 1,
            pages_per_host_max: 3,
            link_dim: 27,
            content_dim: 18,
            nlp_dim: 18,
            vocab_size: 900,
            rates: CategoryRates::default(),
            signal: 3.0,
            seed: 1,
        }
    }
}

const N_CATEGORIES: usize = 9;

impl SynthSpec {
    fn validate(&self) -> Result<()> {
        self.rates.validate()?;
        if self.n_train_hosts < 20 || self.n_test_hosts < 20 {
            return Err(Error::config(
                "synthetic sets need at least 20 hosts each to cover every category",
            ));
        }
        if self.pages_per_host_min == 0
            || self.pages_per_host_min > self.pages_per_host_max
            || self.pages_per_host_max > 99
        {
            return Err(Error::config("pages per host must satisfy 1 <= min <= max <= 99"));
        }
        for (dim, family) in [
            (self.link_dim, "link"),
            (self.content_dim, "content"),
            (self.nlp_dim, "nlp"),
        ] {
            if dim < N_CATEGORIES {
                return Err(Error::config(format!(
                    "{family} dimension {dim} too small to plant all {N_CATEGORIES} signals"
                )));
            }
        }
        if self.vocab_size < 4 * N_CATEGORIES {
            return Err(Error::config(format!(
                "vocabulary of {} too small to plant all topic blocks",
                self.vocab_size
            )));
        }
        if !(self.signal >= 0.0) {
            return Err(Error::config("signal strength must be non-negative"));
        }
        Ok(())
    }

    fn background_terms(&self) -> usize {
        self.vocab_size / 2
    }

    fn topic_block(&self) -> usize {
        (self.vocab_size - self.background_terms()) / N_CATEGORIES
    }
}

/// Paths produced by [`generate`].
#[derive(Debug, Clone)]
pub struct GeneratedData {
    pub train: DatasetPaths,
    pub test: DatasetPaths,
    pub dictionary: PathBuf,
    pub manifest: PathBuf,
}

struct SynthHost {
    id: HostId,
    labels: LabelSet,
}

fn positive_for(labels: &LabelSet, category: Category) -> bool {
    labels.binary_class(category).unwrap_or(false)
}

fn draw_labels(spec: &SynthSpec, rng: &mut SplitMix64, prefix: &str, count: usize) -> Vec<SynthHost> {
    let genre_total: f64 = GenreLabel::ALL
        .iter()
        .map(|&g| spec.rates.genre_rate(g))
        .sum();
    let mut hosts = Vec::with_capacity(count);
    for i in 0..count {
        let id = HostId::new(format!("{prefix}{:05}.eu", i + 1)).expect("non-empty");
        let mut pick = rng.next_f64() * genre_total;
        let mut genre = GenreLabel::PersonalLeisure;
        for candidate in GenreLabel::ALL {
            let rate = spec.rates.genre_rate(candidate);
            if pick < rate {
                genre = candidate;
                break;
            }
            pick -= rate;
        }
        let facet = |rng: &mut SplitMix64, facet: Facet| {
            if rng.next_f64() < spec.rates.facet_rate(facet) {
                facet.positive_level()
            } else {
                facet.negative_level()
            }
        };
        let labels = LabelSet {
            genre: Some(genre),
            neutrality: Some(facet(rng, Facet::Neutrality)),
            bias: Some(facet(rng, Facet::Bias)),
            trust: Some(facet(rng, Facet::Trustiness)),
        };
        hosts.push(SynthHost { id, labels });
    }
    enforce_minimum_support(&mut hosts);
    hosts
}

/// Deterministically nudge labels so every category keeps at least two
/// positive and two negative hosts: tiny sampled counts stall both SMOTE
/// and the one-vs-rest training contract.
fn enforce_minimum_support(hosts: &mut [SynthHost]) {
    const MIN: usize = 2;
    for genre in GenreLabel::ALL {
        loop {
            let count = hosts
                .iter()
                .filter(|h| h.labels.genre == Some(genre))
                .count();
            if count >= MIN {
                break;
            }
            let donor_genre = GenreLabel::ALL
                .into_iter()
                .max_by_key(|&g| hosts.iter().filter(|h| h.labels.genre == Some(g)).count())
                .expect("six genres");
            let donor = hosts
                .iter_mut()
                .find(|h| h.labels.genre == Some(donor_genre))
                .expect("donor genre has hosts");
            donor.labels.genre = Some(genre);
        }
    }
    for facet in Facet::ALL {
        for positive_side in [true, false] {
            loop {
                let wanted = if positive_side {
                    facet.positive_level()
                } else {
                    facet.negative_level()
                };
                let count = hosts
                    .iter()
                    .filter(|h| h.labels.facet_level(facet) == Some(wanted))
                    .count();
                if count >= MIN {
                    break;
                }
                let other = if positive_side {
                    facet.negative_level()
                } else {
                    facet.positive_level()
                };
                let victim = hosts
                    .iter_mut()
                    .find(|h| h.labels.facet_level(facet) == Some(other))
                    .expect("other side has hosts");
                match facet {
                    Facet::Neutrality => victim.labels.neutrality = Some(wanted),
                    Facet::Bias => victim.labels.bias = Some(wanted),
                    Facet::Trustiness => victim.labels.trust = Some(wanted),
                }
            }
        }
    }
}

fn dense_row(
    rng: &mut SplitMix64,
    dim: usize,
    labels: &LabelSet,
    signal: f64,
) -> Vec<f64> {
    let block = dim / N_CATEGORIES;
    let universe = category_universe();
    (0..dim)
        .map(|j| {
            let planted = (j / block).min(N_CATEGORIES - 1);
            let shift = if j < block * N_CATEGORIES && positive_for(labels, universe[planted]) {
                signal
            } else {
                0.0
            };
            shift + rng.next_gaussian()
        })
        .collect()
}

fn write_string(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Serialize a dictionary in its file format.
pub fn write_dictionary<W: Write>(dict: &Dictionary, out: &mut W) -> std::io::Result<()> {
    writeln!(out, "#N={}", dict.corpus_size())?;
    for (id, entry) in dict.iter() {
        writeln!(out, "{id}\t{}\t{}", entry.term, entry.df)?;
    }
    Ok(())
}

fn generate_set(
    spec: &SynthSpec,
    rng: &mut SplitMix64,
    dir: &Path,
    prefix: &str,
    count: usize,
) -> Result<DatasetPaths> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let hosts = draw_labels(spec, rng, prefix, count);

    let header = |family: &str, dim: usize| {
        let mut line = String::from("#host_id");
        for j in 0..dim {
            let _ = write!(line, "\t{family}_{j}");
        }
        line.push('\n');
        line
    };

    let mut link = header("link", spec.link_dim);
    let mut content = header("content", spec.content_dim);
    let mut nlp = String::from("#host_id\tpage_url");
    for j in 0..spec.nlp_dim {
        let _ = write!(nlp, "\tnlp_{j}");
    }
    nlp.push('\n');
    let mut terms = String::from("#terms/1\n");
    let mut labels_text = String::from("#labels/1\n");

    let universe = category_universe();
    let background = spec.background_terms();
    let topic_block = spec.topic_block();
    let topic_tokens = (spec.signal * 4.0).round() as usize;

    for host in &hosts {
        let append_row = |target: &mut String, values: &[f64]| {
            let _ = write!(target, "{}", host.id);
            for v in values {
                let _ = write!(target, "\t{v}");
            }
            target.push('\n');
        };
        append_row(
            &mut link,
            &dense_row(rng, spec.link_dim, &host.labels, spec.signal),
        );
        append_row(
            &mut content,
            &dense_row(rng, spec.content_dim, &host.labels, spec.signal),
        );

        let span = spec.pages_per_host_max - spec.pages_per_host_min + 1;
        let pages = spec.pages_per_host_min + rng.next_below(span);
        for page in 0..pages {
            let row = dense_row(rng, spec.nlp_dim, &host.labels, spec.signal);
            let _ = write!(nlp, "{}\tp{page:02}", host.id);
            for v in &row {
                let _ = write!(nlp, "\t{v}");
            }
            nlp.push('\n');
        }

        let mut counts: BTreeMap<u32, u32> = BTreeMap::new();
        let background_tokens = 30 + rng.next_below(11);
        for _ in 0..background_tokens {
            let id = rng.next_below(background) as u32;
            *counts.entry(id).or_insert(0) += 1;
        }
        if topic_tokens > 0 {
            for (k, &category) in universe.iter().enumerate() {
                if !positive_for(&host.labels, category) {
                    continue;
                }
                let drawn = topic_tokens + rng.next_below(3);
                for _ in 0..drawn {
                    let id = background + k * topic_block + rng.next_below(topic_block);
                    *counts.entry(id as u32).or_insert(0) += 1;
                }
            }
        }
        let _ = write!(terms, "{}\t", host.id);
        let mut first = true;
        for (id, tf) in counts {
            if !first {
                terms.push(' ');
            }
            let _ = write!(terms, "{id}:{tf}");
            first = false;
        }
        terms.push('\n');

        let set = &host.labels;
        let _ = writeln!(
            labels_text,
            "{}\t{}\t{}\t{}\t{}",
            host.id,
            set.genre.expect("generated").canonical_name(),
            set.neutrality.expect("generated"),
            set.bias.expect("generated"),
            set.trust.expect("generated"),
        );
    }

    write_string(&dir.join("link.tsv"), &link)?;
    write_string(&dir.join("content.tsv"), &content)?;
    write_string(&dir.join("nlp.tsv"), &nlp)?;
    write_string(&dir.join("terms.tsv"), &terms)?;
    write_string(&dir.join("labels.tsv"), &labels_text)?;
    Ok(DatasetPaths::in_dir(dir))
}

fn generate_dictionary(spec: &SynthSpec, rng: &mut SplitMix64) -> String {
    let corpus_size: u32 = 10_000;
    let background = spec.background_terms();
    let mut text = format!("#N={corpus_size}\n");
    for id in 0..spec.vocab_size {
        let df = if id < background {
            // Common background vocabulary.
            2000 + rng.next_below(6000) as u32
        } else {
            // Rare topical vocabulary: high idf.
            50 + rng.next_below(400) as u32
        };
        let _ = writeln!(text, "{id}\tterm{id:05}\t{df}");
    }
    text
}

fn sha256_hex(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(format!("{:x}", hasher.finalize()))
}

fn write_manifest(path: &Path, config_json: &str, files: &[PathBuf]) -> Result<()> {
    let mut text = String::from("#manifest/1\n");
    let _ = writeln!(text, "config\t{config_json}");
    for file in files {
        let _ = writeln!(text, "sha256\t{}\t{}", sha256_hex(file)?, file.display());
    }
    write_string(path, &text)
}

/// Generate a train and a test dataset (plus the shared dictionary and a
/// manifest) under `out_dir`, in the exact ingest file formats.
pub fn generate(spec: &SynthSpec, out_dir: &Path) -> Result<GeneratedData> {
    spec.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut rng = SplitMix64::new(spec.seed);

    let dictionary_path = out_dir.join("dictionary.tsv");
    write_string(&dictionary_path, &generate_dictionary(spec, &mut rng))?;

    let train = generate_set(spec, &mut rng, &out_dir.join("train"), "h", spec.n_train_hosts)?;
    let test = generate_set(spec, &mut rng, &out_dir.join("test"), "x", spec.n_test_hosts)?;

    let manifest = out_dir.join("manifest.txt");
    let config_json =
        serde_json::to_string(spec).map_err(|e| Error::Internal(e.to_string()))?;
    let mut files = vec![dictionary_path.clone()];
    for paths in [&train, &test] {
        files.push(paths.link.clone());
        files.push(paths.content.clone());
        files.push(paths.labels.clone());
        files.extend(paths.terms.clone());
        files.extend(paths.nlp.clone());
    }
    write_manifest(&manifest, &config_json, &files)?;

    Ok(GeneratedData {
        train,
        test,
        dictionary: dictionary_path,
        manifest,
    })
}

/// End-to-end run options.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunOptions {
    pub tree: crate::dtree::TreeConfig,
    pub smote: crate::preprocess::SmoteConfig,
    pub svm: crate::linsvm::SvmConfig,
    pub cfc_b: f64,
    pub news_postprocess: bool,
    /// Parallelism cap for per-category work; 0 uses the default pool.
    pub jobs: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            tree: crate::dtree::TreeConfig::default(),
            smote: crate::preprocess::SmoteConfig::default(),
            svm: crate::linsvm::SvmConfig::default(),
            cfc_b: std::f64::consts::E,
            news_postprocess: false,
            jobs: 0,
        }
    }
}

/// Everything a task run produces.
#[derive(Debug, Clone)]
pub struct TaskOutcome<R: Real> {
    pub report: NdcgReport<R>,
    pub rankings: Vec<(String, RankedList<R>)>,
    pub files: Vec<PathBuf>,
}

fn ensemble_config(task: TaskId, opts: &RunOptions) -> EnsembleConfig {
    let mode = match task {
        TaskId::Task3 => Mode::Multilingual,
        _ => Mode::Standard,
    };
    EnsembleConfig {
        mode,
        tree: opts.tree.clone(),
        smote: opts.smote.clone(),
        svm: opts.svm.clone(),
        cfc_b: opts.cfc_b,
        train_news_pairwise: opts.news_postprocess && mode == Mode::Standard,
    }
}

/// Execute the full pipeline for one task: ingest, train, vote, assign,
/// rank, evaluate, and write every output under `out_dir`.
pub fn run_task<R: Real>(
    task: TaskId,
    train_paths: &DatasetPaths,
    test_paths: &DatasetPaths,
    dictionary: Option<&Path>,
    out_dir: &Path,
    opts: &RunOptions,
) -> Result<TaskOutcome<R>> {
    if opts.jobs > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.jobs)
            .build()
            .map_err(|e| Error::Internal(e.to_string()))?;
        pool.install(|| run_task_inner(task, train_paths, test_paths, dictionary, out_dir, opts))
    } else {
        run_task_inner(task, train_paths, test_paths, dictionary, out_dir, opts)
    }
}

fn run_task_inner<R: Real>(
    task: TaskId,
    train_paths: &DatasetPaths,
    test_paths: &DatasetPaths,
    dictionary: Option<&Path>,
    out_dir: &Path,
    opts: &RunOptions,
) -> Result<TaskOutcome<R>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let multilingual = matches!(task, TaskId::Task3);

    let strip = |paths: &DatasetPaths| DatasetPaths {
        terms: None,
        nlp: None,
        ..paths.clone()
    };
    let (train_paths, test_paths, dictionary) = if multilingual {
        (strip(train_paths), strip(test_paths), None)
    } else {
        let dict = dictionary.ok_or_else(|| {
            Error::config("tasks 1 and 2 need the term dictionary")
        })?;
        (train_paths.clone(), test_paths.clone(), Some(dict))
    };

    let train: crate::ingest::Dataset<R> = load_dataset(&train_paths, dictionary)?;
    let test: crate::ingest::Dataset<R> = load_dataset(&test_paths, dictionary)?;

    let cfg = ensemble_config(task, opts);
    let model = train_ensemble(&train, &cfg)?;
    let predict_opts = PredictOptions {
        news_postprocess: opts.news_postprocess && cfg.mode == Mode::Standard,
    };
    let output = model.predict_all(&test, &predict_opts)?;

    let mut files = Vec::new();
    let write_out = |name: &str, bytes: Vec<u8>, files: &mut Vec<PathBuf>| -> Result<()> {
        let path = out_dir.join(name);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        files.push(path);
        Ok(())
    };

    let mut buf = Vec::new();
    write_predictions(&output.votes, &mut buf).map_err(|e| Error::Internal(e.to_string()))?;
    write_out("predictions.tsv", buf, &mut files)?;

    let mut buf = Vec::new();
    write_assignments(&output.assignments, &mut buf)
        .map_err(|e| Error::Internal(e.to_string()))?;
    write_out("assignments.tsv", buf, &mut files)?;

    let rankings: Vec<(String, RankedList<R>)> = match task {
        TaskId::Task1 => {
            let mut rankings = Vec::with_capacity(output.rankings.len());
            for (category, list) in &output.rankings {
                let mut buf = Vec::new();
                write_category_ranking(category.canonical_name(), list, &mut buf)
                    .map_err(|e| Error::Internal(e.to_string()))?;
                write_out(&format!("ranking_{}.tsv", category.slug()), buf, &mut files)?;
                rankings.push((category.canonical_name().to_string(), list.clone()));
            }
            rankings
        }
        TaskId::Task2 | TaskId::Task3 => {
            let quality = if multilingual {
                multilingual_rank(&model, &test)?
            } else {
                let hosts: Vec<(HostId, LabelSet)> = output
                    .assignments
                    .iter()
                    .map(|(host, a)| (host.clone(), a.labels))
                    .collect();
                let confidences: BTreeMap<HostId, R> = output
                    .assignments
                    .iter()
                    .map(|(host, a)| (host.clone(), a.genre_confidence))
                    .collect();
                rank_by_quality(&hosts, &confidences)?
            };
            let confidences: BTreeMap<HostId, R> = output
                .assignments
                .iter()
                .map(|(host, a)| (host.clone(), a.genre_confidence))
                .collect();
            let mut buf = Vec::new();
            write_quality_ranking(&quality, &confidences, &mut buf)?;
            write_out("ranking_quality.tsv", buf, &mut files)?;
            vec![("quality".to_string(), quality)]
        }
    };

    let task_report = report(task, &rankings, &test.labels)?;
    let mut buf = Vec::new();
    crate::eval::write_report(&task_report, &mut buf)
        .map_err(|e| Error::Internal(e.to_string()))?;
    write_out("report.tsv", buf, &mut files)?;

    let config_json = serde_json::to_string(opts).map_err(|e| Error::Internal(e.to_string()))?;
    let manifest = out_dir.join("run_manifest.txt");
    write_manifest(&manifest, &config_json, &files)?;
    files.push(manifest);

    Ok(TaskOutcome {
        report: task_report,
        rankings,
        files,
    })
}

/// Write a per-category ranking as `rank<TAB>host_id<TAB>score` rows.
pub fn write_category_ranking<R: Real, W: Write>(
    label: &str,
    ranking: &RankedList<R>,
    out: &mut W,
) -> std::io::Result<()> {
    writeln!(out, "#ranking/1 {label}")?;
    for (index, item) in ranking.items().iter().enumerate() {
        writeln!(out, "{}\t{}\t{}", index + 1, item.host, item.score)?;
    }
    Ok(())
}

/// Read back a `ranking/1` file: the label from the header and the scored
/// hosts. Quality rankings (four columns) recover their composite score as
/// utility plus confidence.
pub fn read_ranking<R: Real>(path: &Path) -> Result<(String, RankedList<R>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "empty ranking file"))?;
    let label = header
        .strip_prefix("#ranking/1 ")
        .ok_or_else(|| Error::parse(path, 1, "expected #ranking/1 header"))?
        .to_string();
    let mut scores = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split('\t').collect();
        let line_no = i + 1;
        let host = HostId::new(*cells.get(1).unwrap_or(&""))
            .map_err(|_| Error::parse(path, line_no, "missing host id"))?;
        let score = match cells.len() {
            3 => cells[2]
                .parse::<f64>()
                .map_err(|_| Error::parse(path, line_no, "bad score"))?,
            4 => {
                let utility: f64 = cells[2]
                    .parse()
                    .map_err(|_| Error::parse(path, line_no, "bad utility"))?;
                let confidence: f64 = cells[3]
                    .parse()
                    .map_err(|_| Error::parse(path, line_no, "bad confidence"))?;
                utility + confidence
            }
            n => {
                return Err(Error::parse(
                    path,
                    line_no,
                    format!("expected 3 or 4 cells, found {n}"),
                ))
            }
        };
        scores.push((host, R::from_f64_const(score)));
    }
    Ok((label, RankedList::from_scores(scores)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec(seed: u64) -> SynthSpec {
        SynthSpec {
            n_train_hosts: 60,
            n_test_hosts: 30,
            seed,
            ..SynthSpec::default()
        }
    }

    #[test]
    fn generation_is_byte_identical_for_equal_seeds() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let a = generate(&small_spec(1), dir_a.path()).unwrap();
        let b = generate(&small_spec(1), dir_b.path()).unwrap();
        for (left, right) in [
            (&a.train.link, &b.train.link),
            (&a.train.content, &b.train.content),
            (&a.train.labels, &b.train.labels),
            (a.train.terms.as_ref().unwrap(), b.train.terms.as_ref().unwrap()),
            (a.train.nlp.as_ref().unwrap(), b.train.nlp.as_ref().unwrap()),
            (&a.test.link, &b.test.link),
            (&a.dictionary, &b.dictionary),
        ] {
            assert_eq!(
                fs::read(left).unwrap(),
                fs::read(right).unwrap(),
                "{left:?} differs"
            );
        }
    }

    #[test]
    fn different_seeds_differ() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let a = generate(&small_spec(1), dir_a.path()).unwrap();
        let b = generate(&small_spec(2), dir_b.path()).unwrap();
        assert_ne!(fs::read(a.train.link).unwrap(), fs::read(b.train.link).unwrap());
    }

    #[test]
    fn generated_files_parse_into_a_complete_dataset() {
        let dir = tempfile::tempdir().unwrap();
        let data = generate(&small_spec(7), dir.path()).unwrap();
        let train: crate::ingest::Dataset<f64> =
            load_dataset(&data.train, Some(&data.dictionary)).unwrap();
        assert_eq!(train.hosts.len(), 60);
        assert_eq!(train.labels.len(), 60);
        assert!(train.pages.is_some());
        // Every category keeps both classes.
        for category in category_universe() {
            let positives = train
                .labels
                .values()
                .filter(|l| l.binary_class(category) == Some(true))
                .count();
            let negatives = train
                .labels
                .values()
                .filter(|l| l.binary_class(category) == Some(false))
                .count();
            assert!(positives >= 2, "{category}: {positives} positives");
            assert!(negatives >= 2, "{category}: {negatives} negatives");
        }
    }

    #[test]
    fn rates_hold_within_three_sigma() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SynthSpec {
            n_train_hosts: 400,
            n_test_hosts: 20,
            seed: 5,
            ..SynthSpec::default()
        };
        let data = generate(&spec, dir.path()).unwrap();
        let labels = crate::ingest::parse_labels(&data.train.labels).unwrap();
        let n = labels.len() as f64;
        for facet in Facet::ALL {
            let rate = spec.rates.facet_rate(facet);
            let count = labels
                .values()
                .filter(|l| l.facet_level(facet) == Some(facet.positive_level()))
                .count() as f64;
            let sigma = (n * rate * (1.0 - rate)).sqrt();
            assert!(
                (count - n * rate).abs() <= 3.0 * sigma + 2.0,
                "{facet}: {count} of {n} vs rate {rate}"
            );
        }
    }

    #[test]
    fn zero_signal_plants_nothing() {
        use crate::model::Level;
        // With signal 0 the topic-token count is 0 and the mean shift is 0:
        // the generator draws the same feature distribution for every label.
        let spec = SynthSpec {
            signal: 0.0,
            ..small_spec(3)
        };
        assert_eq!((spec.signal * 4.0).round() as usize, 0);
        let mut rng_a = SplitMix64::new(9);
        let mut rng_b = SplitMix64::new(9);
        let positive = LabelSet {
            genre: Some(GenreLabel::WebSpam),
            neutrality: Some(Level::THREE),
            bias: Some(Level::ONE),
            trust: Some(Level::THREE),
        };
        let negative = LabelSet {
            genre: Some(GenreLabel::Commercial),
            neutrality: Some(Level::ONE),
            bias: Some(Level::THREE),
            trust: Some(Level::ONE),
        };
        let row_a = dense_row(&mut rng_a, 18, &positive, 0.0);
        let row_b = dense_row(&mut rng_b, 18, &negative, 0.0);
        assert_eq!(row_a, row_b);
    }

    #[test]
    fn dims_too_small_to_plant_error() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SynthSpec {
            link_dim: 5,
            ..small_spec(1)
        };
        assert!(generate(&spec, dir.path()).is_err());
    }

    #[test]
    fn manifest_records_digests() {
        let dir = tempfile::tempdir().unwrap();
        let data = generate(&small_spec(1), dir.path()).unwrap();
        let manifest = fs::read_to_string(&data.manifest).unwrap();
        assert!(manifest.starts_with("#manifest/1\n"));
        assert!(manifest.contains("config\t"));
        assert!(manifest.lines().filter(|l| l.starts_with("sha256\t")).count() >= 5);
    }

    #[test]
    fn ranking_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let list = RankedList::from_scores(vec![
            (HostId::new("h1").unwrap(), 0.9_f64),
            (HostId::new("h2").unwrap(), 0.4),
        ])
        .unwrap();
        let mut buf = Vec::new();
        write_category_ranking("WebSpam", &list, &mut buf).unwrap();
        let path = dir.path().join("r.tsv");
        fs::write(&path, buf).unwrap();
        let (label, parsed): (String, RankedList<f64>) = read_ranking(&path).unwrap();
        assert_eq!(label, "WebSpam");
        assert_eq!(parsed, list);
    }
}
