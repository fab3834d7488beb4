//! Strategy-comparison experiments: train every strategy per language,
//! evaluate each (test set, proxy, strategy) cell, test significance against
//! SINGLE and CONCAT, and render TSV and Markdown reports.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conllu::{parse_conllu, Sentence};
use crate::error::{Error, Result};
use crate::eval::{las, randomization_test, DEFAULT_ITERATIONS};
use crate::neural::model::Hyperparams;
use crate::parser::TrainOptions;
use crate::strategies::{parse_with, train, StrategyConfig, StrategyKind, StrategyRun, TreebankData};

pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

fn default_seed() -> u64 {
    1
}
fn default_epochs() -> usize {
    30
}
fn default_ft_epochs() -> usize {
    10
}
fn default_iterations() -> usize {
    DEFAULT_ITERATIONS
}
fn default_strategies() -> Vec<StrategyKind> {
    StrategyKind::ALL.to_vec()
}

/// Experiment specification file. Relative paths are resolved against the
/// directory of the file.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_ft_epochs")]
    pub ft_epochs: usize,
    #[serde(default)]
    pub cap: Option<usize>,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default)]
    pub truncate_subtypes: bool,
    #[serde(default = "default_strategies")]
    pub strategies: Vec<StrategyKind>,
    #[serde(default)]
    pub hyperparameters: Hyperparams,
    #[serde(default)]
    pub training: TrainOptions,
    /// Fill the `train_seconds` column; wall-clock times make reports
    /// differ between runs.
    #[serde(default)]
    pub record_timings: bool,
    pub languages: Vec<LanguageSpec>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LanguageSpec {
    pub name: String,
    pub treebanks: Vec<TreebankSpec>,
    #[serde(default)]
    pub extra_tests: Vec<ExtraTestSpec>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreebankSpec {
    pub name: String,
    pub train: PathBuf,
    pub dev: PathBuf,
    pub test: PathBuf,
}

/// A test set without its own training data, parsed once per proxy.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtraTestSpec {
    pub name: String,
    pub path: PathBuf,
    pub proxies: Vec<String>,
}

fn spec_error(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Spec {
        path: path.into(),
        message: message.into(),
    }
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let spec: ExperimentSpec = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            spec_error(path, e.into_inner().to_string())
        })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    fn validate(&self) -> Result<()> {
        if self.languages.is_empty() {
            return Err(spec_error("languages", "at least one language is required"));
        }
        if self.strategies.is_empty() {
            return Err(spec_error("strategies", "at least one strategy is required"));
        }
        if self.epochs == 0 {
            return Err(spec_error("epochs", "must be at least 1"));
        }
        if self.ft_epochs == 0 {
            return Err(spec_error("ft_epochs", "must be at least 1"));
        }
        if self.cap == Some(0) {
            return Err(spec_error("cap", "must be positive"));
        }
        if self.iterations == 0 {
            return Err(spec_error("iterations", "must be at least 1"));
        }
        let mut languages = HashSet::new();
        for (i, lang) in self.languages.iter().enumerate() {
            if !languages.insert(&lang.name) {
                return Err(spec_error(format!("languages[{i}].name"), "duplicate language"));
            }
            if lang.treebanks.len() < 2 {
                return Err(spec_error(
                    format!("languages[{i}].treebanks"),
                    "at least two treebanks are required",
                ));
            }
            let mut names = HashSet::new();
            for (j, tb) in lang.treebanks.iter().enumerate() {
                if !names.insert(tb.name.as_str()) {
                    return Err(spec_error(
                        format!("languages[{i}].treebanks[{j}].name"),
                        format!("duplicate treebank {:?}", tb.name),
                    ));
                }
            }
            for (j, extra) in lang.extra_tests.iter().enumerate() {
                if extra.proxies.is_empty() {
                    return Err(spec_error(
                        format!("languages[{i}].extra_tests[{j}].proxies"),
                        "at least one proxy is required",
                    ));
                }
                for (k, p) in extra.proxies.iter().enumerate() {
                    if !names.contains(p.as_str()) {
                        return Err(spec_error(
                            format!("languages[{i}].extra_tests[{j}].proxies[{k}]"),
                            format!("{p:?} is not a treebank of language {:?}", lang.name),
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Scores of one evaluated cell.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellScores {
    pub las: f64,
    pub uas: f64,
    pub p_vs_single: Option<f64>,
    pub p_vs_concat: Option<f64>,
    pub selected_epoch: Option<usize>,
    pub train_seconds: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Cell {
    pub language: String,
    pub test_set: String,
    /// True for a treebank's own test set.
    pub own: bool,
    pub proxy: String,
    pub strategy: StrategyKind,
    pub result: std::result::Result<CellScores, String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Report {
    pub strategies: Vec<StrategyKind>,
    pub cells: Vec<Cell>,
}

fn read_corpus(path: &Path) -> Result<Vec<Sentence>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_conllu(&text)
}

struct Trained {
    run: StrategyRun,
    seconds: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum JobKey {
    Single(usize),
    Multi(StrategyKind),
}

/// Parsed test set, selected epoch and training seconds, or an error message.
type CellOutput = std::result::Result<(Vec<Sentence>, Option<usize>, f64), String>;

/// Runs a whole experiment. `workers` bounds the number of training jobs
/// and evaluation cells processed in parallel.
pub fn run_experiment(spec: &ExperimentSpec, base_dir: &Path, workers: usize) -> Result<Report> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let mut report = Report {
        strategies: spec.strategies.clone(),
        cells: Vec::new(),
    };
    for lang in &spec.languages {
        let cells = pool.install(|| run_language(spec, lang, base_dir))?;
        report.cells.extend(cells);
    }
    Ok(report)
}

fn run_language(spec: &ExperimentSpec, lang: &LanguageSpec, base_dir: &Path) -> Result<Vec<Cell>> {
    let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base_dir.join(p) };
    let mut data = Vec::new();
    let mut tests = Vec::new();
    for tb in &lang.treebanks {
        data.push(TreebankData {
            name: tb.name.clone(),
            train: read_corpus(&resolve(&tb.train))?,
            dev: read_corpus(&resolve(&tb.dev))?,
        });
        tests.push(read_corpus(&resolve(&tb.test))?);
    }
    let extra: Vec<Vec<Sentence>> = lang
        .extra_tests
        .iter()
        .map(|e| read_corpus(&resolve(&e.path)))
        .collect::<Result<_>>()?;

    let base_config = |kind, treebanks| StrategyConfig {
        kind,
        treebanks,
        epochs: spec.epochs,
        ft_epochs: spec.ft_epochs,
        cap: spec.cap,
        seed: spec.seed,
        hyper: spec.hyperparameters.clone(),
        options: spec.training.clone(),
    };
    let mut jobs: Vec<(JobKey, StrategyConfig)> = Vec::new();
    for &kind in &spec.strategies {
        match kind {
            StrategyKind::Single => {
                for (t, tb) in data.iter().enumerate() {
                    jobs.push((JobKey::Single(t), base_config(kind, vec![tb.clone()])));
                }
            }
            _ => jobs.push((JobKey::Multi(kind), base_config(kind, data.clone()))),
        }
    }
    let trained: BTreeMap<JobKey, std::result::Result<Trained, String>> = jobs
        .into_par_iter()
        .map(|(key, config)| {
            info!("{}: training {:?}", lang.name, key);
            let start = Instant::now();
            let result = train(&config)
                .map(|run| Trained {
                    run,
                    seconds: start.elapsed().as_secs_f64(),
                })
                .map_err(|e| {
                    warn!("{}: {:?} failed: {e}", lang.name, key);
                    e.to_string()
                });
            (key, result)
        })
        .collect();

    // Rows: own test sets with their own treebank as proxy, then every
    // extra test set once per proxy.
    let mut rows: Vec<(String, bool, usize, &[Sentence])> = Vec::new();
    for (t, tb) in data.iter().enumerate() {
        rows.push((tb.name.clone(), true, t, &tests[t]));
    }
    for (e, spec_e) in lang.extra_tests.iter().enumerate() {
        for p in &spec_e.proxies {
            let t = data.iter().position(|d| &d.name == p).expect("validated proxy");
            rows.push((spec_e.name.clone(), false, t, &extra[e]));
        }
    }

    let mut cells = Vec::new();
    for (test_name, own, proxy_t, gold) in rows {
        let proxy = &data[proxy_t].name;
        let outputs: Vec<(StrategyKind, CellOutput)> = spec
            .strategies
            .par_iter()
            .map(|&kind| {
                let key = match kind {
                    StrategyKind::Single => JobKey::Single(proxy_t),
                    k => JobKey::Multi(k),
                };
                let out = match &trained[&key] {
                    Err(e) => Err(e.clone()),
                    Ok(tr) => {
                        let proxy_arg = match kind {
                            StrategyKind::CFt | StrategyKind::TbEmb => Some(proxy.as_str()),
                            _ => None,
                        };
                        let model_name = match kind {
                            StrategyKind::CFt => crate::strategies::ft_model_name(proxy),
                            k => k.name().to_owned(),
                        };
                        parse_with(&tr.run, gold, proxy_arg, true)
                            .map(|parsed| (parsed, tr.run.info.selected_epoch.get(&model_name).copied(), tr.seconds))
                            .map_err(|e| e.to_string())
                    }
                };
                (kind, out)
            })
            .collect();
        let output_of = |k: StrategyKind| {
            outputs
                .iter()
                .find(|(kind, _)| *kind == k)
                .and_then(|(_, r)| r.as_ref().ok())
                .map(|(parsed, _, _)| parsed)
        };
        for (kind, out) in &outputs {
            let result = out.clone().and_then(|(parsed, selected, seconds)| {
                let scores = las(gold, &parsed, spec.truncate_subtypes).map_err(|e| e.to_string())?;
                let p_against = |other: StrategyKind| -> std::result::Result<Option<f64>, String> {
                    if other == *kind {
                        return Ok(None);
                    }
                    match output_of(other) {
                        Some(reference) => randomization_test(
                            gold,
                            &parsed,
                            reference,
                            spec.iterations,
                            spec.seed,
                            spec.truncate_subtypes,
                        )
                        .map(Some)
                        .map_err(|e| e.to_string()),
                        None => Ok(None),
                    }
                };
                Ok(CellScores {
                    las: scores.las,
                    uas: scores.uas,
                    p_vs_single: p_against(StrategyKind::Single)?,
                    p_vs_concat: p_against(StrategyKind::Concat)?,
                    selected_epoch: selected,
                    train_seconds: spec.record_timings.then_some(seconds),
                })
            });
            cells.push(Cell {
                language: lang.name.clone(),
                test_set: test_name.clone(),
                own,
                proxy: proxy.clone(),
                strategy: *kind,
                result,
            });
        }
    }
    Ok(cells)
}

fn opt<T>(v: Option<T>, f: impl Fn(T) -> String) -> String {
    v.map_or_else(|| "-".to_owned(), f)
}

fn clean(s: &str) -> String {
    s.replace(['\t', '\n', '\r'], " ")
}

/// Significance marker: `+` against SINGLE, `×` against CONCAT, `*` both.
pub fn marker(scores: &CellScores) -> &'static str {
    let sig = |p: Option<f64>| p.is_some_and(|p| p < SIGNIFICANCE_LEVEL);
    match (sig(scores.p_vs_single), sig(scores.p_vs_concat)) {
        (true, true) => "*",
        (true, false) => "+",
        (false, true) => "×",
        (false, false) => "",
    }
}

impl Report {
    pub const TSV_HEADER: &'static str =
        "language\ttest_set\tstrategy\tproxy\tLAS\tUAS\tp_vs_single\tp_vs_concat\tselected_epoch\ttrain_seconds";

    pub fn to_tsv(&self) -> String {
        let mut out = String::from(Self::TSV_HEADER);
        out.push('\n');
        for c in &self.cells {
            let fields = match &c.result {
                Ok(s) => [
                    format!("{:.2}", s.las),
                    format!("{:.2}", s.uas),
                    opt(s.p_vs_single, |p| format!("{p:.4}")),
                    opt(s.p_vs_concat, |p| format!("{p:.4}")),
                    opt(s.selected_epoch, |e| e.to_string()),
                    opt(s.train_seconds, |t| format!("{t:.1}")),
                ],
                Err(e) => [
                    format!("error: {}", clean(e)),
                    "-".into(),
                    "-".into(),
                    "-".into(),
                    "-".into(),
                    "-".into(),
                ],
            };
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                clean(&c.language),
                clean(&c.test_set),
                c.strategy,
                clean(&c.proxy),
                fields.join("\t")
            );
        }
        out
    }

    /// Mean LAS of a strategy over the own-test rows of `language` (all
    /// languages when `None`). Failed cells are skipped.
    pub fn average(&self, language: Option<&str>, strategy: StrategyKind) -> Option<f64> {
        let values: Vec<f64> = self
            .cells
            .iter()
            .filter(|c| c.own && c.strategy == strategy && language.is_none_or(|l| c.language == l))
            .filter_map(|c| c.result.as_ref().ok().map(|s| s.las))
            .collect();
        (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
    }

    pub fn to_markdown(&self) -> String {
        let mut languages: Vec<&str> = Vec::new();
        for c in &self.cells {
            if !languages.contains(&c.language.as_str()) {
                languages.push(&c.language);
            }
        }
        let header = |out: &mut String| {
            let _ = write!(out, "| Test set | Proxy |");
            for k in &self.strategies {
                let _ = write!(out, " {} |", k.heading());
            }
            out.push('\n');
            let _ = write!(out, "|---|---|");
            for _ in &self.strategies {
                out.push_str("---:|");
            }
            out.push('\n');
        };
        let avg_row = |out: &mut String, label: &str, language: Option<&str>| {
            let _ = write!(out, "| {label} | |");
            for &k in &self.strategies {
                let _ = write!(out, " {} |", opt(self.average(language, k), |v| format!("{v:.2}")));
            }
            out.push('\n');
        };

        let mut out = String::new();
        for lang in &languages {
            let _ = writeln!(out, "## {lang}\n");
            header(&mut out);
            let mut rows: Vec<(&str, &str, bool)> = Vec::new();
            for c in self.cells.iter().filter(|c| c.language == *lang) {
                let key = (c.test_set.as_str(), c.proxy.as_str(), c.own);
                if !rows.contains(&key) {
                    rows.push(key);
                }
            }
            let render = |out: &mut String, (test, proxy, own): (&str, &str, bool)| {
                let row: Vec<&Cell> = self
                    .cells
                    .iter()
                    .filter(|c| c.language == *lang && c.test_set == test && c.proxy == proxy && c.own == own)
                    .collect();
                let best = row
                    .iter()
                    .filter_map(|c| c.result.as_ref().ok().map(|s| s.las))
                    .fold(f64::NEG_INFINITY, f64::max);
                let _ = write!(out, "| {test} | {} |", if own { "" } else { proxy });
                for &k in &self.strategies {
                    let text = match row.iter().find(|c| c.strategy == k).map(|c| &c.result) {
                        Some(Ok(s)) => {
                            let v = format!("{:.2}{}", s.las, marker(s));
                            if format!("{:.2}", s.las) == format!("{best:.2}") {
                                format!("**{v}**")
                            } else {
                                v
                            }
                        }
                        Some(Err(_)) => "failed".to_owned(),
                        None => "-".to_owned(),
                    };
                    let _ = write!(out, " {text} |");
                }
                out.push('\n');
            };
            for &r in rows.iter().filter(|r| r.2) {
                render(&mut out, r);
            }
            avg_row(&mut out, "Average", Some(lang));
            for &r in rows.iter().filter(|r| !r.2) {
                render(&mut out, r);
            }
            out.push('\n');
        }
        if languages.len() > 1 {
            out.push_str("## All languages\n\n");
            header(&mut out);
            avg_row(&mut out, "Average", None);
            out.push('\n');
        }
        out.push_str(&format!(
            "Significant differences at the {SIGNIFICANCE_LEVEL} level: + from single, × from concat, * from both.\n"
        ));
        let failures: Vec<&Cell> = self.cells.iter().filter(|c| c.result.is_err()).collect();
        if !failures.is_empty() {
            out.push_str("\nFailed cells:\n\n");
            for c in failures {
                let _ = writeln!(
                    out,
                    "- {} / {} / {} / {}: {}",
                    c.language,
                    c.test_set,
                    c.proxy,
                    c.strategy,
                    clean(c.result.as_ref().unwrap_err())
                );
            }
        }
        out
    }
}
