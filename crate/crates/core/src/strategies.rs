//! Training regimes over several treebanks, epoch selection, per-epoch
//! sampling and proxy-treebank parsing.
//!
//! Random streams: every base model (SINGLE, CONCAT, the C_FT base and
//! TB_EMB) draws initialization from ChaCha stream 0 and training
//! randomness from stream 1 of the master seed. Fine-tuning on treebank `i`
//! uses stream `2 + i`. With one treebank, SINGLE and CONCAT therefore run
//! the same computation, and the C_FT base is the CONCAT model.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use log::{info, warn};
use rand::seq::index;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::conllu::{validate_tree, Sentence, TreebankRegistry};
use crate::error::{Error, Result};
use crate::eval;
use crate::neural::io::{load_model, save_model, Precision};
use crate::neural::model::{Hyperparams, Model, Vocabularies};
use crate::parser::{parse_corpus, TrainOptions, Trainer};
use crate::util::write_atomic;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StrategyKind {
    #[serde(rename = "single")]
    Single,
    #[serde(rename = "concat")]
    Concat,
    #[serde(rename = "cft")]
    CFt,
    #[serde(rename = "tbemb")]
    TbEmb,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 4] = [
        StrategyKind::Single,
        StrategyKind::Concat,
        StrategyKind::CFt,
        StrategyKind::TbEmb,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Single => "single",
            StrategyKind::Concat => "concat",
            StrategyKind::CFt => "cft",
            StrategyKind::TbEmb => "tbemb",
        }
    }

    /// Column heading used in Markdown reports.
    pub fn heading(self) -> &'static str {
        match self {
            StrategyKind::Single => "single",
            StrategyKind::Concat => "concat",
            StrategyKind::CFt => "c+ft",
            StrategyKind::TbEmb => "tb-emb",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "single" => Ok(StrategyKind::Single),
            "concat" => Ok(StrategyKind::Concat),
            "cft" | "c_ft" | "c+ft" => Ok(StrategyKind::CFt),
            "tbemb" | "tb_emb" | "tb-emb" => Ok(StrategyKind::TbEmb),
            _ => Err(Error::Config(format!(
                "unknown strategy {s:?}; expected single, concat, cft or tbemb"
            ))),
        }
    }
}

/// Training and development sentences of one treebank.
#[derive(Clone, Debug)]
pub struct TreebankData {
    pub name: String,
    pub train: Vec<Sentence>,
    pub dev: Vec<Sentence>,
}

#[derive(Clone, Debug)]
pub struct StrategyConfig {
    pub kind: StrategyKind,
    pub treebanks: Vec<TreebankData>,
    pub epochs: usize,
    pub ft_epochs: usize,
    /// Maximum sentences drawn per treebank per epoch.
    pub cap: Option<usize>,
    pub seed: u64,
    pub hyper: Hyperparams,
    pub options: TrainOptions,
}

impl StrategyConfig {
    pub fn new(kind: StrategyKind, treebanks: Vec<TreebankData>) -> Self {
        StrategyConfig {
            kind,
            treebanks,
            epochs: 30,
            ft_epochs: 10,
            cap: None,
            seed: 1,
            hyper: Hyperparams::default(),
            options: TrainOptions::default(),
        }
    }
}

/// Dev LAS per treebank and epoch: `las[t][e]` is treebank `t` after epoch
/// `e + 1`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DevCurve {
    pub treebanks: Vec<String>,
    pub las: Vec<Vec<f64>>,
}

impl DevCurve {
    pub fn epochs(&self) -> usize {
        self.las.first().map_or(0, Vec::len)
    }
}

/// Summary of a finished run, stored as `run.json` next to the model files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub kind: StrategyKind,
    pub treebanks: Vec<String>,
    /// Model name to file name.
    pub models: BTreeMap<String, String>,
    pub curves: BTreeMap<String, DevCurve>,
    /// 1-based selected epoch per model.
    pub selected_epoch: BTreeMap<String, usize>,
}

#[derive(Clone, Debug)]
pub struct StrategyRun {
    pub info: RunInfo,
    pub models: BTreeMap<String, Model>,
}

pub const BASE_MODEL: &str = "base";

/// Name of the fine-tuned model for a treebank.
pub fn ft_model_name(treebank: &str) -> String {
    format!("ft-{treebank}")
}

/// Argmax over epochs of the mean dev LAS across treebanks, earliest on
/// ties. `curves[t][e]` is treebank `t` after epoch `e + 1`; returns the
/// 1-based epoch.
pub fn select_best_epoch(curves: &[Vec<f64>]) -> usize {
    let epochs = curves.iter().map(Vec::len).min().unwrap_or(0);
    let mut best = (0, f64::NEG_INFINITY);
    for e in 0..epochs {
        let mean = curves.iter().map(|c| c[e]).sum::<f64>() / curves.len() as f64;
        if mean > best.1 {
            best = (e, mean);
        }
    }
    best.0 + 1
}

/// One epoch's training order as `(treebank, sentence index)` pairs: per
/// treebank a uniform sample without replacement of `min(cap, size)`
/// sentences, then a shuffle of the merged sequence.
pub fn epoch_sample(sizes: &[usize], cap: Option<usize>, rng: &mut impl Rng) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (tb, &size) in sizes.iter().enumerate() {
        match cap {
            Some(k) if k < size => {
                let mut picked = index::sample(rng, size, k).into_vec();
                picked.sort_unstable();
                out.extend(picked.into_iter().map(|i| (tb, i)));
            }
            _ => out.extend((0..size).map(|i| (tb, i))),
        }
    }
    out.shuffle(rng);
    out
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn check_data(config: &StrategyConfig) -> Result<()> {
    if config.treebanks.is_empty() {
        return Err(Error::Config("no treebanks given".into()));
    }
    if config.kind == StrategyKind::Single && config.treebanks.len() != 1 {
        return Err(Error::Config(format!(
            "single requires exactly one treebank, got {}",
            config.treebanks.len()
        )));
    }
    if config.epochs == 0 {
        return Err(Error::Config("epochs must be at least 1".into()));
    }
    if config.kind == StrategyKind::CFt && config.ft_epochs == 0 {
        return Err(Error::Config("ft-epochs must be at least 1".into()));
    }
    if config.cap == Some(0) {
        return Err(Error::Config("cap must be positive".into()));
    }
    for tb in &config.treebanks {
        if tb.train.is_empty() {
            return Err(Error::EmptyTreebank(tb.name.clone()));
        }
        if tb.dev.is_empty() {
            return Err(Error::DevMissing(tb.name.clone()));
        }
        for (i, s) in tb.train.iter().enumerate() {
            let problems = validate_tree(s);
            if let Some(p) = problems.first() {
                return Err(Error::InvalidTree(format!(
                    "{} training sentence {}: {p}",
                    tb.name,
                    i + 1
                )));
            }
        }
    }
    Ok(())
}

struct Phase<'a> {
    label: &'a str,
    /// Training treebanks as indices into the config.
    train: Vec<usize>,
    /// Dev treebanks as indices into the config.
    dev: Vec<usize>,
    use_tb: bool,
    /// Epoch numbers passed to the trainer (they gate exploration).
    first_epoch: usize,
    epochs: usize,
}

struct PhaseResult {
    best: Model,
    curve: DevCurve,
    selected: usize,
}

fn dev_scores(model: &Model, config: &StrategyConfig, dev: &[usize], use_tb: bool) -> Result<Vec<f64>> {
    dev.iter()
        .map(|&t| {
            let gold = &config.treebanks[t].dev;
            let parsed = parse_corpus(model, gold, use_tb.then_some(t), true)?;
            Ok(eval::las(gold, &parsed, false)?.las)
        })
        .collect()
}

fn run_phase(trainer: &mut Trainer, config: &StrategyConfig, phase: &Phase<'_>, rng: &mut ChaCha8Rng) -> Result<PhaseResult> {
    let sizes: Vec<usize> = phase.train.iter().map(|&t| config.treebanks[t].train.len()).collect();
    let mut curve = DevCurve {
        treebanks: phase.dev.iter().map(|&t| config.treebanks[t].name.clone()).collect(),
        las: vec![Vec::new(); phase.dev.len()],
    };
    let mut best: Option<(f64, Model)> = None;
    for e in 0..phase.epochs {
        let epoch = phase.first_epoch + e;
        let order = epoch_sample(&sizes, config.cap, rng);
        let mut loss = 0.0;
        for (slot, i) in order {
            let t = phase.train[slot];
            let sentence = &config.treebanks[t].train[i];
            loss += trainer
                .train_sentence(sentence, phase.use_tb.then_some(t), epoch, rng)?
                .loss;
        }
        let scores = dev_scores(&trainer.model, config, &phase.dev, phase.use_tb)?;
        let mean = scores.iter().sum::<f64>() / scores.len() as f64;
        let shown: Vec<String> = curve
            .treebanks
            .iter()
            .zip(&scores)
            .map(|(n, s)| format!("{n}={s:.2}"))
            .collect();
        info!(
            "{} epoch {}/{}: loss {:.3}, dev LAS {}",
            phase.label,
            e + 1,
            phase.epochs,
            loss,
            shown.join(" ")
        );
        for (c, s) in curve.las.iter_mut().zip(scores) {
            c.push(s);
        }
        if best.as_ref().is_none_or(|(b, _)| mean > *b) {
            best = Some((mean, trainer.model.clone()));
        }
    }
    let selected = select_best_epoch(&curve.las);
    info!("{}: selected epoch {}", phase.label, selected);
    Ok(PhaseResult {
        best: best.expect("at least one epoch").1,
        curve,
        selected,
    })
}

fn model_file(name: &str) -> String {
    let safe: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .collect();
    format!("{safe}.hpm")
}

/// Trains all models of one strategy.
pub fn train(config: &StrategyConfig) -> Result<StrategyRun> {
    check_data(config)?;
    let names: Vec<&str> = config.treebanks.iter().map(|t| t.name.as_str()).collect();
    let registry = TreebankRegistry::from_names(names.iter().copied())?;
    let vocab = Vocabularies::build(config.treebanks.iter().flat_map(|t| &t.train));
    let use_tb = config.kind == StrategyKind::TbEmb;
    let model = Model::new(config.hyper.clone(), vocab, registry, use_tb, &mut stream(config.seed, 0))?;
    let mut trainer = Trainer::new(model, config.options.clone());
    let all: Vec<usize> = (0..config.treebanks.len()).collect();
    let base_name = match config.kind {
        StrategyKind::CFt => BASE_MODEL,
        k => k.name(),
    };
    let base = run_phase(
        &mut trainer,
        config,
        &Phase {
            label: base_name,
            train: all.clone(),
            dev: all.clone(),
            use_tb,
            first_epoch: 1,
            epochs: config.epochs,
        },
        &mut stream(config.seed, 1),
    )?;

    let mut info = RunInfo {
        kind: config.kind,
        treebanks: names.iter().map(|s| s.to_string()).collect(),
        models: BTreeMap::new(),
        curves: BTreeMap::new(),
        selected_epoch: BTreeMap::new(),
    };
    let mut models = BTreeMap::new();
    let mut record = |name: String, result: PhaseResult, models: &mut BTreeMap<String, Model>| {
        info.models.insert(name.clone(), model_file(&name));
        info.curves.insert(name.clone(), result.curve);
        info.selected_epoch.insert(name.clone(), result.selected);
        models.insert(name, result.best);
    };

    if config.kind == StrategyKind::CFt {
        for t in 0..config.treebanks.len() {
            let name = ft_model_name(&config.treebanks[t].name);
            let mut ft = Trainer::new(base.best.clone(), config.options.clone());
            let result = run_phase(
                &mut ft,
                config,
                &Phase {
                    label: &name,
                    train: vec![t],
                    dev: vec![t],
                    use_tb: false,
                    first_epoch: config.epochs + 1,
                    epochs: config.ft_epochs,
                },
                &mut stream(config.seed, 2 + t as u64),
            )?;
            record(name, result, &mut models);
        }
    }
    record(base_name.to_owned(), base, &mut models);
    Ok(StrategyRun { info, models })
}

impl StrategyRun {
    /// The model used for a strategy's own (non fine-tuned) predictions.
    pub fn primary_model(&self) -> &Model {
        let name = match self.info.kind {
            StrategyKind::CFt => BASE_MODEL,
            k => k.name(),
        };
        &self.models[name]
    }

    /// Writes `run.json` and one model file per model into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>, precision: Precision) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, model) in &self.models {
            save_model(model, dir.join(&self.info.models[name]), precision)?;
        }
        let mut json = serde_json::to_vec_pretty(&self.info)?;
        json.push(b'\n');
        write_atomic(&dir.join("run.json"), &json)
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let path = dir.join("run.json");
        let text = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let info: RunInfo = serde_json::from_slice(&text)
            .map_err(|e| Error::ModelFormat(format!("{}: {e}", path.display())))?;
        let mut models = BTreeMap::new();
        for (name, file) in &info.models {
            models.insert(name.clone(), load_model(dir.join(file))?);
        }
        Ok(StrategyRun { info, models })
    }

    /// Wraps a single model file. Models with treebank embeddings behave
    /// like TB_EMB runs, all others like CONCAT runs.
    pub fn from_model(model: Model) -> Self {
        let kind = if model.has_tb() {
            StrategyKind::TbEmb
        } else {
            StrategyKind::Concat
        };
        let name = kind.name().to_owned();
        let info = RunInfo {
            kind,
            treebanks: model.registry.names().to_vec(),
            models: BTreeMap::from([(name.clone(), model_file(&name))]),
            curves: BTreeMap::new(),
            selected_epoch: BTreeMap::new(),
        };
        StrategyRun {
            info,
            models: BTreeMap::from([(name, model)]),
        }
    }
}

fn proxy_id(run: &StrategyRun, proxy: Option<&str>) -> Result<usize> {
    let valid = run.info.treebanks.clone();
    let name = proxy.ok_or_else(|| Error::ProxyRequired { valid: valid.clone() })?;
    valid
        .iter()
        .position(|n| n == name)
        .ok_or_else(|| Error::UnknownProxy {
            name: name.to_owned(),
            valid,
        })
}

/// Parses with the model a run selects for `proxy`. C_FT uses the model
/// fine-tuned on the proxy, TB_EMB sets the proxy's treebank embedding, and
/// SINGLE/CONCAT ignore the proxy.
pub fn parse_with(run: &StrategyRun, sentences: &[Sentence], proxy: Option<&str>, parallel: bool) -> Result<Vec<Sentence>> {
    match run.info.kind {
        StrategyKind::Single | StrategyKind::Concat => {
            if let Some(p) = proxy {
                warn!("proxy {p:?} ignored for a {} model", run.info.kind);
            }
            parse_corpus(run.primary_model(), sentences, None, parallel)
        }
        StrategyKind::CFt => {
            let t = proxy_id(run, proxy)?;
            let name = ft_model_name(&run.info.treebanks[t]);
            let model = run
                .models
                .get(&name)
                .ok_or_else(|| Error::ModelFormat(format!("run lacks model {name}")))?;
            parse_corpus(model, sentences, None, parallel)
        }
        StrategyKind::TbEmb => {
            let t = proxy_id(run, proxy)?;
            parse_corpus(run.primary_model(), sentences, Some(t), parallel)
        }
    }
}
