use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::warn;
use serde_json::json;

use tbparse::conllu::{parse_conllu, write_conllu, Sentence};
use tbparse::eval::{las, randomization_test, DEFAULT_ITERATIONS};
use tbparse::experiment::{run_experiment, ExperimentSpec};
use tbparse::neural::io::load_model;
use tbparse::strategies::{parse_with, train, StrategyConfig, StrategyKind, StrategyRun, TreebankData};
use tbparse::transition::{static_oracle, Configuration, GoldTree};
use tbparse::util::write_atomic;
use tbparse::{Error, Hyperparams, Precision, TrainOptions};

#[derive(Parser, Debug)]
#[command(name = "tbparse", version, about = "Multi-treebank transition-based dependency parser")]
struct Cli {
    /// Increase log verbosity on standard error (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train one strategy and write its model file(s).
    Train(TrainArgs),
    /// Parse a CoNLL-U file with a trained model.
    Parse(ParseArgs),
    /// Score a system file against gold, optionally testing against a second system.
    Eval(EvalArgs),
    /// Run a full strategy comparison from a JSON specification.
    Experiment(ExperimentArgs),
    /// Print the static oracle derivation of every sentence in a CoNLL-U file.
    Oracle(OracleArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum StrategyArg {
    Single,
    Concat,
    Cft,
    Tbemb,
}

impl From<StrategyArg> for StrategyKind {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Single => StrategyKind::Single,
            StrategyArg::Concat => StrategyKind::Concat,
            StrategyArg::Cft => StrategyKind::CFt,
            StrategyArg::Tbemb => StrategyKind::TbEmb,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PrecisionArg {
    F64,
    F32,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Json,
    Tsv,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Training strategy.
    #[arg(long, value_enum)]
    strategy: StrategyArg,
    /// Treebank as NAME=TRAIN[,DEV[,TEST]]; repeat for several treebanks.
    #[arg(long = "treebank", value_name = "NAME=TRAIN[,DEV[,TEST]]", required = true)]
    treebanks: Vec<String>,
    /// Training epochs (base epochs for cft).
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    /// Fine-tuning epochs per treebank (cft only).
    #[arg(long, default_value_t = 10)]
    ft_epochs: usize,
    /// Maximum sentences drawn per treebank per epoch.
    #[arg(long)]
    cap: Option<usize>,
    /// Master random seed.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Model file to write; a directory for cft.
    #[arg(long, value_name = "PATH")]
    output: PathBuf,
    /// Storage precision of model files.
    #[arg(long, value_enum, default_value = "f64")]
    precision: PrecisionArg,
    #[command(flatten)]
    hyper: HyperArgs,
}

#[derive(Args, Debug)]
struct HyperArgs {
    /// Word embedding size.
    #[arg(long, default_value_t = 100)]
    dim_word: usize,
    /// Character embedding size.
    #[arg(long, default_value_t = 24)]
    dim_char: usize,
    /// Character LSTM hidden size per direction.
    #[arg(long, default_value_t = 50)]
    hidden_char: usize,
    /// Sentence LSTM hidden size per direction.
    #[arg(long, default_value_t = 125)]
    hidden_word: usize,
    /// Stacked sentence BiLSTM layers.
    #[arg(long, default_value_t = 2)]
    layers: usize,
    /// Treebank embedding size (tbemb only).
    #[arg(long, default_value_t = 12)]
    dim_tb: usize,
    /// MLP hidden layer size.
    #[arg(long, default_value_t = 100)]
    mlp_hidden: usize,
    /// Probability of following a wrong prediction during training (0 disables).
    #[arg(long, default_value_t = 0.1)]
    explore_prob: f64,
    /// Word dropout constant alpha in alpha / (alpha + freq) (0 disables).
    #[arg(long, default_value_t = 0.25)]
    word_dropout: f64,
}

#[derive(Args, Debug)]
struct ParseArgs {
    /// Model file, or a run directory written by `train --strategy cft`.
    #[arg(long, value_name = "PATH")]
    model: PathBuf,
    /// Input CoNLL-U file; `-` reads standard input.
    #[arg(value_name = "INPUT")]
    input: PathBuf,
    /// Treebank whose fine-tuned model or embedding is used (required for cft and tbemb models).
    #[arg(long, value_name = "NAME")]
    proxy: Option<String>,
    /// Output file; standard output when omitted.
    #[arg(long, value_name = "PATH")]
    output: Option<PathBuf>,
    /// Parse sentences on this many threads (output order is preserved).
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Gold CoNLL-U file.
    #[arg(value_name = "GOLD")]
    gold: PathBuf,
    /// System CoNLL-U file.
    #[arg(value_name = "SYSTEM")]
    system: PathBuf,
    /// Second system; adds a paired randomization test.
    #[arg(value_name = "SYSTEM2")]
    system2: Option<PathBuf>,
    /// Compare labels only up to the first colon.
    #[arg(long)]
    truncate_subtypes: bool,
    /// Randomization test iterations.
    #[arg(long, default_value_t = DEFAULT_ITERATIONS)]
    iterations: usize,
    /// Randomization test seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output format.
    #[arg(long, value_enum, default_value = "json")]
    format: FormatArg,
    /// Output file; standard output when omitted.
    #[arg(long, value_name = "PATH")]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    /// JSON experiment specification.
    #[arg(value_name = "SPEC")]
    spec: PathBuf,
    /// Directory for report.tsv and report.md.
    #[arg(long, value_name = "PATH")]
    output: PathBuf,
    /// Training jobs and evaluation cells run in parallel.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Override the specification's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the specification's epoch count.
    #[arg(long)]
    epochs: Option<usize>,
    /// Override the specification's fine-tuning epoch count.
    #[arg(long)]
    ft_epochs: Option<usize>,
    /// Override the specification's per-epoch cap.
    #[arg(long)]
    cap: Option<usize>,
    /// Override the specification's randomization test iterations.
    #[arg(long)]
    iterations: Option<usize>,
    /// Compare labels only up to the first colon.
    #[arg(long)]
    truncate_subtypes: bool,
}

#[derive(Args, Debug)]
struct OracleArgs {
    /// CoNLL-U file with gold trees; `-` reads standard input.
    #[arg(value_name = "INPUT")]
    input: PathBuf,
}

fn read_input(path: &Path) -> tbparse::Result<String> {
    if path.as_os_str() == "-" {
        let mut text = String::new();
        io::stdin()
            .read_to_string(&mut text)
            .map_err(|e| Error::io("<stdin>", e))?;
        Ok(text)
    } else {
        fs::read_to_string(path).map_err(|e| Error::io(path, e))
    }
}

fn read_corpus(path: &Path) -> tbparse::Result<Vec<Sentence>> {
    parse_conllu(&read_input(path)?)
}

fn emit(output: Option<&Path>, text: &str) -> tbparse::Result<()> {
    match output {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Error::io("<stdout>", e)),
    }
}

struct TreebankArg {
    name: String,
    train: PathBuf,
    dev: Option<PathBuf>,
}

fn parse_treebank_arg(s: &str) -> tbparse::Result<TreebankArg> {
    let (name, paths) = s
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("--treebank {s:?}: expected NAME=TRAIN[,DEV[,TEST]]")))?;
    let parts: Vec<&str> = paths.split(',').collect();
    if name.is_empty() || parts[0].is_empty() || parts.len() > 3 {
        return Err(Error::Config(format!(
            "--treebank {s:?}: expected NAME=TRAIN[,DEV[,TEST]]"
        )));
    }
    Ok(TreebankArg {
        name: name.to_owned(),
        train: parts[0].into(),
        dev: parts.get(1).filter(|p| !p.is_empty()).map(PathBuf::from),
    })
}

fn cmd_train(args: TrainArgs) -> tbparse::Result<()> {
    let kind: StrategyKind = args.strategy.into();
    let specs: Vec<TreebankArg> = args
        .treebanks
        .iter()
        .map(|s| parse_treebank_arg(s))
        .collect::<tbparse::Result<_>>()?;
    if kind == StrategyKind::Single && specs.len() != 1 {
        return Err(Error::Config(format!(
            "--strategy single takes exactly one --treebank, got {}",
            specs.len()
        )));
    }
    let mut treebanks = Vec::new();
    for spec in specs {
        let dev = spec.dev.ok_or_else(|| Error::DevMissing(spec.name.clone()))?;
        treebanks.push(TreebankData {
            train: read_corpus(&spec.train)?,
            dev: read_corpus(&dev)?,
            name: spec.name,
        });
    }
    let h = &args.hyper;
    let config = StrategyConfig {
        kind,
        treebanks,
        epochs: args.epochs,
        ft_epochs: args.ft_epochs,
        cap: args.cap,
        seed: args.seed,
        hyper: Hyperparams {
            dim_word: h.dim_word,
            dim_char: h.dim_char,
            hidden_char: h.hidden_char,
            hidden_word: h.hidden_word,
            layers: h.layers,
            mlp_hidden: h.mlp_hidden,
            dim_tb: h.dim_tb,
            ..Hyperparams::default()
        },
        options: TrainOptions {
            explore_prob: h.explore_prob,
            word_dropout: h.word_dropout,
            ..TrainOptions::default()
        },
    };
    if !(0.0..=1.0).contains(&h.explore_prob) || h.word_dropout < 0.0 {
        return Err(Error::Config(
            "--explore-prob must lie in [0, 1] and --word-dropout must be non-negative".into(),
        ));
    }
    let run = train(&config)?;
    for (name, curve) in &run.info.curves {
        for (t, tb) in curve.treebanks.iter().enumerate() {
            let values: Vec<String> = curve.las[t].iter().map(|v| format!("{v:.2}")).collect();
            eprintln!("{name}\t{tb}\tdev LAS per epoch\t{}", values.join(" "));
        }
        eprintln!("{name}\tselected epoch\t{}", run.info.selected_epoch[name]);
    }
    let precision = match args.precision {
        PrecisionArg::F64 => Precision::F64,
        PrecisionArg::F32 => Precision::F32,
    };
    if kind == StrategyKind::CFt {
        run.save(&args.output, precision)
    } else {
        tbparse::neural::save_model(run.primary_model(), &args.output, precision)
    }
}

fn load_run(path: &Path) -> tbparse::Result<StrategyRun> {
    if path.is_dir() {
        StrategyRun::load(path)
    } else {
        Ok(StrategyRun::from_model(load_model(path)?))
    }
}

fn cmd_parse(args: ParseArgs) -> tbparse::Result<()> {
    let run = load_run(&args.model)?;
    let sentences = read_corpus(&args.input)?;
    let parsed = if args.workers > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(args.workers)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(|| parse_with(&run, &sentences, args.proxy.as_deref(), true))?
    } else {
        parse_with(&run, &sentences, args.proxy.as_deref(), false)?
    };
    emit(args.output.as_deref(), &write_conllu(&parsed))
}

fn cmd_eval(args: EvalArgs) -> tbparse::Result<()> {
    let gold = read_corpus(&args.gold)?;
    let system = read_corpus(&args.system)?;
    let first = las(&gold, &system, args.truncate_subtypes)?;
    let second = match &args.system2 {
        Some(p) => {
            let sys2 = read_corpus(p)?;
            let r = las(&gold, &sys2, args.truncate_subtypes)?;
            let p = randomization_test(&gold, &system, &sys2, args.iterations, args.seed, args.truncate_subtypes)?;
            Some((r, p))
        }
        None => None,
    };
    let text = match args.format {
        FormatArg::Json => {
            let mut value = json!({
                "las": first.las,
                "uas": first.uas,
                "correct_labeled": first.correct_labeled,
                "correct_unlabeled": first.correct_unlabeled,
                "total": first.total,
                "p_values": {},
            });
            if let Some((r, p)) = &second {
                value["system2"] = json!({
                    "las": r.las,
                    "uas": r.uas,
                    "correct_labeled": r.correct_labeled,
                    "correct_unlabeled": r.correct_unlabeled,
                    "total": r.total,
                });
                value["p_values"] = json!({ "system_vs_system2": p });
            }
            let mut s = serde_json::to_string_pretty(&value)?;
            s.push('\n');
            s
        }
        FormatArg::Tsv => {
            let mut s = String::from("system\tLAS\tUAS\ttotal\tp_value\n");
            s.push_str(&format!("system\t{:.2}\t{:.2}\t{}\t-\n", first.las, first.uas, first.total));
            if let Some((r, p)) = &second {
                s.push_str(&format!("system2\t{:.2}\t{:.2}\t{}\t{p:.4}\n", r.las, r.uas, r.total));
            }
            s
        }
    };
    emit(args.output.as_deref(), &text)
}

fn cmd_experiment(args: ExperimentArgs) -> tbparse::Result<()> {
    let mut spec = ExperimentSpec::load(&args.spec)?;
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    if let Some(e) = args.epochs {
        spec.epochs = e;
    }
    if let Some(e) = args.ft_epochs {
        spec.ft_epochs = e;
    }
    if args.cap.is_some() {
        spec.cap = args.cap;
    }
    if let Some(i) = args.iterations {
        spec.iterations = i;
    }
    spec.truncate_subtypes |= args.truncate_subtypes;
    let base = args
        .spec
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let report = run_experiment(&spec, base, args.workers)?;
    fs::create_dir_all(&args.output).map_err(|e| Error::io(&args.output, e))?;
    write_atomic(&args.output.join("report.tsv"), report.to_tsv().as_bytes())?;
    write_atomic(&args.output.join("report.md"), report.to_markdown().as_bytes())?;
    let failed = report.cells.iter().filter(|c| c.result.is_err()).count();
    if failed > 0 {
        warn!("{failed} report cells failed; see report.md");
    }
    Ok(())
}

fn cmd_oracle(args: OracleArgs) -> tbparse::Result<()> {
    let sentences = read_corpus(&args.input)?;
    let mut labels: Vec<String> = sentences
        .iter()
        .flat_map(|s| s.tokens.iter().filter_map(|t| t.deprel.clone()))
        .collect();
    labels.sort();
    labels.dedup();
    let mut out = String::new();
    for (i, s) in sentences.iter().enumerate() {
        let gold = GoldTree::from_sentence(s, |l| labels.binary_search_by(|x| x.as_str().cmp(l)).ok())?;
        out.push_str(&format!("# sentence {}\n", i + 1));
        let mut c = Configuration::initial(s.len())?;
        for (step, t) in static_oracle(&gold)?.into_iter().enumerate() {
            out.push_str(&c.trace_line(step + 1, t, &labels));
            out.push('\n');
            c.apply(t)?;
        }
        out.push('\n');
    }
    emit(None, &out)
}

fn exit_code(e: &Error) -> u8 {
    if e.is_config_error() {
        1
    } else if e.is_data_error() {
        2
    } else {
        3
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    let result = match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Parse(a) => cmd_parse(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::Oracle(a) => cmd_oracle(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
