mod common;

use tbparse::conllu::validate_tree;
use tbparse::experiment::{run_experiment, ExperimentSpec};
use tbparse::neural::{model_to_bytes, Precision};
use tbparse::strategies::{ft_model_name, parse_with, train, StrategyConfig, StrategyKind, StrategyRun, BASE_MODEL};
use tbparse::{Error, TreebankData};

use common::{fixture, fixture_path, small_hyper};

fn tiny() -> TreebankData {
    TreebankData {
        name: "tiny".into(),
        train: fixture("tiny-train.conllu"),
        dev: fixture("tiny-dev.conllu"),
    }
}

fn two() -> Vec<TreebankData> {
    let mut a = tiny();
    a.name = "a".into();
    let b = TreebankData {
        name: "b".into(),
        train: fixture("forum-train.conllu")[..12].to_vec(),
        dev: fixture("forum-dev.conllu")[..4].to_vec(),
    };
    vec![a, b]
}

fn config(kind: StrategyKind, treebanks: Vec<TreebankData>) -> StrategyConfig {
    let mut c = StrategyConfig::new(kind, treebanks);
    c.hyper = small_hyper();
    c.epochs = 3;
    c.ft_epochs = 2;
    c.seed = 7;
    c
}

fn bytes(run: &StrategyRun, name: &str) -> Vec<u8> {
    model_to_bytes(&run.models[name], Precision::F64).unwrap()
}

#[test]
fn one_treebank_strategies_coincide() {
    let single = train(&config(StrategyKind::Single, vec![tiny()])).unwrap();
    let concat = train(&config(StrategyKind::Concat, vec![tiny()])).unwrap();
    let cft = train(&config(StrategyKind::CFt, vec![tiny()])).unwrap();
    assert_eq!(bytes(&single, "single"), bytes(&concat, "concat"));
    assert_eq!(bytes(&concat, "concat"), bytes(&cft, BASE_MODEL));
    assert_eq!(single.info.curves["single"], concat.info.curves["concat"]);
}

#[test]
fn model_counts_per_strategy() {
    let cft = train(&config(StrategyKind::CFt, two())).unwrap();
    assert_eq!(cft.models.len(), 3);
    assert!(cft.models.contains_key(&ft_model_name("a")));
    assert!(cft.models.contains_key(&ft_model_name("b")));
    assert_eq!(cft.info.curves[&ft_model_name("a")].epochs(), 2);
    assert_eq!(cft.info.curves[BASE_MODEL].epochs(), 3);
    assert!(cft.models.values().all(|m| !m.has_tb()));

    let tbemb = train(&config(StrategyKind::TbEmb, two())).unwrap();
    assert_eq!(tbemb.models.len(), 1);
    let m = tbemb.primary_model();
    assert!(m.has_tb());
    assert_eq!(m.registry.names(), ["a", "b"]);
    let rows = m.params.get(m.params.id("tb_emb").unwrap()).len() / m.hyper.dim_tb;
    assert_eq!(rows, 2);
}

#[test]
fn proxy_dispatch() {
    let dev = fixture("tiny-dev.conllu");
    let tbemb = train(&config(StrategyKind::TbEmb, two())).unwrap();
    assert!(matches!(parse_with(&tbemb, &dev, None, false), Err(Error::ProxyRequired { .. })));
    match parse_with(&tbemb, &dev, Some("c"), false) {
        Err(Error::UnknownProxy { name, valid }) => {
            assert_eq!(name, "c");
            assert_eq!(valid, ["a", "b"]);
        }
        other => panic!("{other:?}"),
    }
    let parsed = parse_with(&tbemb, &dev, Some("b"), true).unwrap();
    assert_eq!(parsed, parse_with(&tbemb, &dev, Some("b"), false).unwrap());
    for (p, g) in parsed.iter().zip(&dev) {
        assert!(validate_tree(p).is_empty());
        let forms = |s: &tbparse::Sentence| s.tokens.iter().map(|t| (t.id, t.form.clone())).collect::<Vec<_>>();
        assert_eq!(forms(p), forms(g));
    }

    let concat = train(&config(StrategyKind::Concat, two())).unwrap();
    assert_eq!(
        parse_with(&concat, &dev, Some("anything"), false).unwrap(),
        parse_with(&concat, &dev, None, false).unwrap()
    );

    let cft = train(&config(StrategyKind::CFt, two())).unwrap();
    assert!(matches!(parse_with(&cft, &dev, None, false), Err(Error::ProxyRequired { .. })));
    let via_a = parse_with(&cft, &dev, Some("a"), false).unwrap();
    let direct = tbparse::parser::parse_corpus(&cft.models[&ft_model_name("a")], &dev, None, false).unwrap();
    assert_eq!(via_a, direct);
}

#[test]
fn run_directory_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cft = train(&config(StrategyKind::CFt, two())).unwrap();
    cft.save(dir.path(), Precision::F64).unwrap();
    let back = StrategyRun::load(dir.path()).unwrap();
    assert_eq!(back.info, cft.info);
    for name in cft.models.keys() {
        assert_eq!(bytes(&back, name), bytes(&cft, name));
    }
}

#[test]
fn data_errors() {
    let mut empty = tiny();
    empty.train.clear();
    assert!(matches!(train(&config(StrategyKind::Single, vec![empty])), Err(Error::EmptyTreebank(_))));
    let mut no_dev = tiny();
    no_dev.dev.clear();
    assert!(matches!(train(&config(StrategyKind::Single, vec![no_dev])), Err(Error::DevMissing(_))));
}

fn experiment_spec() -> String {
    let p = |n: &str| fixture_path(n).display().to_string();
    serde_json::json!({
        "seed": 3,
        "epochs": 2,
        "ft_epochs": 1,
        "iterations": 200,
        "strategies": ["single", "concat", "cft", "tbemb"],
        "hyperparameters": {"dim_word": 8, "dim_char": 4, "hidden_char": 4, "hidden_word": 8, "layers": 1, "mlp_hidden": 12, "dim_tb": 2},
        "languages": [{
            "name": "en",
            "treebanks": [
                {"name": "tiny", "train": p("tiny-train.conllu"), "dev": p("tiny-dev.conllu"), "test": p("tiny-dev.conllu")},
                {"name": "forum", "train": p("forum-train.conllu"), "dev": p("forum-dev.conllu"), "test": p("forum-dev.conllu")}
            ],
            "extra_tests": [{"name": "pud", "path": p("news-dev.conllu"), "proxies": ["tiny", "forum"]}]
        }]
    })
    .to_string()
}

#[test]
fn experiment_report_is_deterministic() {
    let spec = ExperimentSpec::from_json(&experiment_spec()).unwrap();
    let a = run_experiment(&spec, std::path::Path::new("."), 4).unwrap();
    let b = run_experiment(&spec, std::path::Path::new("."), 1).unwrap();
    let tsv = a.to_tsv();
    assert_eq!(tsv, b.to_tsv());
    assert_eq!(a.to_markdown(), b.to_markdown());
    let lines: Vec<&str> = tsv.lines().collect();
    assert!(lines[0].starts_with("language\ttest_set\tstrategy\tproxy\tLAS"));
    // 2 own test sets and the extra set under 2 proxies, 4 strategies each
    assert_eq!(lines.len(), 1 + 8 + 8, "{tsv}");
    assert!(lines[1..].iter().all(|l| l.ends_with("\t-")));
}

#[test]
fn experiment_schema_errors_name_the_field() {
    let text = experiment_spec().replace("\"tbemb\"]", "\"tb_emb_x\"]");
    match ExperimentSpec::from_json(&text) {
        Err(e @ Error::Spec { .. }) => assert!(e.to_string().contains("strategies"), "{e}"),
        other => panic!("{other:?}"),
    }
}
