//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::{HashMap, HashSet};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tbparse::conllu::{Sentence, Token, TreebankRegistry};
use tbparse::neural::{hinge_loss, Graph, Grads, Hyperparams, Model, NodeId, Vocabularies};
use tbparse::transition::{dynamic_costs, static_oracle, Configuration, GoldTree, Transition};

/// Every single-rooted tree over `n` words, as 1-based head vectors.
pub fn all_trees(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut heads = vec![0; n];
    fn rec(i: usize, n: usize, heads: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if i == n {
            if is_tree(heads) {
                out.push(heads.clone());
            }
            return;
        }
        for h in 0..=n {
            if h != i + 1 {
                heads[i] = h;
                rec(i + 1, n, heads, out);
            }
        }
    }
    rec(0, n, &mut heads, &mut out);
    out
}

/// Union-find spanning check: exactly one root, and the n arcs connect all
/// n + 1 nodes (which with n edges rules out cycles).
pub fn is_tree(heads: &[usize]) -> bool {
    let n = heads.len();
    if heads.iter().filter(|&&h| h == 0).count() != 1 {
        return false;
    }
    let mut parent: Vec<usize> = (0..=n).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut x = x;
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for (i, &h) in heads.iter().enumerate() {
        if h > n || h == i + 1 {
            return false;
        }
        let a = find(&mut parent, i + 1);
        let b = find(&mut parent, h);
        if a == b {
            return false;
        }
        parent[a] = b;
    }
    true
}

/// All label assignments over `num_labels` labels.
pub fn all_labelings(n: usize, num_labels: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|v: Vec<usize>| {
                (0..num_labels).map(move |l| {
                    let mut w = v.clone();
                    w.push(l);
                    w
                })
            })
            .collect();
    }
    out
}

/// Exhaustive search over derivations. SWAP is taken exactly when the
/// projective order demands it; otherwise every legal SHIFT / LEFT_ARC /
/// RIGHT_ARC (with every label) is explored.
pub struct Reachability<'a> {
    pub gold: &'a GoldTree,
    pub num_labels: usize,
    memo: HashMap<Configuration, usize>,
}

impl<'a> Reachability<'a> {
    pub fn new(gold: &'a GoldTree, num_labels: usize) -> Self {
        Reachability {
            gold,
            num_labels,
            memo: HashMap::new(),
        }
    }

    pub fn correct(&self, c: &Configuration) -> usize {
        c.arcs()
            .filter(|&(h, d, l)| h == self.gold.head_node(d) && l == self.gold.label_of(d))
            .count()
    }

    pub fn moves(&self, c: &Configuration) -> Vec<Transition> {
        if self.gold.swap_mandated(c) {
            return vec![Transition::Swap];
        }
        let legal = c.legal();
        let mut out = Vec::new();
        if legal.shift {
            out.push(Transition::Shift);
        }
        if legal.left_arc {
            out.extend((0..self.num_labels).map(Transition::LeftArc));
        }
        if legal.right_arc {
            out.extend((0..self.num_labels).map(Transition::RightArc));
        }
        out
    }

    /// Maximum number of correct labeled arcs in any completion of `c`.
    pub fn best(&mut self, c: &Configuration) -> usize {
        if c.is_terminal() {
            return self.correct(c);
        }
        if let Some(&v) = self.memo.get(c) {
            return v;
        }
        let mut best = 0;
        for t in self.moves(c) {
            let next = c.applied(t).unwrap();
            best = best.max(self.best(&next));
        }
        self.memo.insert(c.clone(), best);
        best
    }
}

/// Naive crossing-arc projectivity test over (head, dependent) spans.
pub fn crossing(heads: &[usize]) -> bool {
    let spans: Vec<(usize, usize)> = heads
        .iter()
        .enumerate()
        .map(|(i, &h)| (h.min(i + 1), h.max(i + 1)))
        .collect();
    spans.iter().any(|&(a, b)| {
        spans
            .iter()
            .any(|&(c, d)| a < c && c < b && b < d)
    })
}

/// A recorded disagreement between `dynamic_costs` and brute force:
/// (heads, stack, buffer, transition, claimed cost, true cost).
pub type Mismatch = (Vec<usize>, Vec<usize>, Vec<usize>, Transition, usize, usize);

/// Compares `dynamic_costs` with exhaustive search on every configuration
/// reachable by zero-cost transitions, for every labeled tree with a size in
/// `sizes`. Returns the number of configurations checked and all mismatches.
pub fn check_costs(sizes: std::ops::RangeInclusive<usize>, num_labels: usize) -> (usize, Vec<Mismatch>) {
    let mut checked = 0;
    let mut mismatches = Vec::new();
    for n in sizes {
        for heads in all_trees(n) {
            for labels in all_labelings(n, num_labels) {
                let g = GoldTree::new(heads.clone(), labels).unwrap();
                let mut reach = Reachability::new(&g, num_labels);
                let mut seen = HashSet::new();
                let mut frontier = vec![Configuration::initial(n).unwrap()];
                while let Some(c) = frontier.pop() {
                    if c.is_terminal() || !seen.insert(c.clone()) {
                        continue;
                    }
                    checked += 1;
                    let costs = dynamic_costs(&c, &g);
                    let here = reach.best(&c);
                    let legal = costs.legal_transitions(num_labels);
                    if costs.swap_mandated {
                        for &t in &legal {
                            let ok = if t == Transition::Swap { costs.cost(t) == 0 } else { costs.cost(t) >= 1 };
                            if !ok {
                                mismatches.push((heads.clone(), c.stack.clone(), c.buffer.clone(), t, costs.cost(t), usize::from(t != Transition::Swap)));
                            }
                        }
                        frontier.push(c.applied(Transition::Swap).unwrap());
                        continue;
                    }
                    for t in legal {
                        if t == Transition::Swap {
                            continue;
                        }
                        let next = c.applied(t).unwrap();
                        let truth = here - reach.best(&next);
                        if costs.cost(t) != truth {
                            mismatches.push((heads.clone(), c.stack.clone(), c.buffer.clone(), t, costs.cost(t), truth));
                        }
                        if costs.cost(t) == 0 {
                            frontier.push(next);
                        }
                    }
                }
            }
        }
    }
    (checked, mismatches)
}

/// Random single-rooted tree: words are placed in random order and each
/// attaches to a uniformly chosen word placed before it.
pub fn random_tree(n: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (1..=n).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.gen_range(0..=i));
    }
    let mut heads = vec![0; n];
    for k in 1..n {
        heads[order[k] - 1] = order[rng.gen_range(0..k)];
    }
    heads
}

pub fn sentence_from(heads: &[usize], labels: &[&str]) -> Sentence {
    Sentence::new(
        heads
            .iter()
            .zip(labels)
            .enumerate()
            .map(|(i, (&h, &l))| Token::new(i + 1, format!("w{}", i + 1)).with_head(h, l))
            .collect(),
    )
}

/// Per-token counts written without the library: (labeled, unlabeled, total).
pub fn naive_scores(gold: &[Sentence], system: &[Sentence], truncate: bool) -> (usize, usize, usize) {
    let strip = |s: &str| -> String {
        if truncate {
            s.split(':').next().unwrap().to_string()
        } else {
            s.to_string()
        }
    };
    let mut labeled = 0;
    let mut unlabeled = 0;
    let mut total = 0;
    for (g, s) in gold.iter().zip(system) {
        for i in 0..g.tokens.len() {
            total += 1;
            let (gt, st) = (&g.tokens[i], &s.tokens[i]);
            if gt.head.is_some() && gt.head == st.head {
                unlabeled += 1;
                match (&gt.deprel, &st.deprel) {
                    (Some(a), Some(b)) if strip(a) == strip(b) => labeled += 1,
                    _ => {}
                }
            }
        }
    }
    (labeled, unlabeled, total)
}

pub const TINY_LABELS: [&str; 2] = ["dep", "root"];

/// The tiny gradient-check model: d_w=4, d_c=3, h_c=3, h_s=5, d_tb=2 and
/// two labels, over a fixed three-sentence corpus.
pub fn tiny_setup(seed: u64, with_tb: bool) -> (Model, Vec<Sentence>) {
    let corpus = vec![
        Sentence::new(vec![
            Token::new(1, "ab").with_head(2, "dep"),
            Token::new(2, "c").with_head(0, "root"),
            Token::new(3, "ab").with_head(2, "dep"),
        ]),
        // non-projective: forces SWAP on the oracle path
        sentence_from(&[3, 4, 0, 3], &["dep", "dep", "root", "dep"]),
        Sentence::new(vec![Token::new(1, "x").with_head(0, "root")]),
    ];
    let hyper = Hyperparams {
        dim_word: 4,
        dim_char: 3,
        hidden_char: 3,
        hidden_word: 5,
        layers: 2,
        mlp_hidden: 6,
        dim_tb: 2,
        ..Hyperparams::default()
    };
    let registry = TreebankRegistry::from_names(["t0", "t1", "t2"]).unwrap();
    let vocab = Vocabularies::build(&corpus);
    assert_eq!(vocab.labels, TINY_LABELS);
    let model = Model::new(hyper, vocab, registry, with_tb, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
    (model, corpus)
}

/// Sum of hinge losses along the static-oracle derivation of each sentence.
/// With `grads`, also accumulates the analytic gradient.
pub fn oracle_path_loss(model: &Model, corpus: &[Sentence], tb: Option<usize>, mut grads: Option<&mut Grads>) -> f64 {
    let num_labels = model.num_labels();
    let mut total = 0.0;
    for s in corpus {
        let gold = GoldTree::from_sentence(s, |l| model.vocab.label_id(l)).unwrap();
        let forms: Vec<&str> = s.tokens.iter().map(|t| t.form.as_str()).collect();
        let mut g = Graph::new(&model.params);
        let xs = model.embed_sentence(&mut g, &forms, None, tb).unwrap();
        let enc = model.encode_sentence(&mut g, &xs).unwrap();
        let mut c = Configuration::initial(s.len()).unwrap();
        let mut seeds: Vec<(NodeId, Vec<f64>)> = Vec::new();
        for t in static_oracle(&gold).unwrap() {
            let costs = dynamic_costs(&c, &gold);
            let idx = |ts: Vec<Transition>| ts.iter().map(|t| t.output_index(num_labels)).collect::<Vec<_>>();
            let phi = model.extract_features(&mut g, &c, &enc);
            let out = model.score(&mut g, phi).unwrap();
            let (loss, grad) = hinge_loss(
                g.value(out),
                &idx(costs.best_set(num_labels)),
                &idx(costs.legal_transitions(num_labels)),
            )
            .unwrap();
            total += loss;
            seeds.push((out, grad));
            c.apply(t).unwrap();
        }
        if let Some(gr) = grads.as_deref_mut() {
            g.backward(&seeds, gr);
        }
    }
    total
}

/// Central finite differences on every value of every tensor. Returns
/// `(tensor name, relative error)` with the relative error taken over the
/// whole tensor: |fd - analytic| / max(|fd| + |analytic|, 1e-12).
pub fn finite_difference_errors(model: &Model, corpus: &[Sentence], tb: Option<usize>) -> Vec<(String, f64)> {
    let mut analytic = Grads::zeros_like(&model.params);
    oracle_path_loss(model, corpus, tb, Some(&mut analytic));
    let h = 1e-5;
    let mut probe = model.clone();
    let ids: Vec<_> = model.params.ids().collect();
    let mut out = Vec::new();
    for id in ids {
        let mut diff = 0.0;
        let mut norm = 0.0;
        for i in 0..model.params.get(id).len() {
            let orig = model.params.get(id).values[i];
            probe.params.get_mut(id).values[i] = orig + h;
            let up = oracle_path_loss(&probe, corpus, tb, None);
            probe.params.get_mut(id).values[i] = orig - h;
            let down = oracle_path_loss(&probe, corpus, tb, None);
            probe.params.get_mut(id).values[i] = orig;
            let fd = (up - down) / (2.0 * h);
            let an = analytic.get(id)[i];
            diff += (fd - an) * (fd - an);
            norm += fd * fd + an * an;
        }
        let rel = if norm < 1e-20 { 0.0 } else { diff.sqrt() / norm.sqrt().max(1e-12) };
        out.push((model.params.name(id).to_owned(), rel));
    }
    out
}

/// A hand-scored evaluation case.
pub struct EvalFixture {
    pub name: &'static str,
    pub gold: Vec<Sentence>,
    pub system: Vec<Sentence>,
    pub truncate: bool,
    pub las: f64,
    pub uas: f64,
}

fn scored(arcs: &[(usize, &str)]) -> Sentence {
    Sentence::new(
        arcs.iter()
            .enumerate()
            .map(|(i, &(h, r))| Token::new(i + 1, format!("w{}", i + 1)).with_head(h, r))
            .collect(),
    )
}

/// Ten evaluation cases with scores worked out by hand.
pub fn eval_fixtures() -> Vec<EvalFixture> {
    let chain: Vec<(usize, &str)> = (0..10).map(|i| (i, if i == 0 { "root" } else { "dep" })).collect();
    let mut one_label = chain.clone();
    one_label[4].1 = "obj";
    let mut one_head = chain.clone();
    one_head[7].0 = 2;
    let mut both = chain.clone();
    both[1].1 = "nsubj";
    both[2].0 = 5;
    both[3].0 = 6;
    both[3].1 = "obj";
    let star: Vec<(usize, &str)> = vec![(0, "root"), (1, "nsubj"), (1, "obj"), (1, "obl"), (1, "punct")];
    let star_all_wrong: Vec<(usize, &str)> = vec![(2, "dep"), (0, "root"), (2, "dep"), (2, "dep"), (2, "dep")];
    let sub_gold: Vec<(usize, &str)> = vec![(2, "nsubj:pass"), (0, "root"), (2, "obl:tmod"), (2, "punct")];
    let sub_sys: Vec<(usize, &str)> = vec![(2, "nsubj"), (0, "root"), (2, "obl:npmod"), (2, "punct")];
    let three: Vec<(usize, &str)> = vec![(0, "root"), (1, "obj"), (1, "obj")];
    let three_sys: Vec<(usize, &str)> = vec![(0, "root"), (1, "obj"), (2, "obj")];
    let mut f = vec![
        EvalFixture { name: "identical", gold: vec![scored(&chain)], system: vec![scored(&chain)], truncate: false, las: 100.0, uas: 100.0 },
        EvalFixture { name: "one label wrong", gold: vec![scored(&chain)], system: vec![scored(&one_label)], truncate: false, las: 90.0, uas: 100.0 },
        EvalFixture { name: "one head wrong", gold: vec![scored(&chain)], system: vec![scored(&one_head)], truncate: false, las: 90.0, uas: 90.0 },
        EvalFixture { name: "mixed errors", gold: vec![scored(&chain)], system: vec![scored(&both)], truncate: false, las: 70.0, uas: 80.0 },
        EvalFixture { name: "all wrong", gold: vec![scored(&star)], system: vec![scored(&star_all_wrong)], truncate: false, las: 0.0, uas: 0.0 },
        EvalFixture { name: "subtypes strict", gold: vec![scored(&sub_gold)], system: vec![scored(&sub_sys)], truncate: false, las: 50.0, uas: 100.0 },
        EvalFixture { name: "subtypes truncated", gold: vec![scored(&sub_gold)], system: vec![scored(&sub_sys)], truncate: true, las: 100.0, uas: 100.0 },
        EvalFixture {
            name: "two sentences",
            gold: vec![scored(&chain), scored(&star)],
            system: vec![scored(&one_head), scored(&star_all_wrong)],
            truncate: false,
            las: 60.0,
            uas: 60.0,
        },
        EvalFixture { name: "two of three", gold: vec![scored(&three)], system: vec![scored(&three_sys)], truncate: false, las: 200.0 / 3.0, uas: 200.0 / 3.0 },
    ];
    // Unannotated system output counts as wrong.
    let mut bare = scored(&star);
    for t in &mut bare.tokens {
        t.head = None;
        t.deprel = None;
    }
    f.push(EvalFixture { name: "missing predictions", gold: vec![scored(&star)], system: vec![bare], truncate: false, las: 0.0, uas: 0.0 });
    f
}

/// Two systems that disagree maximally: one is perfect, the other wrong
/// everywhere, over `sentences` sentences.
pub fn extreme_pair(sentences: usize) -> (Vec<Sentence>, Vec<Sentence>, Vec<Sentence>) {
    let gold: Vec<(usize, &str)> = (0..6).map(|i| (i, if i == 0 { "root" } else { "dep" })).collect();
    let wrong: Vec<(usize, &str)> = (0..6).map(|i| ((i + 2) % 7, "x")).collect();
    let g: Vec<Sentence> = (0..sentences).map(|_| scored(&gold)).collect();
    let w: Vec<Sentence> = (0..sentences).map(|_| scored(&wrong)).collect();
    (g.clone(), g, w)
}

pub fn fixture_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn fixture(name: &str) -> Vec<Sentence> {
    let text = std::fs::read_to_string(fixture_path(name)).unwrap();
    tbparse::conllu::parse_conllu(&text).unwrap()
}

/// Dimensions small enough for tests that train several models.
pub fn small_hyper() -> Hyperparams {
    Hyperparams {
        dim_word: 16,
        dim_char: 8,
        hidden_char: 8,
        hidden_word: 16,
        layers: 1,
        mlp_hidden: 24,
        dim_tb: 4,
        ..Hyperparams::default()
    }
}

/// All CoNLL-U fixture files, sorted by name.
pub fn fixture_files() -> Vec<std::path::PathBuf> {
    let mut files: Vec<_> = std::fs::read_dir(fixture_path(""))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "conllu"))
        .collect();
    files.sort();
    files
}
