//! Generated treebanks for controlled experiments.
//!
//! [`conflict_treebank`] produces sentences whose surface strings are drawn
//! from one distribution while the clause after the object is annotated
//! either as a complement clause (`ccomp`, introduced by `mark`) or as a
//! relative clause (`acl:relcl`, with the relativizer as `obj`). Tokens whose
//! analysis depends on the convention carry `Conflict=Yes` in MISC.
//!
//! [`domain_treebank`] produces a small grammar of noun phrases,
//! prepositional phrases, coordination and clausal complements whose
//! lexicon, length and annotation conventions vary by [`DomainStyle`].

use rand::seq::SliceRandom;
use rand::Rng;

use crate::conllu::{Sentence, Token};

pub const CONFLICT_MISC: &str = "Conflict=Yes";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClauseConvention {
    /// Clause is a `ccomp` of the preceding verb; the complementizer is `mark`.
    Complement,
    /// Clause is an `acl:relcl` of the preceding object; the relativizer is `obj`.
    Relative,
}

const NAMES: &[&str] = &[
    "Anna", "Ben", "Cara", "Dan", "Eva", "Finn", "Greta", "Hugo", "Ida", "Jon", "Kim", "Lena",
    "Max", "Nora", "Otto", "Pia", "Rolf", "Sara", "Tom", "Ulla", "Vera", "Will", "Xena", "Yann",
];
const TRANSITIVE: &[&str] = &[
    "tells", "shows", "warns", "asks", "reminds", "convinces", "teaches", "informs", "promises",
    "assures", "writes", "signals",
];
const FINAL_VERBS: &[&str] = &[
    "sees", "likes", "meets", "knows", "helps", "follows", "calls", "visits", "trusts", "admires",
];
const ADVERBS: &[&str] = &["often", "again", "never", "quietly", "twice"];

struct Builder {
    tokens: Vec<Token>,
    conflict: Vec<bool>,
}

impl Builder {
    fn new() -> Self {
        Builder {
            tokens: Vec::new(),
            conflict: Vec::new(),
        }
    }

    /// Adds a word with a placeholder head; returns its 1-based id.
    fn push(&mut self, form: &str) -> usize {
        let id = self.tokens.len() + 1;
        self.tokens.push(Token::new(id, form));
        self.conflict.push(false);
        id
    }

    fn attach(&mut self, dep: usize, head: usize, rel: &str) {
        let t = &mut self.tokens[dep - 1];
        t.head = Some(head);
        t.deprel = Some(rel.to_owned());
    }

    fn mark_conflict(&mut self, id: usize) {
        self.conflict[id - 1] = true;
    }

    fn finish(mut self) -> Sentence {
        for (t, c) in self.tokens.iter_mut().zip(&self.conflict) {
            if *c {
                t.misc = Some(CONFLICT_MISC.to_owned());
            }
        }
        Sentence::new(self.tokens)
    }
}

fn pick<'a>(rng: &mut impl Rng, words: &[&'a str]) -> &'a str {
    words.choose(rng).copied().unwrap()
}

/// A name, sometimes with a determiner; returns the head id.
fn name_phrase(b: &mut Builder, rng: &mut impl Rng) -> usize {
    if rng.gen_bool(0.15) {
        let det = b.push("the");
        let n = b.push(&pick(rng, NAMES).to_lowercase());
        b.attach(det, n, "det");
        n
    } else {
        b.push(pick(rng, NAMES))
    }
}

/// One sentence of the conflict corpus.
pub fn conflict_sentence(convention: ClauseConvention, rng: &mut impl Rng) -> Sentence {
    let mut b = Builder::new();
    let subj = name_phrase(&mut b, rng);
    let verb = b.push(pick(rng, TRANSITIVE));
    b.attach(subj, verb, "nsubj");
    if rng.gen_bool(0.2) {
        let adv = b.push(pick(rng, ADVERBS));
        b.attach(adv, verb, "advmod");
    }
    let mut prev_verb = verb;
    let mut prev_obj = name_phrase(&mut b, rng);
    b.attach(prev_obj, verb, "obj");
    let clauses = if rng.gen_bool(0.5) { 2 } else { 1 };
    for k in 0..clauses {
        let comp = b.push("that");
        let s = name_phrase(&mut b, rng);
        let last = k + 1 == clauses;
        let v = b.push(if last { pick(rng, FINAL_VERBS) } else { pick(rng, TRANSITIVE) });
        b.attach(s, v, "nsubj");
        match convention {
            ClauseConvention::Complement => {
                b.attach(v, prev_verb, "ccomp");
                b.attach(comp, v, "mark");
            }
            ClauseConvention::Relative => {
                b.attach(v, prev_obj, "acl:relcl");
                b.attach(comp, v, "obj");
            }
        }
        b.mark_conflict(v);
        b.mark_conflict(comp);
        if !last {
            let o = name_phrase(&mut b, rng);
            b.attach(o, v, "obj");
            prev_obj = o;
            prev_verb = v;
        }
    }
    let punct = b.push(".");
    b.attach(punct, verb, "punct");
    b.attach(verb, 0, "root");
    b.finish()
}

pub fn conflict_treebank(convention: ClauseConvention, size: usize, rng: &mut impl Rng) -> Vec<Sentence> {
    (0..size).map(|_| conflict_sentence(convention, rng)).collect()
}

/// True for tokens whose gold analysis depends on the clause convention.
pub fn is_conflict_token(t: &Token) -> bool {
    t.misc.as_deref() == Some(CONFLICT_MISC)
}

/// Lexicon, length and annotation conventions of a generated domain.
#[derive(Clone, Debug)]
pub struct DomainStyle {
    pub nouns: Vec<&'static str>,
    pub verbs: Vec<&'static str>,
    pub adjectives: Vec<&'static str>,
    pub clause: ClauseConvention,
    /// Label of prepositional phrases modifying verbs.
    pub oblique_label: &'static str,
    /// `cc` attaches to the first conjunct instead of the second.
    pub cc_on_first: bool,
    /// Probability of each optional expansion; controls sentence length.
    pub richness: f64,
    /// Probability of an extraposed, non-projective PP.
    pub extraposition: f64,
}

const SHARED_NOUNS: &[&str] = &[
    "man", "woman", "child", "city", "house", "day", "friend", "letter", "car", "door", "road",
    "river", "table", "book", "idea", "group",
];
const SHARED_VERBS: &[&str] = &["sees", "finds", "takes", "gives", "keeps", "wants", "brings", "leaves"];
const SHARED_ADJ: &[&str] = &["old", "new", "small", "big", "good", "long"];
const PREPS: &[&str] = &["in", "on", "with", "near", "from", "after"];
const DETS: &[&str] = &["the", "a", "this", "every"];

impl DomainStyle {
    /// Longer sentences, news lexicon, complement clauses, UD-style `cc`.
    pub fn news() -> Self {
        DomainStyle {
            nouns: [SHARED_NOUNS, &["minister", "market", "report", "council", "price", "election", "company", "budget", "court", "vote"]].concat(),
            verbs: [SHARED_VERBS, &["announces", "reports", "approves", "rejects", "funds", "signs"]].concat(),
            adjectives: [SHARED_ADJ, &["public", "national", "annual", "local"]].concat(),
            clause: ClauseConvention::Complement,
            oblique_label: "obl",
            cc_on_first: false,
            richness: 0.45,
            extraposition: 0.05,
        }
    }

    /// Shorter sentences, conversational lexicon, relative clauses,
    /// `cc` on the first conjunct and a subtyped oblique label.
    pub fn forum() -> Self {
        DomainStyle {
            nouns: [SHARED_NOUNS, &["game", "phone", "post", "thread", "song", "movie", "dog", "pizza", "link", "team"]].concat(),
            verbs: [SHARED_VERBS, &["loves", "hates", "posts", "shares", "plays", "watches"]].concat(),
            adjectives: [SHARED_ADJ, &["funny", "weird", "cool", "awful"]].concat(),
            clause: ClauseConvention::Relative,
            oblique_label: "obl:mod",
            cc_on_first: true,
            richness: 0.3,
            extraposition: 0.05,
        }
    }
}

struct Domain<'a, R> {
    style: &'a DomainStyle,
    rng: &'a mut R,
    b: Builder,
}

impl<'a, R: Rng> Domain<'a, R> {
    fn chance(&mut self, p: f64) -> bool {
        self.rng.gen_bool(p)
    }

    fn word(&mut self, list: &[&'static str]) -> &'static str {
        pick(&mut *self.rng, list)
    }

    /// Noun phrase without trailing modifiers; returns the head.
    fn bare_np(&mut self) -> usize {
        let det = self.chance(0.8).then(|| {
            let w = self.word(DETS);
            self.b.push(w)
        });
        let adj = self.chance(self.style.richness * 0.6).then(|| {
            let style: &'a DomainStyle = self.style;
            let w = self.word(&style.adjectives);
            self.b.push(w)
        });
        let style: &'a DomainStyle = self.style;
        let w = self.word(&style.nouns);
        let n = self.b.push(w);
        if let Some(d) = det {
            self.b.attach(d, n, "det");
        }
        if let Some(a) = adj {
            self.b.attach(a, n, "amod");
        }
        n
    }

    fn pp(&mut self) -> usize {
        let w = self.word(PREPS);
        let p = self.b.push(w);
        let n = self.bare_np();
        self.b.attach(p, n, "case");
        n
    }

    fn np(&mut self, depth: usize) -> usize {
        let head = self.bare_np();
        if depth < 2 && self.chance(self.style.richness * 0.5) {
            let m = self.pp();
            self.b.attach(m, head, "nmod");
        }
        if depth == 0 && self.chance(self.style.richness * 0.3) {
            let cc = self.b.push("and");
            let conj = self.bare_np();
            self.b.attach(conj, head, "conj");
            self.b.attach(cc, if self.style.cc_on_first { head } else { conj }, "cc");
        }
        head
    }

    fn clause(&mut self, depth: usize) -> usize {
        let subj = self.np(depth);
        let style: &'a DomainStyle = self.style;
        let w = self.word(&style.verbs);
        let verb = self.b.push(w);
        self.b.attach(subj, verb, "nsubj");
        let obj = self.np(depth + 1);
        self.b.attach(obj, verb, "obj");
        if self.chance(self.style.extraposition) {
            // ADV PP where the PP modifies the object: crosses the adverb arc.
            let w = self.word(ADVERBS);
            let adv = self.b.push(w);
            self.b.attach(adv, verb, "advmod");
            let m = self.pp();
            self.b.attach(m, obj, "nmod");
        } else if self.chance(self.style.richness * 0.6) {
            let m = self.pp();
            let label = self.style.oblique_label;
            self.b.attach(m, verb, label);
        }
        if depth == 0 && self.chance(self.style.richness * 0.5) {
            let comp = self.b.push("that");
            let inner = self.clause(depth + 1);
            match self.style.clause {
                ClauseConvention::Complement => {
                    self.b.attach(inner, verb, "ccomp");
                    self.b.attach(comp, inner, "mark");
                }
                ClauseConvention::Relative => {
                    self.b.attach(inner, obj, "acl:relcl");
                    self.b.attach(comp, inner, "obj");
                }
            }
        }
        verb
    }
}

pub fn domain_sentence(style: &DomainStyle, rng: &mut impl Rng) -> Sentence {
    let mut d = Domain {
        style,
        rng,
        b: Builder::new(),
    };
    let root = d.clause(0);
    let punct = d.b.push(".");
    d.b.attach(punct, root, "punct");
    d.b.attach(root, 0, "root");
    d.b.finish()
}

pub fn domain_treebank(style: &DomainStyle, size: usize, rng: &mut impl Rng) -> Vec<Sentence> {
    (0..size).map(|_| domain_sentence(style, rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conllu::validate_tree;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_sentences_are_trees() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for conv in [ClauseConvention::Complement, ClauseConvention::Relative] {
            for s in conflict_treebank(conv, 200, &mut rng) {
                assert!(validate_tree(&s).is_empty(), "{s:?}");
            }
        }
        for style in [DomainStyle::news(), DomainStyle::forum()] {
            for s in domain_treebank(&style, 300, &mut rng) {
                assert!(validate_tree(&s).is_empty(), "{s:?}");
            }
        }
    }

    #[test]
    fn conventions_share_surface_forms() {
        let a = conflict_treebank(ClauseConvention::Complement, 50, &mut ChaCha8Rng::seed_from_u64(4));
        let b = conflict_treebank(ClauseConvention::Relative, 50, &mut ChaCha8Rng::seed_from_u64(4));
        for (x, y) in a.iter().zip(&b) {
            let fx: Vec<_> = x.tokens.iter().map(|t| &t.form).collect();
            let fy: Vec<_> = y.tokens.iter().map(|t| &t.form).collect();
            assert_eq!(fx, fy);
            let differ: Vec<bool> = x.tokens.iter().zip(&y.tokens).map(|(p, q)| p.head != q.head || p.deprel != q.deprel).collect();
            let marked: Vec<bool> = x.tokens.iter().map(is_conflict_token).collect();
            assert_eq!(differ, marked);
        }
    }
}
