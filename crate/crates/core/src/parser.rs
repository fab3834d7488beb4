//! Training on one sentence and greedy decoding.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conllu::Sentence;
use crate::error::{Error, Result};
use crate::neural::adam::{Adam, AdamConfig};
use crate::neural::graph::{Graph, NodeId};
use crate::neural::model::{Encoded, Model};
use crate::neural::params::Grads;
use crate::neural::hinge_loss;
use crate::transition::{arcs_to_sentence, dynamic_costs, Configuration, GoldTree, Transition};

/// Label assigned to words left without a head at the end of decoding.
pub const FALLBACK_LABEL: &str = "dep";

/// Training-time options that do not change the model architecture.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainOptions {
    /// Probability of following a wrong model prediction.
    pub explore_prob: f64,
    /// First (1-based) epoch with exploration.
    pub explore_from_epoch: usize,
    /// `alpha` in the word dropout probability `alpha / (alpha + freq)`.
    pub word_dropout: f64,
    pub adam: AdamConfig,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            explore_prob: 0.1,
            explore_from_epoch: 2,
            word_dropout: 0.25,
            adam: AdamConfig::default(),
        }
    }
}

/// Mutable training state: the model plus optimizer moments.
#[derive(Clone, Debug)]
pub struct Trainer {
    pub model: Model,
    pub options: TrainOptions,
    adam: Adam,
    grads: Grads,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SentenceStats {
    pub loss: f64,
    pub transitions: usize,
    pub errors: usize,
}

impl Trainer {
    pub fn new(model: Model, options: TrainOptions) -> Self {
        let adam = Adam::new(&model.params, options.adam);
        let grads = Grads::zeros_like(&model.params);
        Trainer {
            model,
            options,
            adam,
            grads,
        }
    }

    pub fn into_model(self) -> Model {
        self.model
    }

    /// Word ids after dropout; unknown words are already UNK.
    fn dropped_word_ids(&self, sentence: &Sentence, rng: &mut impl Rng) -> Vec<usize> {
        let alpha = self.options.word_dropout;
        sentence
            .tokens
            .iter()
            .map(|t| {
                let id = self.model.vocab.word_id(&t.form);
                if alpha <= 0.0 || id == 0 {
                    return id;
                }
                let freq = self.model.vocab.word_freq[id] as f64;
                if rng.gen::<f64>() < alpha / (alpha + freq) {
                    0
                } else {
                    id
                }
            })
            .collect()
    }

    /// Runs one derivation with the dynamic oracle and applies one Adam
    /// update for the accumulated hinge losses. `epoch` is 1-based.
    pub fn train_sentence(
        &mut self,
        sentence: &Sentence,
        tb: Option<usize>,
        epoch: usize,
        rng: &mut impl Rng,
    ) -> Result<SentenceStats> {
        let model = &self.model;
        let gold = GoldTree::from_sentence(sentence, |l| model.vocab.label_id(l))?;
        let word_ids = self.dropped_word_ids(sentence, rng);
        let forms: Vec<&str> = sentence.tokens.iter().map(|t| t.form.as_str()).collect();
        let num_labels = model.num_labels();

        let mut g = Graph::new(&model.params);
        let xs = model.embed_sentence(&mut g, &forms, Some(&word_ids), tb)?;
        let enc = model.encode_sentence(&mut g, &xs)?;

        let explore = epoch >= self.options.explore_from_epoch && self.options.explore_prob > 0.0;
        let mut stats = SentenceStats::default();
        let mut seeds: Vec<(NodeId, Vec<f64>)> = Vec::new();
        let mut c = Configuration::initial(sentence.len())?;
        let cap = Configuration::max_steps(sentence.len());
        while !c.is_terminal() {
            if stats.transitions >= cap {
                return Err(Error::IllegalTransition(format!(
                    "no terminal configuration after {cap} steps"
                )));
            }
            let costs = dynamic_costs(&c, &gold);
            let legal = costs.legal_transitions(num_labels);
            let best = costs.best_set(num_labels);
            let phi = model.extract_features(&mut g, &c, &enc);
            let out = model.score(&mut g, phi)?;
            let scores = g.value(out);

            let idx = |ts: &[Transition]| -> Vec<usize> {
                ts.iter().map(|t| t.output_index(num_labels)).collect()
            };
            let (loss, grad) = hinge_loss(scores, &idx(&best), &idx(&legal))?;
            if loss > 0.0 {
                stats.loss += loss;
                seeds.push((out, grad));
            }

            let top = |ts: &[Transition]| -> Transition {
                *ts.iter()
                    .max_by(|a, b| {
                        let (sa, sb) = (scores[a.output_index(num_labels)], scores[b.output_index(num_labels)]);
                        sa.total_cmp(&sb).then(b.output_index(num_labels).cmp(&a.output_index(num_labels)))
                    })
                    .unwrap()
            };
            let predicted = top(&legal);
            let mut next = top(&best);
            if costs.cost(predicted) > costs.cost(next) {
                stats.errors += 1;
                if explore && rng.gen::<f64>() < self.options.explore_prob {
                    next = predicted;
                }
            }
            c.apply(next)?;
            stats.transitions += 1;
        }

        if !seeds.is_empty() {
            g.backward(&seeds, &mut self.grads);
            drop(g);
            self.adam.update(&mut self.model.params, &self.grads);
            self.grads.clear();
        }
        Ok(stats)
    }
}

/// Legal transitions at decode time. LEFT_ARC onto ROOT is only allowed for
/// the last remaining stack item, so the output has exactly one root.
pub fn decode_legal(c: &Configuration, num_labels: usize) -> Vec<Transition> {
    let mut legal = c.legal();
    if c.b0().is_some_and(|b| c.is_root(b)) && c.stack.len() > 1 {
        legal.left_arc = false;
    }
    legal
        .kinds()
        .into_iter()
        .flat_map(|k| Transition::expand(k, num_labels))
        .collect()
}

fn best_scoring(scores: &[f64], legal: &[Transition], num_labels: usize) -> Transition {
    let mut best = legal[0];
    for &t in &legal[1..] {
        if scores[t.output_index(num_labels)] > scores[best.output_index(num_labels)] {
            best = t;
        }
    }
    best
}

/// Greedy decoding of one sentence. Non-syntactic fields are copied from the
/// input; heads and labels are replaced.
pub fn parse_sentence(model: &Model, sentence: &Sentence, tb: Option<usize>) -> Result<Sentence> {
    if sentence.is_empty() {
        return Ok(sentence.clone());
    }
    let forms: Vec<&str> = sentence.tokens.iter().map(|t| t.form.as_str()).collect();
    let mut g = Graph::new(&model.params);
    let xs = model.embed_sentence(&mut g, &forms, None, tb)?;
    let enc: Encoded = model.encode_sentence(&mut g, &xs)?;
    let num_labels = model.num_labels();
    let mut c = Configuration::initial(sentence.len())?;
    let cap = Configuration::max_steps(sentence.len());
    let mut steps = 0;
    while !c.is_terminal() && steps < cap {
        let legal = decode_legal(&c, num_labels);
        if legal.is_empty() {
            break;
        }
        let phi = model.extract_features(&mut g, &c, &enc);
        let out = model.score(&mut g, phi)?;
        let t = best_scoring(g.value(out), &legal, num_labels);
        c.apply(t)?;
        steps += 1;
    }
    let fallback = if model.vocab.labels.iter().any(|l| l == FALLBACK_LABEL) || model.vocab.labels.is_empty() {
        FALLBACK_LABEL
    } else {
        model.vocab.labels[0].as_str()
    };
    Ok(arcs_to_sentence(&c, sentence, &model.vocab.labels, fallback))
}

/// Parses a corpus, optionally across threads. Output order follows input.
pub fn parse_corpus(
    model: &Model,
    sentences: &[Sentence],
    tb: Option<usize>,
    parallel: bool,
) -> Result<Vec<Sentence>> {
    if parallel {
        sentences
            .par_iter()
            .map(|s| parse_sentence(model, s, tb))
            .collect()
    } else {
        sentences.iter().map(|s| parse_sentence(model, s, tb)).collect()
    }
}
