//! Word, character and treebank embeddings, the character and sentence
//! BiLSTMs, the configuration feature function and the MLP scorer.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::graph::{Graph, NodeId};
use super::params::{ParamId, ParamSet, Tensor};
use crate::conllu::{Sentence, TreebankRegistry};
use crate::error::{Error, Result};
use crate::transition::{Configuration, Transition};

pub const UNK: &str = "<UNK>";

/// Architecture hyperparameters.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparams {
    pub dim_word: usize,
    pub dim_char: usize,
    /// Character LSTM hidden size per direction.
    pub hidden_char: usize,
    /// Sentence LSTM hidden size per direction.
    pub hidden_word: usize,
    pub layers: usize,
    pub mlp_hidden: usize,
    pub dim_tb: usize,
    pub stack_features: usize,
    pub buffer_features: usize,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            dim_word: 100,
            dim_char: 24,
            hidden_char: 50,
            hidden_word: 125,
            layers: 2,
            mlp_hidden: 100,
            dim_tb: 12,
            stack_features: 3,
            buffer_features: 1,
        }
    }
}

impl Hyperparams {
    /// Width of a token representation `x_i`.
    pub fn token_dim(&self, with_tb: bool) -> usize {
        self.dim_word + 2 * self.hidden_char + if with_tb { self.dim_tb } else { 0 }
    }

    /// Width of a contextual vector `v_i`.
    pub fn encoded_dim(&self) -> usize {
        2 * self.hidden_word
    }

    pub fn feature_dim(&self) -> usize {
        (self.stack_features + self.buffer_features) * self.encoded_dim()
    }
}

/// Word, character and label vocabularies. Id 0 of the word and character
/// vocabularies is the unknown symbol.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabularies {
    pub words: Vec<String>,
    pub word_freq: Vec<usize>,
    pub chars: Vec<String>,
    pub labels: Vec<String>,
    #[serde(skip)]
    index: Index,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
struct Index {
    words: HashMap<String, usize>,
    chars: HashMap<char, usize>,
    labels: HashMap<String, usize>,
}

impl Vocabularies {
    /// Collects forms, characters and labels from training sentences. All
    /// lists are sorted so that the result does not depend on sentence order.
    pub fn build<'a>(sentences: impl IntoIterator<Item = &'a Sentence>) -> Self {
        let mut words: BTreeMap<&str, usize> = BTreeMap::new();
        let mut chars: BTreeMap<char, ()> = BTreeMap::new();
        let mut labels: BTreeMap<&str, ()> = BTreeMap::new();
        for s in sentences {
            for t in &s.tokens {
                *words.entry(t.form.as_str()).or_default() += 1;
                for c in t.form.chars() {
                    chars.insert(c, ());
                }
                if let Some(rel) = &t.deprel {
                    labels.insert(rel.as_str(), ());
                }
            }
        }
        let mut v = Vocabularies {
            words: std::iter::once(UNK.to_owned())
                .chain(words.keys().map(|w| w.to_string()))
                .collect(),
            word_freq: std::iter::once(0).chain(words.values().copied()).collect(),
            chars: std::iter::once(UNK.to_owned())
                .chain(chars.keys().map(|c| c.to_string()))
                .collect(),
            labels: labels.keys().map(|l| l.to_string()).collect(),
            index: Index::default(),
        };
        v.reindex();
        v
    }

    pub(crate) fn reindex(&mut self) {
        self.index = Index {
            words: self
                .words
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, w)| (w.clone(), i))
                .collect(),
            chars: self
                .chars
                .iter()
                .enumerate()
                .skip(1)
                .filter_map(|(i, c)| c.chars().next().map(|c| (c, i)))
                .collect(),
            labels: self
                .labels
                .iter()
                .enumerate()
                .map(|(i, l)| (l.clone(), i))
                .collect(),
        };
    }

    pub fn word_id(&self, form: &str) -> usize {
        self.index.words.get(form).copied().unwrap_or(0)
    }

    pub fn char_ids(&self, form: &str) -> Vec<usize> {
        form.chars()
            .map(|c| self.index.chars.get(&c).copied().unwrap_or(0))
            .collect()
    }

    pub fn label_id(&self, label: &str) -> Option<usize> {
        self.index.labels.get(label).copied()
    }

    pub fn num_labels(&self) -> usize {
        self.labels.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct LstmIds {
    pub w: ParamId,
    pub b: ParamId,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct ParamIds {
    pub word_emb: ParamId,
    pub char_emb: ParamId,
    pub tb_emb: Option<ParamId>,
    pub char_fw: LstmIds,
    pub char_bw: LstmIds,
    /// (forward, backward) per layer.
    pub layers: Vec<(LstmIds, LstmIds)>,
    pub root: ParamId,
    pub pad: ParamId,
    pub mlp_w1: ParamId,
    pub mlp_b1: ParamId,
    pub mlp_w2: ParamId,
    pub mlp_b2: ParamId,
}

impl ParamIds {
    pub(crate) fn resolve(params: &ParamSet, layers: usize) -> Result<Self> {
        let get = |name: &str| {
            params
                .id(name)
                .ok_or_else(|| Error::ModelFormat(format!("missing tensor {name}")))
        };
        let lstm = |prefix: &str| -> Result<LstmIds> {
            Ok(LstmIds {
                w: get(&format!("{prefix}.w"))?,
                b: get(&format!("{prefix}.b"))?,
            })
        };
        Ok(ParamIds {
            word_emb: get("word_emb")?,
            char_emb: get("char_emb")?,
            tb_emb: params.id("tb_emb"),
            char_fw: lstm("char_fw")?,
            char_bw: lstm("char_bw")?,
            layers: (0..layers)
                .map(|l| Ok((lstm(&format!("lstm{l}_fw"))?, lstm(&format!("lstm{l}_bw"))?)))
                .collect::<Result<_>>()?,
            root: get("root")?,
            pad: get("pad")?,
            mlp_w1: get("mlp.w1")?,
            mlp_b1: get("mlp.b1")?,
            mlp_w2: get("mlp.w2")?,
            mlp_b2: get("mlp.b2")?,
        })
    }
}

/// All trainable parameters plus everything needed to interpret them.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub hyper: Hyperparams,
    pub vocab: Vocabularies,
    pub registry: TreebankRegistry,
    pub params: ParamSet,
    pub(crate) ids: ParamIds,
}

/// Contextual vectors of one sentence plus the root and padding vectors.
#[derive(Clone, Debug)]
pub struct Encoded {
    pub words: Vec<NodeId>,
    pub root: NodeId,
    pub pad: NodeId,
}

impl Encoded {
    fn node(&self, config: &Configuration, index: usize) -> NodeId {
        if config.is_root(index) {
            self.root
        } else {
            self.words[index - 1]
        }
    }
}

fn uniform(rng: &mut impl Rng, shape: &[usize], bound: f64) -> Tensor {
    Tensor::from_fn(shape, |_| rng.gen_range(-bound..bound))
}

fn xavier(rng: &mut impl Rng, rows: usize, cols: usize) -> Tensor {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    uniform(rng, &[rows, cols], bound)
}

fn add_lstm(params: &mut ParamSet, rng: &mut impl Rng, prefix: &str, input: usize, hidden: usize) -> LstmIds {
    let w = params.add(&format!("{prefix}.w"), xavier(rng, 4 * hidden, input + hidden));
    let mut bias = Tensor::zeros(&[4 * hidden]);
    bias.values[hidden..2 * hidden].iter_mut().for_each(|v| *v = 1.0);
    let b = params.add(&format!("{prefix}.b"), bias);
    LstmIds { w, b }
}

const EMBEDDING_INIT: f64 = 0.1;

impl Model {
    /// Randomly initialized model. Embeddings are uniform in (-0.1, 0.1),
    /// weight matrices Xavier-uniform, biases zero except the LSTM forget
    /// gates, which start at one. With `with_tb`, a treebank embedding row is
    /// allocated for every registry entry.
    pub fn new(
        hyper: Hyperparams,
        vocab: Vocabularies,
        registry: TreebankRegistry,
        with_tb: bool,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if with_tb && registry.is_empty() {
            return Err(Error::Config("treebank embeddings need a non-empty registry".into()));
        }
        if hyper.layers == 0 {
            return Err(Error::Config("at least one BiLSTM layer is required".into()));
        }
        let mut params = ParamSet::new();
        let h = &hyper;
        params.add("word_emb", uniform(rng, &[vocab.words.len(), h.dim_word], EMBEDDING_INIT));
        params.add("char_emb", uniform(rng, &[vocab.chars.len(), h.dim_char], EMBEDDING_INIT));
        if with_tb {
            params.add("tb_emb", uniform(rng, &[registry.len(), h.dim_tb], EMBEDDING_INIT));
        }
        add_lstm(&mut params, rng, "char_fw", h.dim_char, h.hidden_char);
        add_lstm(&mut params, rng, "char_bw", h.dim_char, h.hidden_char);
        let mut input = h.token_dim(with_tb);
        for l in 0..h.layers {
            add_lstm(&mut params, rng, &format!("lstm{l}_fw"), input, h.hidden_word);
            add_lstm(&mut params, rng, &format!("lstm{l}_bw"), input, h.hidden_word);
            input = h.encoded_dim();
        }
        params.add("root", uniform(rng, &[h.encoded_dim()], EMBEDDING_INIT));
        params.add("pad", uniform(rng, &[h.encoded_dim()], EMBEDDING_INIT));
        let outputs = Transition::output_size(vocab.num_labels());
        params.add("mlp.w1", xavier(rng, h.mlp_hidden, h.feature_dim()));
        params.add("mlp.b1", Tensor::zeros(&[h.mlp_hidden]));
        params.add("mlp.w2", xavier(rng, outputs, h.mlp_hidden));
        params.add("mlp.b2", Tensor::zeros(&[outputs]));

        let ids = ParamIds::resolve(&params, hyper.layers)?;
        let model = Model {
            hyper,
            vocab,
            registry,
            params,
            ids,
        };
        model.check_dimensions()?;
        Ok(model)
    }

    pub(crate) fn from_parts(
        hyper: Hyperparams,
        vocab: Vocabularies,
        registry: TreebankRegistry,
        params: ParamSet,
    ) -> Result<Self> {
        let ids = ParamIds::resolve(&params, hyper.layers)?;
        let model = Model {
            hyper,
            vocab,
            registry,
            params,
            ids,
        };
        model.check_dimensions()?;
        Ok(model)
    }

    fn check_dimensions(&self) -> Result<()> {
        let h = &self.hyper;
        let expect = |id: ParamId, shape: &[usize]| -> Result<()> {
            let t = self.params.get(id);
            if t.shape != shape {
                return Err(Error::ModelFormat(format!(
                    "tensor {} has shape {:?}, expected {:?}",
                    self.params.name(id),
                    t.shape,
                    shape
                )));
            }
            Ok(())
        };
        expect(self.ids.word_emb, &[self.vocab.words.len(), h.dim_word])?;
        expect(self.ids.char_emb, &[self.vocab.chars.len(), h.dim_char])?;
        if let Some(tb) = self.ids.tb_emb {
            expect(tb, &[self.registry.len(), h.dim_tb])?;
        }
        let first = self.params.get(self.ids.layers[0].0.w).shape[1] - h.hidden_word;
        if first != h.token_dim(self.has_tb()) {
            return Err(Error::ModelFormat(format!(
                "token representation has width {first}, expected {}",
                h.token_dim(self.has_tb())
            )));
        }
        expect(self.ids.mlp_w1, &[h.mlp_hidden, h.feature_dim()])?;
        expect(
            self.ids.mlp_w2,
            &[Transition::output_size(self.vocab.num_labels()), h.mlp_hidden],
        )?;
        Ok(())
    }

    pub fn has_tb(&self) -> bool {
        self.ids.tb_emb.is_some()
    }

    pub fn num_labels(&self) -> usize {
        self.vocab.num_labels()
    }

    pub fn num_outputs(&self) -> usize {
        Transition::output_size(self.num_labels())
    }

    pub fn tb_embedding(&self) -> Option<&Tensor> {
        self.ids.tb_emb.map(|id| self.params.get(id))
    }

    fn check_tb(&self, tb: Option<usize>) -> Result<()> {
        match (self.ids.tb_emb, tb) {
            (Some(_), None) => Err(Error::TreebankRequired),
            (Some(_), Some(id)) if id >= self.registry.len() => Err(Error::TreebankOutOfRange {
                id,
                count: self.registry.len(),
            }),
            (None, Some(_)) => Err(Error::Config(
                "treebank id given to a model without treebank embeddings".into(),
            )),
            _ => Ok(()),
        }
    }

    fn run_lstm(
        &self,
        g: &mut Graph<'_>,
        ids: LstmIds,
        inputs: impl Iterator<Item = NodeId>,
        hidden: usize,
    ) -> Vec<NodeId> {
        let zero = g.input(vec![0.0; hidden]);
        let mut h = zero;
        let mut c: Option<NodeId> = None;
        let mut out = Vec::new();
        for x in inputs {
            let joined = g.concat(&[x, h]);
            let gates = g.affine(ids.w, ids.b, joined);
            let cell = g.lstm_cell(gates, c);
            h = g.slice(cell, 0, hidden);
            c = Some(g.slice(cell, hidden, hidden));
            out.push(h);
        }
        out
    }

    /// Concatenated final states of the forward and backward character LSTMs.
    fn char_vector(&self, g: &mut Graph<'_>, chars: &[usize]) -> NodeId {
        let embedded: Vec<NodeId> = chars.iter().map(|&c| g.lookup(self.ids.char_emb, c)).collect();
        let hc = self.hyper.hidden_char;
        let fw = self.run_lstm(g, self.ids.char_fw, embedded.iter().copied(), hc);
        let bw = self.run_lstm(g, self.ids.char_bw, embedded.iter().rev().copied(), hc);
        g.concat(&[*fw.last().unwrap(), *bw.last().unwrap()])
    }

    /// `x = e(w) ∘ BiLSTM(chars) [∘ tb]` from vocabulary ids.
    pub fn embed_ids(
        &self,
        g: &mut Graph<'_>,
        word: usize,
        chars: &[usize],
        tb: Option<usize>,
    ) -> Result<NodeId> {
        if chars.is_empty() {
            return Err(Error::EmptyWord);
        }
        self.check_tb(tb)?;
        let w = g.lookup(self.ids.word_emb, word);
        let ch = self.char_vector(g, chars);
        let node = match (self.ids.tb_emb, tb) {
            (Some(table), Some(id)) => {
                let t = g.lookup(table, id);
                g.concat(&[w, ch, t])
            }
            _ => g.concat(&[w, ch]),
        };
        Ok(node)
    }

    /// Token representation of a surface form.
    pub fn embed_token(&self, g: &mut Graph<'_>, form: &str, tb: Option<usize>) -> Result<NodeId> {
        self.embed_ids(g, self.vocab.word_id(form), &self.vocab.char_ids(form), tb)
    }

    /// Token representations of a whole sentence. `word_ids` overrides the
    /// vocabulary lookup (used for word dropout); character vectors are
    /// shared between repeated forms.
    pub fn embed_sentence(
        &self,
        g: &mut Graph<'_>,
        forms: &[&str],
        word_ids: Option<&[usize]>,
        tb: Option<usize>,
    ) -> Result<Vec<NodeId>> {
        self.check_tb(tb)?;
        let mut char_cache: HashMap<&str, NodeId> = HashMap::new();
        let tb_node = match (self.ids.tb_emb, tb) {
            (Some(table), Some(id)) => Some(g.lookup(table, id)),
            _ => None,
        };
        let mut out = Vec::with_capacity(forms.len());
        for (i, form) in forms.iter().enumerate() {
            if form.is_empty() {
                return Err(Error::EmptyWord);
            }
            let word = word_ids.map_or_else(|| self.vocab.word_id(form), |ids| ids[i]);
            let w = g.lookup(self.ids.word_emb, word);
            let ch = match char_cache.get(form) {
                Some(&n) => n,
                None => {
                    let n = self.char_vector(g, &self.vocab.char_ids(form));
                    char_cache.insert(form, n);
                    n
                }
            };
            let x = match tb_node {
                Some(t) => g.concat(&[w, ch, t]),
                None => g.concat(&[w, ch]),
            };
            out.push(x);
        }
        Ok(out)
    }

    /// Stacked BiLSTM over token representations; returns one `v_i` per token.
    pub fn encode_sentence(&self, g: &mut Graph<'_>, xs: &[NodeId]) -> Result<Encoded> {
        if xs.is_empty() {
            return Err(Error::EmptySentence);
        }
        let hw = self.hyper.hidden_word;
        let mut layer: Vec<NodeId> = xs.to_vec();
        for &(fw_ids, bw_ids) in &self.ids.layers {
            let fw = self.run_lstm(g, fw_ids, layer.iter().copied(), hw);
            let mut bw = self.run_lstm(g, bw_ids, layer.iter().rev().copied(), hw);
            bw.reverse();
            layer = fw
                .into_iter()
                .zip(bw)
                .map(|(f, b)| g.concat(&[f, b]))
                .collect();
        }
        let root = g.param(self.ids.root);
        let pad = g.param(self.ids.pad);
        Ok(Encoded {
            words: layer,
            root,
            pad,
        })
    }

    /// φ(c): vectors of the top stack items (top first) and the first
    /// buffer items, with the padding vector for missing slots.
    pub fn extract_features(&self, g: &mut Graph<'_>, config: &Configuration, enc: &Encoded) -> NodeId {
        let mut parts = Vec::with_capacity(self.hyper.stack_features + self.hyper.buffer_features);
        for k in 0..self.hyper.stack_features {
            let slot = config
                .stack
                .len()
                .checked_sub(k + 1)
                .map(|i| enc.node(config, config.stack[i]));
            parts.push(slot.unwrap_or(enc.pad));
        }
        for k in 0..self.hyper.buffer_features {
            let slot = config.buffer.get(k).map(|&b| enc.node(config, b));
            parts.push(slot.unwrap_or(enc.pad));
        }
        g.concat(&parts)
    }

    /// Raw scores over SHIFT, SWAP, LEFT_ARC × labels, RIGHT_ARC × labels.
    pub fn score(&self, g: &mut Graph<'_>, phi: NodeId) -> Result<NodeId> {
        let width = g.value(phi).len();
        if width != self.hyper.feature_dim() {
            return Err(Error::ShapeMismatch {
                expected: self.hyper.feature_dim(),
                got: width,
            });
        }
        let hidden = g.affine(self.ids.mlp_w1, self.ids.mlp_b1, phi);
        let act = g.tanh(hidden);
        Ok(g.affine(self.ids.mlp_w2, self.ids.mlp_b2, act))
    }

    /// Scores for a feature vector given as plain numbers.
    pub fn score_vector(&self, phi: &[f64]) -> Result<Vec<f64>> {
        let mut g = Graph::new(&self.params);
        let x = g.input(phi.to_vec());
        let out = self.score(&mut g, x)?;
        Ok(g.value(out).to_vec())
    }
}
