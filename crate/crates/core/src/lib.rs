//! Multi-treebank transition-based dependency parsing.
//!
//! The parser is an arc-hybrid transition system with SWAP, trained with a
//! dynamic oracle over BiLSTM features built from word, character and
//! optional treebank embeddings. [`strategies`] combines several treebanks
//! by training on one, concatenating, fine-tuning a concatenated model, or
//! adding treebank embeddings; [`eval`] scores the results.

pub mod conllu;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod neural;
pub mod parser;
pub mod strategies;
pub mod synth;
pub mod transition;
pub mod util;

pub use conllu::{Dataset, Sentence, Token, TreebankRegistry};
pub use error::{Error, Result};
pub use eval::EvalResult;
pub use experiment::{ExperimentSpec, Report};
pub use neural::{Hyperparams, Model, Precision};
pub use parser::TrainOptions;
pub use strategies::{StrategyConfig, StrategyKind, StrategyRun, TreebankData};
pub use transition::{Configuration, GoldTree, Transition};
