//! Attachment scores and the paired randomization test.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conllu::Sentence;
use crate::error::{Error, Result};

pub const DEFAULT_ITERATIONS: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub las: f64,
    pub uas: f64,
    pub correct_labeled: usize,
    pub correct_unlabeled: usize,
    pub total: usize,
    /// `(correct_labeled, total)` per sentence.
    pub per_sentence: Vec<(usize, usize)>,
}

fn relation(deprel: Option<&str>, truncate: bool) -> Option<&str> {
    match deprel {
        Some(d) if truncate => Some(d.split(':').next().unwrap_or(d)),
        other => other,
    }
}

/// Checks positional alignment of two corpora.
pub fn check_alignment(gold: &[Sentence], system: &[Sentence]) -> Result<()> {
    if gold.len() != system.len() {
        return Err(Error::Misaligned(format!(
            "corpus: {} gold sentences, {} system sentences",
            gold.len(),
            system.len()
        )));
    }
    for (i, (g, s)) in gold.iter().zip(system).enumerate() {
        if g.len() != s.len() {
            return Err(Error::Misaligned(format!(
                "sentence {}: {} gold tokens, {} system tokens",
                i + 1,
                g.len(),
                s.len()
            )));
        }
        for (gt, st) in g.tokens.iter().zip(&s.tokens) {
            if gt.form != st.form {
                return Err(Error::Misaligned(format!(
                    "sentence {}, token {}: gold form {:?}, system form {:?}",
                    i + 1,
                    gt.id,
                    gt.form,
                    st.form
                )));
            }
        }
    }
    Ok(())
}

/// Labeled and unlabeled attachment scores over all syntactic words.
pub fn las(gold: &[Sentence], system: &[Sentence], truncate_subtypes: bool) -> Result<EvalResult> {
    check_alignment(gold, system)?;
    let mut result = EvalResult {
        las: 0.0,
        uas: 0.0,
        correct_labeled: 0,
        correct_unlabeled: 0,
        total: 0,
        per_sentence: Vec::with_capacity(gold.len()),
    };
    for (g, s) in gold.iter().zip(system) {
        let mut labeled = 0;
        for (gt, st) in g.tokens.iter().zip(&s.tokens) {
            if gt.head.is_some() && gt.head == st.head {
                result.correct_unlabeled += 1;
                let gr = relation(gt.deprel.as_deref(), truncate_subtypes);
                if gr.is_some() && gr == relation(st.deprel.as_deref(), truncate_subtypes) {
                    labeled += 1;
                }
            }
        }
        result.correct_labeled += labeled;
        result.total += g.len();
        result.per_sentence.push((labeled, g.len()));
    }
    if result.total > 0 {
        result.las = 100.0 * result.correct_labeled as f64 / result.total as f64;
        result.uas = 100.0 * result.correct_unlabeled as f64 / result.total as f64;
    }
    Ok(result)
}

/// Two-sided paired approximate randomization test on LAS.
///
/// Each iteration swaps the two systems' outputs per sentence with
/// probability 1/2. Iteration `i` draws from its own ChaCha stream, so the
/// result does not depend on the number of threads.
pub fn randomization_test(
    gold: &[Sentence],
    sys_a: &[Sentence],
    sys_b: &[Sentence],
    iterations: usize,
    seed: u64,
    truncate_subtypes: bool,
) -> Result<f64> {
    let a = las(gold, sys_a, truncate_subtypes)?;
    let b = las(gold, sys_b, truncate_subtypes)?;
    let diffs: Vec<i64> = a
        .per_sentence
        .iter()
        .zip(&b.per_sentence)
        .map(|(&(ca, _), &(cb, _))| ca as i64 - cb as i64)
        .collect();
    // Total token counts are equal for both systems, so comparing summed
    // count differences is equivalent to comparing LAS differences.
    let observed: i64 = diffs.iter().sum::<i64>().abs();
    let at_least: usize = (0..iterations)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let d: i64 = diffs
                .iter()
                .map(|&d| if rng.gen::<bool>() { -d } else { d })
                .sum();
            usize::from(d.abs() >= observed)
        })
        .sum();
    Ok((at_least + 1) as f64 / (iterations + 1) as f64)
}
