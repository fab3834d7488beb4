//! Neural scoring model: a small reverse-mode autodiff tape, parameter
//! storage, the BiLSTM feature extractor, the Adam optimizer and the binary
//! model format.

pub mod adam;
pub mod graph;
pub mod io;
pub mod model;
pub mod params;

pub use adam::Adam;
pub use graph::{Graph, NodeId};
pub use io::{load_model, model_from_bytes, model_to_bytes, save_model, Precision};
pub use model::{Encoded, Hyperparams, Model, Vocabularies};
pub use params::{Grads, ParamId, ParamSet, Tensor};

use crate::error::{Error, Result};

/// Margin hinge loss `max(0, 1 - max_{t in Z} s_t + max_{t in L \ Z} s_t)`.
///
/// `zero_cost` and `legal` hold indices into `scores`. Returns the loss and
/// its gradient with respect to `scores`; ties pick the lowest index.
pub fn hinge_loss(scores: &[f64], zero_cost: &[usize], legal: &[usize]) -> Result<(f64, Vec<f64>)> {
    let argmax = |it: &mut dyn Iterator<Item = usize>| -> Option<usize> {
        let mut best: Option<usize> = None;
        for i in it {
            match best {
                Some(b) if scores[i] < scores[b] || (scores[i] == scores[b] && i > b) => {}
                _ => best = Some(i),
            }
        }
        best
    };
    let good = argmax(&mut zero_cost.iter().copied()).ok_or(Error::EmptyZeroCost)?;
    let mut grad = vec![0.0; scores.len()];
    let bad = argmax(&mut legal.iter().copied().filter(|i| !zero_cost.contains(i)));
    let Some(bad) = bad else {
        return Ok((0.0, grad));
    };
    let loss = 1.0 - scores[good] + scores[bad];
    if loss <= 0.0 {
        return Ok((0.0, grad));
    }
    grad[good] -= 1.0;
    grad[bad] += 1.0;
    Ok((loss, grad))
}
