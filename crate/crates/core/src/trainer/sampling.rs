use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::types::PairAnnotation;

/// Index sampler behind [`OversampleStream`]: with probability `target`
/// draws uniformly among inequality labels, otherwise among equality
/// labels. With one class missing it draws uniformly from the other.
#[derive(Debug, Clone)]
pub(crate) struct OversampleIndex {
    eq: Vec<usize>,
    neq: Vec<usize>,
    target: f64,
    rng: Rng,
}

impl OversampleIndex {
    pub(crate) fn new(annotations: &[PairAnnotation], rng: Rng, target: f64) -> Result<Self> {
        if annotations.is_empty() {
            return Err(Error::EmptyAnnotationSet);
        }
        if !(target > 0.0 && target < 1.0) {
            return Err(Error::Config(format!("oversample target must lie in (0, 1), got {target}")));
        }
        let (eq, neq): (Vec<usize>, Vec<usize>) =
            (0..annotations.len()).partition(|&i| annotations[i].t.is_equality());
        Ok(Self { eq, neq, target, rng })
    }

    pub(crate) fn next_index(&mut self) -> usize {
        let pool = if self.eq.is_empty() {
            &self.neq
        } else if self.neq.is_empty() || !self.rng.gen_bool(self.target) {
            &self.eq
        } else {
            &self.neq
        };
        pool[self.rng.gen_range(0..pool.len())]
    }
}

/// Endless stream of annotations in which inequality labels make up the
/// `target` fraction in the long run (or all of it, when no equality labels
/// exist).
#[derive(Debug, Clone)]
pub struct OversampleStream<'a> {
    annotations: &'a [PairAnnotation],
    index: OversampleIndex,
}

impl<'a> Iterator for OversampleStream<'a> {
    type Item = &'a PairAnnotation;

    fn next(&mut self) -> Option<Self::Item> {
        Some(&self.annotations[self.index.next_index()])
    }
}

pub fn oversample_stream(annotations: &[PairAnnotation], rng: Rng, target: f64) -> Result<OversampleStream<'_>> {
    Ok(OversampleStream {
        annotations,
        index: OversampleIndex::new(annotations, rng, target)?,
    })
}

/// Training subset for the pair-kind ablation. Intra-only keeps every intra
/// label. With `equal_budget`, the mixed set is cut to the size the
/// intra-only set would have, half intra and half cross, chosen at random.
pub fn select_training_annotations(
    annotations: &[PairAnnotation],
    intra_only: bool,
    equal_budget: bool,
    rng: &mut Rng,
) -> Vec<PairAnnotation> {
    let (intra, cross): (Vec<&PairAnnotation>, Vec<&PairAnnotation>) =
        annotations.iter().partition(|a| a.is_intra());
    if intra_only {
        return intra.into_iter().cloned().collect();
    }
    if !equal_budget {
        return annotations.to_vec();
    }
    let budget = intra.len();
    let n_cross = (budget / 2).min(cross.len());
    let n_intra = (budget - n_cross).min(intra.len());
    let mut chosen: Vec<&PairAnnotation> = pick(intra, n_intra, rng);
    chosen.extend(pick(cross, n_cross, rng));
    // keep the original file order so the result does not depend on shuffle order
    let keep: std::collections::HashSet<&str> = chosen.iter().map(|a| a.pair_id.as_str()).collect();
    annotations.iter().filter(|a| keep.contains(a.pair_id.as_str())).cloned().collect()
}

fn pick<'a>(mut pool: Vec<&'a PairAnnotation>, n: usize, rng: &mut Rng) -> Vec<&'a PairAnnotation> {
    pool.shuffle(rng);
    pool.truncate(n);
    pool
}
