//! Ranking metrics over a balanced sample of upper-triangle pairs.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::numerics::{Mat, Rng};

/// Fraction of (positive, negative) pairs ranked correctly, ties counted 0.5.
///
/// Runs in `O((P + N) log(P + N))` by sorting and grouping equal scores.
pub fn auc_score(pos: &[f64], neg: &[f64]) -> Result<f64> {
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::Evaluation(format!(
            "AUC needs positives and negatives, got {} and {}",
            pos.len(),
            neg.len()
        )));
    }
    let mut all: Vec<(f64, bool)> = pos
        .iter()
        .map(|&s| (s, true))
        .chain(neg.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut wins = 0.0;
    let mut neg_below = 0usize;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        let (mut p, mut n) = (0usize, 0usize);
        while j < all.len() && all[j].0 == all[i].0 {
            if all[j].1 {
                p += 1;
            } else {
                n += 1;
            }
            j += 1;
        }
        wins += p as f64 * (neg_below as f64 + 0.5 * n as f64);
        neg_below += n;
        i = j;
    }
    Ok(wins / (pos.len() as f64 * neg.len() as f64))
}

/// Mean of precision@k over the ranks `k` of the positives, ranking by
/// descending score and breaking score ties by ascending `keys`.
pub fn average_precision(scores: &[f64], labels: &[bool], keys: &[usize]) -> Result<f64> {
    if scores.len() != labels.len() || scores.len() != keys.len() {
        return Err(Error::Evaluation("scores, labels and keys differ in length".into()));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 {
        return Err(Error::Evaluation("AP needs at least one positive".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| match scores[b].total_cmp(&scores[a]) {
        Ordering::Equal => keys[a].cmp(&keys[b]),
        o => o,
    });
    let mut hits = 0usize;
    let mut total = 0.0;
    for (rank, &idx) in order.iter().enumerate() {
        if labels[idx] {
            hits += 1;
            total += hits as f64 / (rank + 1) as f64;
        }
    }
    Ok(total / positives as f64)
}

/// A fixed evaluation set: every upper-triangle edge plus an equal number of
/// sampled upper-triangle non-edges.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalPairs {
    n: usize,
    pos: Vec<(usize, usize)>,
    neg: Vec<(usize, usize)>,
}

impl EvalPairs {
    pub fn sample(a_sym: &Mat, rng: &mut Rng) -> Result<Self> {
        let n = a_sym.rows();
        let mut pos = Vec::new();
        let mut zeros = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if a_sym[(i, j)] != 0.0 {
                    pos.push((i, j));
                } else {
                    zeros.push((i, j));
                }
            }
        }
        if pos.is_empty() {
            return Err(Error::Evaluation("target has no edges in the upper triangle".into()));
        }
        if zeros.len() < pos.len() {
            return Err(Error::Evaluation(format!(
                "{} positives but only {} non-edges to sample from",
                pos.len(),
                zeros.len()
            )));
        }
        let mut picked = rng.sample_indices(zeros.len(), pos.len());
        picked.sort_unstable();
        let neg = picked.into_iter().map(|k| zeros[k]).collect();
        Ok(Self { n, pos, neg })
    }

    pub fn positives(&self) -> &[(usize, usize)] {
        &self.pos
    }

    pub fn negatives(&self) -> &[(usize, usize)] {
        &self.neg
    }

    /// `(auc, ap)` of `scores` on this pair set.
    pub fn score(&self, scores: &Mat) -> Result<(f64, f64)> {
        if scores.shape() != (self.n, self.n) {
            return Err(Error::Dimension {
                op: "evaluate",
                lhs: scores.shape(),
                rhs: (self.n, self.n),
            });
        }
        let pick = |pairs: &[(usize, usize)]| -> Vec<f64> { pairs.iter().map(|&(i, j)| scores[(i, j)]).collect() };
        let (ps, ns) = (pick(&self.pos), pick(&self.neg));
        let auc = auc_score(&ps, &ns)?;
        let labels: Vec<bool> = self
            .pos
            .iter()
            .map(|_| true)
            .chain(self.neg.iter().map(|_| false))
            .collect();
        let keys: Vec<usize> = self.pos.iter().chain(&self.neg).map(|&(i, j)| i * self.n + j).collect();
        let all: Vec<f64> = ps.into_iter().chain(ns).collect();
        let ap = average_precision(&all, &labels, &keys)?;
        Ok((auc, ap))
    }
}

/// Samples a fresh evaluation set and scores `logits` on it.
pub fn evaluate(logits: &Mat, a_sym: &Mat, rng: &mut Rng) -> Result<(f64, f64)> {
    EvalPairs::sample(a_sym, rng)?.score(logits)
}
