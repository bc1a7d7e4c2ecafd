use std::ops::Range;

use crate::error::{Error, Result};
use crate::graphdata::TemporalDataset;

/// `w` consecutive input snapshots and the index of the snapshot whose
/// adjacency is the prediction target.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WindowSample {
    pub inputs: Range<usize>,
    pub target: usize,
}

impl WindowSample {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

/// All `S - w` windows in chronological order; sample `j` reads snapshots
/// `j..j+w` and targets snapshot `j+w`.
pub fn build_windows(ds: &TemporalDataset, w: usize) -> Result<Vec<WindowSample>> {
    window_ranges(ds.len(), w)
}

/// [`build_windows`] for a sequence of `s` snapshots.
pub fn window_ranges(s: usize, w: usize) -> Result<Vec<WindowSample>> {
    if w == 0 || w >= s {
        return Err(Error::Config(format!("window length {w} needs 1 <= w < {s} snapshots")));
    }
    Ok((0..s - w)
        .map(|j| WindowSample {
            inputs: j..j + w,
            target: j + w,
        })
        .collect())
}

/// Splits windows into the training prefix and the held-out last window.
pub fn split_windows(windows: &[WindowSample]) -> Result<(&[WindowSample], &WindowSample)> {
    match windows.split_last() {
        Some((last, train)) if !train.is_empty() => Ok((train, last)),
        _ => Err(Error::Config(format!(
            "need at least one training window plus the evaluation window, got {} windows",
            windows.len()
        ))),
    }
}
