//! Yearly trade snapshots: CSV ingestion, preprocessing, sliding windows and
//! a synthetic generator.

mod csvio;
mod preprocess;
mod synth;
mod window;

use std::collections::HashMap;
use std::path::Path;

pub use csvio::{load_edges, load_features, write_edges, write_features, EdgeTable, FeatureTable};
pub use preprocess::{interpolate_missing, normalize_per_year, FilledFeatures, NUM_FEATURES};
pub use synth::{edge_persistence, synth_generate, SynthConfig};
pub use window::{build_windows, split_windows, window_ranges, WindowSample};

use crate::error::{Error, Result};
use crate::numerics::Mat;

/// Ordered ISO-3166 alpha-3 codes with a reverse lookup.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CountryIndex {
    codes: Vec<String>,
    lookup: HashMap<String, usize>,
}

impl CountryIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_codes<I, S>(codes: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut idx = Self::new();
        for c in codes {
            let c = c.into();
            if idx.lookup.contains_key(&c) {
                return Err(Error::Data(format!("duplicate country code {c}")));
            }
            idx.insert(c);
        }
        Ok(idx)
    }

    /// Index of `code`, appending it if unseen.
    pub fn insert(&mut self, code: String) -> usize {
        if let Some(&i) = self.lookup.get(&code) {
            return i;
        }
        self.codes.push(code.clone());
        self.lookup.insert(code, self.codes.len() - 1);
        self.codes.len() - 1
    }

    pub fn get(&self, code: &str) -> Option<usize> {
        self.lookup.get(code).copied()
    }

    pub fn code(&self, i: usize) -> &str {
        &self.codes[i]
    }

    pub fn codes(&self) -> &[String] {
        &self.codes
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }
}

/// One year of the network.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphSnapshot {
    pub year: i32,
    /// `a[(i, j)] = 1` iff country i exported to country j.
    pub a: Mat,
    /// Trade volume on each present edge, zero elsewhere.
    pub t: Mat,
    /// Preprocessed node features, one row per country.
    pub x: Mat,
}

impl GraphSnapshot {
    pub fn n(&self) -> usize {
        self.a.rows()
    }

    pub fn num_edges(&self) -> usize {
        self.a.as_slice().iter().filter(|&&v| v != 0.0).count()
    }

    /// Checks the adjacency/weight/feature invariants.
    pub fn validate(&self) -> Result<()> {
        let n = self.a.rows();
        if self.a.shape() != (n, n) || self.t.shape() != (n, n) || self.x.rows() != n {
            return Err(Error::Data(format!(
                "year {}: inconsistent shapes A{:?} T{:?} X{:?}",
                self.year,
                self.a.shape(),
                self.t.shape(),
                self.x.shape()
            )));
        }
        for i in 0..n {
            if self.a[(i, i)] != 0.0 {
                return Err(Error::Data(format!("year {}: self-loop at node {i}", self.year)));
            }
            for j in 0..n {
                let a = self.a[(i, j)];
                let t = self.t[(i, j)];
                if a != 0.0 && a != 1.0 {
                    return Err(Error::Data(format!("year {}: non-binary A[{i},{j}]", self.year)));
                }
                if !(t >= 0.0 && t.is_finite()) || ((t > 0.0) != (a == 1.0)) {
                    return Err(Error::Data(format!(
                        "year {}: T[{i},{j}]={t} inconsistent with A={a}",
                        self.year
                    )));
                }
            }
        }
        if !self.x.is_finite() {
            return Err(Error::Data(format!("year {}: non-finite features", self.year)));
        }
        Ok(())
    }
}

/// Consecutive yearly snapshots over a fixed country universe.
#[derive(Clone, Debug, PartialEq)]
pub struct TemporalDataset {
    pub index: CountryIndex,
    pub snapshots: Vec<GraphSnapshot>,
}

/// Non-fatal findings from [`TemporalDataset::from_csv`].
#[derive(Clone, Debug, Default)]
pub struct IngestReport {
    pub self_loops_dropped: usize,
    pub unknown_feature_codes: Vec<String>,
    /// `(country code, attribute index)` series with no observation at all.
    pub unobserved_series: Vec<(String, usize)>,
}

impl TemporalDataset {
    pub fn new(index: CountryIndex, snapshots: Vec<GraphSnapshot>) -> Result<Self> {
        let ds = Self { index, snapshots };
        ds.validate()?;
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn n(&self) -> usize {
        self.index.len()
    }

    pub fn num_features(&self) -> usize {
        self.snapshots.first().map_or(0, |s| s.x.cols())
    }

    pub fn years(&self) -> Vec<i32> {
        self.snapshots.iter().map(|s| s.year).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.index.len();
        let f = self.num_features();
        for (k, s) in self.snapshots.iter().enumerate() {
            s.validate()?;
            if s.n() != n || s.x.cols() != f {
                return Err(Error::Data(format!(
                    "year {}: expected {n} nodes and {f} features",
                    s.year
                )));
            }
            if k > 0 && s.year != self.snapshots[k - 1].year + 1 {
                return Err(Error::Data(format!(
                    "years not consecutive: {} follows {}",
                    s.year,
                    self.snapshots[k - 1].year
                )));
            }
        }
        Ok(())
    }

    /// Loads and preprocesses the two CSV files, deriving the country universe
    /// from the edge list.
    pub fn from_csv(edges: &Path, features: &Path) -> Result<(Self, IngestReport)> {
        Self::from_csv_with_index(edges, features, None)
    }

    /// As [`Self::from_csv`], seeding the country universe with `index`.
    pub fn from_csv_with_index(
        edges: &Path,
        features: &Path,
        index: Option<CountryIndex>,
    ) -> Result<(Self, IngestReport)> {
        let table = load_edges(edges, index)?;
        let raw = load_features(features, &table.index, &table.years)?;
        let filled = interpolate_missing(&raw);
        let xs = normalize_per_year(&filled);
        let mut report = IngestReport {
            self_loops_dropped: table.self_loops_dropped,
            unknown_feature_codes: raw.unknown_codes.clone(),
            unobserved_series: filled
                .unobserved
                .iter()
                .map(|&(c, k)| (table.index.code(c).to_string(), k))
                .collect(),
        };
        report.unknown_feature_codes.sort();
        report.unknown_feature_codes.dedup();
        let snapshots = table
            .years
            .iter()
            .zip(table.a)
            .zip(table.t)
            .zip(xs)
            .map(|(((&year, a), t), x)| GraphSnapshot { year, a, t, x })
            .collect();
        let ds = Self::new(table.index, snapshots)?;
        Ok((ds, report))
    }

    /// Writes `edges.csv` and `features.csv` into `dir`.
    pub fn write_csv(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_edges(self, &dir.join("edges.csv"))?;
        write_features(self, &dir.join("features.csv"))
    }
}
