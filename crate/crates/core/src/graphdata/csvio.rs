use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graphdata::preprocess::NUM_FEATURES;
use crate::graphdata::{CountryIndex, TemporalDataset};
use crate::numerics::Mat;

pub const EDGE_HEADER: [&str; 4] = ["year", "exporter_iso3", "importer_iso3", "tonnes"];
pub const FEATURE_HEADER: [&str; 6] = [
    "year",
    "iso3",
    "gdp",
    "agri_employment_ratio",
    "population",
    "production",
];

/// Per-year adjacency and trade matrices read from an edge list.
#[derive(Clone, Debug)]
pub struct EdgeTable {
    pub index: CountryIndex,
    pub years: Vec<i32>,
    pub a: Vec<Mat>,
    pub t: Vec<Mat>,
    pub self_loops_dropped: usize,
}

/// Raw attribute observations, `None` where the cell was empty or the
/// country never appeared.
#[derive(Clone, Debug)]
pub struct FeatureTable {
    pub n: usize,
    pub years: Vec<i32>,
    /// Row-major by year then country: `values[y * n + c]`.
    pub values: Vec<[Option<f64>; NUM_FEATURES]>,
    pub unknown_codes: Vec<String>,
}

impl FeatureTable {
    pub fn get(&self, year_idx: usize, country: usize) -> &[Option<f64>; NUM_FEATURES] {
        &self.values[year_idx * self.n + country]
    }
}

fn open(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn parse_err(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn read_records(path: &Path, header: &[&str]) -> Result<Vec<(u64, csv::StringRecord)>> {
    let mut reader = open(path)?;
    let mut out = Vec::new();
    let mut seen_header = false;
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if !seen_header {
            let got: Vec<&str> = rec.iter().collect();
            if got != header {
                return Err(parse_err(
                    path,
                    line,
                    format!("expected header `{}`, found `{}`", header.join(","), got.join(",")),
                ));
            }
            seen_header = true;
            continue;
        }
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if rec.len() != header.len() {
            return Err(parse_err(
                path,
                line,
                format!("expected {} columns, found {}", header.len(), rec.len()),
            ));
        }
        out.push((line, rec));
    }
    if !seen_header {
        return Err(parse_err(path, 1, "empty file"));
    }
    Ok(out)
}

fn parse_year(path: &Path, line: u64, s: &str) -> Result<i32> {
    s.parse::<i32>()
        .map_err(|_| parse_err(path, line, format!("bad year `{s}`")))
}

/// Reads `year,exporter_iso3,importer_iso3,tonnes`.
///
/// Duplicate `(year, exporter, importer)` rows are summed, self-loops are
/// dropped and counted, and rows with zero tonnes register their countries
/// without creating an edge. New codes extend `index` in sorted order.
pub fn load_edges(path: &Path, index: Option<CountryIndex>) -> Result<EdgeTable> {
    let records = read_records(path, &EDGE_HEADER)?;
    let mut rows = Vec::with_capacity(records.len());
    let mut codes = BTreeSet::new();
    for (line, rec) in &records {
        let year = parse_year(path, *line, &rec[0])?;
        let tonnes: f64 = rec[3]
            .parse()
            .map_err(|_| parse_err(path, *line, format!("bad tonnes `{}`", &rec[3])))?;
        if !tonnes.is_finite() || tonnes < 0.0 {
            return Err(parse_err(
                path,
                *line,
                format!("tonnes must be finite and >= 0, got {tonnes}"),
            ));
        }
        for code in [&rec[1], &rec[2]] {
            if code.is_empty() {
                return Err(parse_err(path, *line, "empty country code"));
            }
            codes.insert(code.to_string());
        }
        rows.push((year, rec[1].to_string(), rec[2].to_string(), tonnes));
    }
    if rows.is_empty() {
        return Err(Error::Data(format!("{}: no edge rows", path.display())));
    }

    let mut index = index.unwrap_or_default();
    for c in codes {
        index.insert(c);
    }
    let n = index.len();

    let mut per_year: BTreeMap<i32, Mat> = BTreeMap::new();
    let mut self_loops = 0;
    for (year, exp, imp, tonnes) in rows {
        let t = per_year.entry(year).or_insert_with(|| Mat::zeros(n, n));
        if exp == imp {
            self_loops += 1;
            continue;
        }
        let (i, j) = (index.get(&exp).unwrap(), index.get(&imp).unwrap());
        t[(i, j)] += tonnes;
    }
    if self_loops > 0 {
        log::warn!("{}: dropped {self_loops} self-loop rows", path.display());
    }

    let first = *per_year.keys().next().unwrap();
    let last = *per_year.keys().next_back().unwrap();
    let years: Vec<i32> = (first..=last).collect();
    if let Some(y) = years.iter().find(|y| !per_year.contains_key(y)) {
        return Err(Error::Data(format!("{}: no rows for year {y}", path.display())));
    }
    let t: Vec<Mat> = per_year.into_values().collect();
    let a = t.iter().map(|t| t.map(|v| if v > 0.0 { 1.0 } else { 0.0 })).collect();
    Ok(EdgeTable {
        index,
        years,
        a,
        t,
        self_loops_dropped: self_loops,
    })
}

/// Reads `year,iso3,gdp,agri_employment_ratio,population,production` for the
/// countries of `index` and the given `years`. Codes outside the index are
/// listed in `unknown_codes`; rows for other years are ignored.
pub fn load_features(path: &Path, index: &CountryIndex, years: &[i32]) -> Result<FeatureTable> {
    let records = read_records(path, &FEATURE_HEADER)?;
    let n = index.len();
    let mut values = vec![[None; NUM_FEATURES]; n * years.len()];
    let mut unknown = Vec::new();
    for (line, rec) in &records {
        let year = parse_year(path, *line, &rec[0])?;
        let mut cells = [None; NUM_FEATURES];
        for (k, cell) in cells.iter_mut().enumerate() {
            let s = &rec[2 + k];
            if s.is_empty() {
                continue;
            }
            let v: f64 = s
                .parse()
                .map_err(|_| parse_err(path, *line, format!("bad {} value `{s}`", FEATURE_HEADER[2 + k])))?;
            if !v.is_finite() {
                return Err(parse_err(path, *line, format!("non-finite {}", FEATURE_HEADER[2 + k])));
            }
            *cell = Some(v);
        }
        let Some(c) = index.get(&rec[1]) else {
            unknown.push(rec[1].to_string());
            continue;
        };
        let Some(y) = years.iter().position(|&yy| yy == year) else {
            continue;
        };
        let slot = &mut values[y * n + c];
        for (dst, src) in slot.iter_mut().zip(cells) {
            if src.is_some() {
                *dst = src;
            }
        }
    }
    if !unknown.is_empty() {
        log::warn!("{}: skipped {} rows with unknown codes", path.display(), unknown.len());
    }
    Ok(FeatureTable {
        n,
        years: years.to_vec(),
        values,
        unknown_codes: unknown,
    })
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e))
}

/// Writes every present edge of every snapshot.
pub fn write_edges(ds: &TemporalDataset, path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(EDGE_HEADER).map_err(|e| csv_err(path, e))?;
    for s in &ds.snapshots {
        let n = s.n();
        for i in 0..n {
            for j in 0..n {
                if s.a[(i, j)] == 1.0 {
                    w.write_record([
                        s.year.to_string(),
                        ds.index.code(i).to_string(),
                        ds.index.code(j).to_string(),
                        s.t[(i, j)].to_string(),
                    ])
                    .map_err(|e| csv_err(path, e))?;
                }
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes the (already preprocessed) feature rows of every snapshot.
pub fn write_features(ds: &TemporalDataset, path: &Path) -> Result<()> {
    if ds.num_features() != NUM_FEATURES {
        return Err(Error::Data(format!(
            "feature export needs {NUM_FEATURES} columns, dataset has {}",
            ds.num_features()
        )));
    }
    let mut w = writer(path)?;
    w.write_record(FEATURE_HEADER).map_err(|e| csv_err(path, e))?;
    for s in &ds.snapshots {
        for c in 0..s.n() {
            let mut rec = vec![s.year.to_string(), ds.index.code(c).to_string()];
            rec.extend(s.x.row(c).iter().map(|v| v.to_string()));
            w.write_record(&rec).map_err(|e| csv_err(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}
