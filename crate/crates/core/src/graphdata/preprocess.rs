use crate::graphdata::csvio::FeatureTable;
use crate::numerics::Mat;

/// GDP, agricultural employment ratio, population, grain production.
pub const NUM_FEATURES: usize = 4;

/// Feature table with every gap filled.
#[derive(Clone, Debug)]
pub struct FilledFeatures {
    pub n: usize,
    pub years: Vec<i32>,
    /// `values[y * n + c]`.
    pub values: Vec<[f64; NUM_FEATURES]>,
    /// `(country, attribute)` series that had no observation and were zero-filled.
    pub unobserved: Vec<(usize, usize)>,
}

/// Fills each `(country, attribute)` series over time: interior gaps by
/// linear interpolation between the nearest observed years, leading and
/// trailing gaps by the nearest observed value, and fully unobserved series
/// with zeros (reported in `unobserved`).
pub fn interpolate_missing(table: &FeatureTable) -> FilledFeatures {
    let (n, ny) = (table.n, table.years.len());
    let mut values = vec![[0.0; NUM_FEATURES]; n * ny];
    let mut unobserved = Vec::new();
    for c in 0..n {
        for k in 0..NUM_FEATURES {
            let observed: Vec<(usize, f64)> = (0..ny).filter_map(|y| table.get(y, c)[k].map(|v| (y, v))).collect();
            if observed.is_empty() {
                unobserved.push((c, k));
                continue;
            }
            for (y, row) in values.iter_mut().skip(c).step_by(n).enumerate() {
                row[k] = fill_at(&observed, y, &table.years);
            }
        }
    }
    FilledFeatures {
        n,
        years: table.years.clone(),
        values,
        unobserved,
    }
}

fn fill_at(observed: &[(usize, f64)], y: usize, years: &[i32]) -> f64 {
    let after = observed.partition_point(|&(oy, _)| oy < y);
    match (after.checked_sub(1).map(|i| observed[i]), observed.get(after)) {
        (_, Some(&(oy, v))) if oy == y => v,
        (Some((y0, v0)), Some(&(y1, v1))) => {
            let (x0, x1, x) = (years[y0] as f64, years[y1] as f64, years[y] as f64);
            v0 + (v1 - v0) * (x - x0) / (x1 - x0)
        }
        (Some((_, v0)), None) => v0,
        (None, Some(&(_, v1))) => v1,
        (None, None) => unreachable!("series has at least one observation"),
    }
}

/// Per-year z-scores across countries (population standard deviation);
/// an attribute with zero variance in a year becomes all zeros.
pub fn normalize_per_year(filled: &FilledFeatures) -> Vec<Mat> {
    let n = filled.n;
    (0..filled.years.len())
        .map(|y| {
            let mut x = Mat::zeros(n, NUM_FEATURES);
            for k in 0..NUM_FEATURES {
                let col: Vec<f64> = (0..n).map(|c| filled.values[y * n + c][k]).collect();
                let z = zscore(&col);
                for (c, v) in z.into_iter().enumerate() {
                    x[(c, k)] = v;
                }
            }
            x
        })
        .collect()
}

pub(crate) fn zscore(col: &[f64]) -> Vec<f64> {
    let n = col.len() as f64;
    if col.is_empty() {
        return Vec::new();
    }
    let mean = col.iter().sum::<f64>() / n;
    let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let sd = var.sqrt();
    // Relative threshold so a constant column with rounding noise still maps to zeros.
    if sd <= 1e-12 * mean.abs().max(1.0) {
        return vec![0.0; col.len()];
    }
    col.iter().map(|v| (v - mean) / sd).collect()
}
