//! Quantile binning shared by the tree learners. Up to 256 bins per
//! feature; bin(x) counts the cuts strictly below x, so the split rule
//! `x <= cuts[b]` routes raw values exactly as bin codes `<= b`.

use crate::learn::matrix::FeatureMatrix;

pub const MAX_BINS: usize = 256;

pub struct BinnedMatrix {
    /// Per feature: ascending distinct cut values.
    pub cuts: Vec<Vec<f64>>,
    /// Row-major bin codes, stride = n_cols.
    pub codes: Vec<u8>,
    /// Per-feature offset into a flat histogram buffer.
    pub offsets: Vec<usize>,
    pub total_bins: usize,
    pub n_rows: usize,
    pub n_cols: usize,
}

impl BinnedMatrix {
    pub fn new(m: &FeatureMatrix) -> Self {
        let n = m.n_rows();
        let d = m.n_cols();
        let mut cuts: Vec<Vec<f64>> = Vec::with_capacity(d);
        for c in 0..d {
            let mut vals = m.column_values(c);
            vals.sort_unstable_by(|a, b| a.total_cmp(b));
            let mut feature_cuts = Vec::new();
            for j in 1..MAX_BINS {
                let idx = j * n / MAX_BINS;
                if idx == 0 || idx >= n {
                    continue;
                }
                let v = vals[idx];
                if feature_cuts.last() != Some(&v) {
                    feature_cuts.push(v);
                }
            }
            // for low-cardinality features the quantile walk can miss the
            // extreme distinct values; every distinct value matters there
            if feature_cuts.len() < MAX_BINS - 1 {
                let mut distinct = vals.clone();
                distinct.dedup();
                if distinct.len() <= MAX_BINS {
                    feature_cuts = distinct;
                    feature_cuts.pop(); // the largest value needs no cut
                }
            }
            cuts.push(feature_cuts);
        }
        let mut codes = vec![0u8; n * d];
        for r in 0..n {
            for (c, feature_cuts) in cuts.iter().enumerate() {
                let x = m.value(r, c);
                codes[r * d + c] = feature_cuts.partition_point(|&v| v < x) as u8;
            }
        }
        let mut offsets = Vec::with_capacity(d);
        let mut total = 0;
        for feature_cuts in &cuts {
            offsets.push(total);
            total += feature_cuts.len() + 1;
        }
        Self {
            cuts,
            codes,
            offsets,
            total_bins: total,
            n_rows: n,
            n_cols: d,
        }
    }

    #[inline]
    pub fn code(&self, row: usize, col: usize) -> u8 {
        self.codes[row * self.n_cols + col]
    }

    pub fn n_bins(&self, col: usize) -> usize {
        self.cuts[col].len() + 1
    }
}
