//! Row-major feature extraction from a dataset. The label and time columns
//! are never features; the protected column becomes a binary feature
//! (A -> 1, B -> 0) only when a model is trained with awareness.

use crate::data::{Column, TabularDataset};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    names: Vec<String>,
    n_rows: usize,
    values: Vec<f64>, // row-major, stride = names.len()
}

impl FeatureMatrix {
    /// Extract every feature column in dataset order. The protected column
    /// is included (encoded) iff `include_protected`; requesting it on a
    /// dataset without one is an error.
    pub fn from_dataset(ds: &TabularDataset, include_protected: bool) -> Result<Self> {
        if include_protected && ds.protected_name().is_none() {
            return Err(Error::MissingColumn("protected".into()));
        }
        let protected = ds.protected_name().map(str::to_string);
        let selected: Vec<String> = ds
            .names()
            .iter()
            .filter(|n| {
                let n = n.as_str();
                if n == ds.label_name() || n == ds.time_name() {
                    return false;
                }
                if Some(n) == protected.as_deref() {
                    return include_protected;
                }
                true
            })
            .cloned()
            .collect();
        Self::select(ds, &selected)
    }

    /// Extract exactly the named columns, in the given order.
    pub fn select(ds: &TabularDataset, names: &[String]) -> Result<Self> {
        let n_rows = ds.n_rows();
        let n_cols = names.len();
        let mut values = vec![0.0; n_rows * n_cols];
        for (c, name) in names.iter().enumerate() {
            let col = ds
                .column(name)
                .ok_or_else(|| Error::MissingColumn(name.clone()))?;
            match col {
                Column::Real(v) => {
                    for (r, &x) in v.iter().enumerate() {
                        values[r * n_cols + c] = x;
                    }
                }
                Column::Binary(v) => {
                    for (r, &x) in v.iter().enumerate() {
                        values[r * n_cols + c] = f64::from(x);
                    }
                }
                Column::Group(v) => {
                    for (r, &z) in v.iter().enumerate() {
                        values[r * n_cols + c] = f64::from(z == crate::data::Group::A);
                    }
                }
                Column::Time(_) => {
                    return Err(Error::Model(format!(
                        "time column '{name}' cannot be used as a feature"
                    )))
                }
            }
        }
        Ok(Self {
            names: names.to_vec(),
            n_rows,
            values,
        })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.names.len()
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        let d = self.n_cols();
        &self.values[r * d..(r + 1) * d]
    }

    #[inline]
    pub fn value(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.n_cols() + c]
    }

    pub fn column_values(&self, c: usize) -> Vec<f64> {
        (0..self.n_rows).map(|r| self.value(r, c)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Group;

    fn dataset() -> TabularDataset {
        TabularDataset::new(
            vec!["t".into(), "f0".into(), "b0".into(), "y".into()],
            vec![
                Column::Time(vec![0, 1, 2]),
                Column::Real(vec![0.5, -1.0, 2.0]),
                Column::Binary(vec![1, 0, 1]),
                Column::Binary(vec![0, 1, 0]),
            ],
            "y",
            None,
            "t",
        )
        .unwrap()
        .with_group_column("z", vec![Group::A, Group::B, Group::A])
        .unwrap()
    }

    #[test]
    fn unaware_extraction_drops_protected_label_time() {
        let m = FeatureMatrix::from_dataset(&dataset(), false).unwrap();
        assert_eq!(m.names(), &["f0".to_string(), "b0".to_string()]);
        assert_eq!(m.row(0), &[0.5, 1.0]);
        assert_eq!(m.row(1), &[-1.0, 0.0]);
    }

    #[test]
    fn aware_extraction_encodes_groups() {
        let m = FeatureMatrix::from_dataset(&dataset(), true).unwrap();
        assert_eq!(m.names(), &["f0".to_string(), "b0".to_string(), "z".to_string()]);
        assert_eq!(m.row(0), &[0.5, 1.0, 1.0]);
        assert_eq!(m.row(1), &[-1.0, 0.0, 0.0]);
    }

    #[test]
    fn awareness_without_protected_errors() {
        let ds = TabularDataset::new(
            vec!["t".into(), "f0".into(), "y".into()],
            vec![
                Column::Time(vec![0, 1]),
                Column::Real(vec![1.0, 2.0]),
                Column::Binary(vec![0, 1]),
            ],
            "y",
            None,
            "t",
        )
        .unwrap();
        assert!(matches!(
            FeatureMatrix::from_dataset(&ds, true),
            Err(Error::MissingColumn(_))
        ));
    }

    #[test]
    fn select_missing_column_errors() {
        let err = FeatureMatrix::select(&dataset(), &["f0".into(), "nope".into()]).unwrap_err();
        assert!(matches!(err, Error::MissingColumn(c) if c == "nope"));
    }
}
