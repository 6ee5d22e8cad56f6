//! Tabular data model shared by every stage of the pipeline: typed columns,
//! CSV ingestion and emission, temporal splitting, and group statistics.
//!
//! Datasets are immutable after construction. Every operation that "modifies"
//! a dataset returns a fresh value, so datasets can be shared across workers
//! freely.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Protected-group code. All group-conditional formulas in this crate are
/// two-group; the column type is fixed to {A, B}.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Group {
    A,
    B,
}

impl Group {
    pub fn other(self) -> Group {
        match self {
            Group::A => Group::B,
            Group::B => Group::A,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Group::A => "A",
            Group::B => "B",
        }
    }

    pub fn parse(s: &str) -> Option<Group> {
        match s {
            "A" => Some(Group::A),
            "B" => Some(Group::B),
            _ => None,
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ColumnType {
    /// Real-valued feature.
    Real,
    /// Feature or label restricted to {0, 1}.
    Binary,
    /// Protected-group code in {A, B}.
    Group,
    /// Non-negative integer time index.
    Time,
}

impl ColumnType {
    pub fn as_str(self) -> &'static str {
        match self {
            ColumnType::Real => "real",
            ColumnType::Binary => "binary",
            ColumnType::Group => "group",
            ColumnType::Time => "time",
        }
    }
}

/// One typed column of data.
#[derive(Clone, Debug, PartialEq)]
pub enum Column {
    Real(Vec<f64>),
    Binary(Vec<u8>),
    Group(Vec<Group>),
    Time(Vec<u64>),
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Real(v) => v.len(),
            Column::Binary(v) => v.len(),
            Column::Group(v) => v.len(),
            Column::Time(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn column_type(&self) -> ColumnType {
        match self {
            Column::Real(_) => ColumnType::Real,
            Column::Binary(_) => ColumnType::Binary,
            Column::Group(_) => ColumnType::Group,
            Column::Time(_) => ColumnType::Time,
        }
    }

    fn slice(&self, start: usize, end: usize) -> Column {
        match self {
            Column::Real(v) => Column::Real(v[start..end].to_vec()),
            Column::Binary(v) => Column::Binary(v[start..end].to_vec()),
            Column::Group(v) => Column::Group(v[start..end].to_vec()),
            Column::Time(v) => Column::Time(v[start..end].to_vec()),
        }
    }

    fn concat(&self, other: &Column) -> Option<Column> {
        match (self, other) {
            (Column::Real(a), Column::Real(b)) => {
                Some(Column::Real(a.iter().chain(b).copied().collect()))
            }
            (Column::Binary(a), Column::Binary(b)) => {
                Some(Column::Binary(a.iter().chain(b).copied().collect()))
            }
            (Column::Group(a), Column::Group(b)) => {
                Some(Column::Group(a.iter().chain(b).copied().collect()))
            }
            (Column::Time(a), Column::Time(b)) => {
                Some(Column::Time(a.iter().chain(b).copied().collect()))
            }
            _ => None,
        }
    }

    fn format_cell(&self, row: usize, out: &mut String) {
        use std::fmt::Write;
        match self {
            Column::Real(v) => write!(out, "{}", v[row]).unwrap(),
            Column::Binary(v) => write!(out, "{}", v[row]).unwrap(),
            Column::Group(v) => out.push_str(v[row].as_str()),
            Column::Time(v) => write!(out, "{}", v[row]).unwrap(),
        }
    }
}

/// Declared layout of a CSV file: column names and types plus the roles of
/// the label, protected, and time-index columns.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSchema {
    pub columns: Vec<(String, ColumnType)>,
    pub label: String,
    pub protected: Option<String>,
    pub time_index: String,
}

impl DatasetSchema {
    pub fn validate(&self) -> Result<()> {
        let find = |name: &str| self.columns.iter().find(|(n, _)| n == name);
        let mut seen = HashSet::new();
        for (name, _) in &self.columns {
            if !seen.insert(name.clone()) {
                return Err(Error::Schema(format!("duplicate column '{name}'")));
            }
        }
        match find(&self.label) {
            Some((_, ColumnType::Binary)) => {}
            Some(_) => {
                return Err(Error::Schema(format!(
                    "label column '{}' must be binary",
                    self.label
                )))
            }
            None => return Err(Error::Schema(format!("label column '{}' not declared", self.label))),
        }
        match find(&self.time_index) {
            Some((_, ColumnType::Time)) => {}
            Some(_) => {
                return Err(Error::Schema(format!(
                    "time column '{}' must have time type",
                    self.time_index
                )))
            }
            None => {
                return Err(Error::Schema(format!(
                    "time column '{}' not declared",
                    self.time_index
                )))
            }
        }
        if let Some(p) = &self.protected {
            match find(p) {
                Some((_, ColumnType::Group)) => {}
                Some(_) => {
                    return Err(Error::Schema(format!("protected column '{p}' must be a group column")))
                }
                None => return Err(Error::Schema(format!("protected column '{p}' not declared"))),
            }
        }
        Ok(())
    }
}

/// An immutable table of named, typed columns with a binary label, an
/// optional protected-group column, and a non-decreasing time index.
#[derive(Clone, Debug, PartialEq)]
pub struct TabularDataset {
    names: Vec<String>,
    columns: Vec<Column>,
    label: usize,
    protected: Option<usize>,
    time: usize,
    n_rows: usize,
}

impl TabularDataset {
    pub fn new(
        names: Vec<String>,
        columns: Vec<Column>,
        label: &str,
        protected: Option<&str>,
        time_index: &str,
    ) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::Dataset(format!(
                "{} names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        let mut seen = HashSet::new();
        for n in &names {
            if !seen.insert(n.clone()) {
                return Err(Error::Dataset(format!("duplicate column '{n}'")));
            }
        }
        let idx_of = |name: &str| -> Result<usize> {
            names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::MissingColumn(name.to_string()))
        };
        let label_idx = idx_of(label)?;
        let time_idx = idx_of(time_index)?;
        let protected_idx = protected.map(idx_of).transpose()?;

        let n_rows = columns.first().map_or(0, Column::len);
        for (name, col) in names.iter().zip(&columns) {
            if col.len() != n_rows {
                return Err(Error::Dataset(format!(
                    "column '{}' has {} rows, expected {}",
                    name,
                    col.len(),
                    n_rows
                )));
            }
        }
        if !matches!(columns[label_idx], Column::Binary(_)) {
            return Err(Error::Dataset(format!("label column '{label}' must be binary")));
        }
        if let Column::Binary(v) = &columns[label_idx] {
            if let Some(r) = v.iter().position(|&y| y > 1) {
                return Err(Error::Dataset(format!("label out of domain, row {}", r + 1)));
            }
        }
        let Column::Time(t) = &columns[time_idx] else {
            return Err(Error::Dataset(format!(
                "time column '{time_index}' must have time type"
            )));
        };
        if let Some(r) = t.windows(2).position(|w| w[0] > w[1]) {
            return Err(Error::Dataset(format!("time index not sorted, row {}", r + 2)));
        }
        if let Some(p) = protected_idx {
            if !matches!(columns[p], Column::Group(_)) {
                return Err(Error::Dataset("protected column must be a group column".into()));
            }
        }
        Ok(Self {
            names,
            columns,
            label: label_idx,
            protected: protected_idx,
            time: time_idx,
            n_rows,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.names.iter().position(|n| n == name).map(|i| &self.columns[i])
    }

    pub fn columns(&self) -> impl Iterator<Item = (&str, &Column)> {
        self.names.iter().map(String::as_str).zip(self.columns.iter())
    }

    pub fn label_name(&self) -> &str {
        &self.names[self.label]
    }

    pub fn time_name(&self) -> &str {
        &self.names[self.time]
    }

    pub fn protected_name(&self) -> Option<&str> {
        self.protected.map(|i| self.names[i].as_str())
    }

    pub fn labels(&self) -> &[u8] {
        match &self.columns[self.label] {
            Column::Binary(v) => v,
            _ => unreachable!("label column type checked at construction"),
        }
    }

    pub fn time(&self) -> &[u64] {
        match &self.columns[self.time] {
            Column::Time(v) => v,
            _ => unreachable!("time column type checked at construction"),
        }
    }

    pub fn groups(&self) -> Option<&[Group]> {
        self.protected.map(|i| match &self.columns[i] {
            Column::Group(v) => v.as_slice(),
            _ => unreachable!("protected column type checked at construction"),
        })
    }

    pub fn schema(&self) -> DatasetSchema {
        DatasetSchema {
            columns: self
                .names
                .iter()
                .zip(&self.columns)
                .map(|(n, c)| (n.clone(), c.column_type()))
                .collect(),
            label: self.label_name().to_string(),
            protected: self.protected_name().map(str::to_string),
            time_index: self.time_name().to_string(),
        }
    }

    /// Fraction of positive labels, optionally within one protected group.
    pub fn prevalence(&self, group: Option<Group>) -> Result<f64> {
        let labels = self.labels();
        match group {
            None => {
                if self.n_rows == 0 {
                    return Err(Error::Dataset("prevalence of an empty dataset".into()));
                }
                Ok(labels.iter().map(|&y| y as u64).sum::<u64>() as f64 / self.n_rows as f64)
            }
            Some(g) => {
                let groups = self
                    .groups()
                    .ok_or_else(|| Error::MissingColumn("protected".into()))?;
                let (mut n, mut pos) = (0u64, 0u64);
                for (&z, &y) in groups.iter().zip(labels) {
                    if z == g {
                        n += 1;
                        pos += y as u64;
                    }
                }
                if n == 0 {
                    return Err(Error::EmptyGroup(g));
                }
                Ok(pos as f64 / n as f64)
            }
        }
    }

    /// Fraction of rows belonging to `group`.
    pub fn group_fraction(&self, group: Group) -> Result<f64> {
        let groups = self
            .groups()
            .ok_or_else(|| Error::MissingColumn("protected".into()))?;
        if self.n_rows == 0 {
            return Err(Error::Dataset("group fraction of an empty dataset".into()));
        }
        let n = groups.iter().filter(|&&z| z == group).count();
        Ok(n as f64 / self.n_rows as f64)
    }

    /// Per-group row and positive counts: ((n_A, pos_A), (n_B, pos_B)).
    pub fn group_label_counts(&self) -> Result<((u64, u64), (u64, u64))> {
        let groups = self
            .groups()
            .ok_or_else(|| Error::MissingColumn("protected".into()))?;
        let (mut na, mut pa, mut nb, mut pb) = (0u64, 0u64, 0u64, 0u64);
        for (&z, &y) in groups.iter().zip(self.labels()) {
            match z {
                Group::A => {
                    na += 1;
                    pa += y as u64;
                }
                Group::B => {
                    nb += 1;
                    pb += y as u64;
                }
            }
        }
        Ok(((na, pa), (nb, pb)))
    }

    /// Split by time order: the first ceil(fraction * n) rows become the
    /// training partition and the remainder the test partition.
    pub fn temporal_split(&self, train_fraction: f64) -> Result<(TabularDataset, TabularDataset)> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "train_fraction must lie in (0,1), got {train_fraction}"
            )));
        }
        let k = (train_fraction * self.n_rows as f64).ceil() as usize;
        if k == 0 || k >= self.n_rows {
            return Err(Error::Dataset(format!(
                "temporal split at fraction {train_fraction} leaves an empty side ({k} of {} rows in train)",
                self.n_rows
            )));
        }
        Ok((self.slice_rows(0, k), self.slice_rows(k, self.n_rows)))
    }

    fn slice_rows(&self, start: usize, end: usize) -> TabularDataset {
        TabularDataset {
            names: self.names.clone(),
            columns: self.columns.iter().map(|c| c.slice(start, end)).collect(),
            label: self.label,
            protected: self.protected,
            time: self.time,
            n_rows: end - start,
        }
    }

    /// Row-wise concatenation; schemas must match exactly.
    pub fn concat(&self, other: &TabularDataset) -> Result<TabularDataset> {
        if self.schema() != other.schema() {
            return Err(Error::Dataset("concat of mismatched schemas".into()));
        }
        let columns = self
            .columns
            .iter()
            .zip(&other.columns)
            .map(|(a, b)| a.concat(b).expect("schemas match"))
            .collect();
        Ok(TabularDataset {
            names: self.names.clone(),
            columns,
            label: self.label,
            protected: self.protected,
            time: self.time,
            n_rows: self.n_rows + other.n_rows,
        })
    }

    /// Append a protected-group column and mark it as the protected
    /// attribute. Fails if a protected column is already present.
    pub fn with_group_column(&self, name: &str, values: Vec<Group>) -> Result<TabularDataset> {
        if self.protected.is_some() {
            return Err(Error::Dataset("protected column already present".into()));
        }
        if values.len() != self.n_rows {
            return Err(Error::Dataset("group column length mismatch".into()));
        }
        if self.names.iter().any(|n| n == name) {
            return Err(Error::Dataset(format!("column '{name}' already exists")));
        }
        let mut names = self.names.clone();
        let mut columns = self.columns.clone();
        names.push(name.to_string());
        columns.push(Column::Group(values));
        Ok(TabularDataset {
            protected: Some(columns.len() - 1),
            names,
            columns,
            label: self.label,
            time: self.time,
            n_rows: self.n_rows,
        })
    }

    /// Append a real-valued feature column.
    pub fn with_real_column(&self, name: &str, values: Vec<f64>) -> Result<TabularDataset> {
        if values.len() != self.n_rows {
            return Err(Error::Dataset("column length mismatch".into()));
        }
        if self.names.iter().any(|n| n == name) {
            return Err(Error::Dataset(format!("column '{name}' already exists")));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Dataset(format!("non-finite value {bad} in column '{name}'")));
        }
        let mut names = self.names.clone();
        let mut columns = self.columns.clone();
        names.push(name.to_string());
        columns.push(Column::Real(values));
        Ok(TabularDataset {
            names,
            columns,
            label: self.label,
            protected: self.protected,
            time: self.time,
            n_rows: self.n_rows,
        })
    }

    /// Replace the label column (used by label-flip injections).
    pub fn with_labels(&self, labels: Vec<u8>) -> Result<TabularDataset> {
        if labels.len() != self.n_rows {
            return Err(Error::Dataset("label column length mismatch".into()));
        }
        if labels.iter().any(|&y| y > 1) {
            return Err(Error::Dataset("label out of domain".into()));
        }
        let mut columns = self.columns.clone();
        columns[self.label] = Column::Binary(labels);
        Ok(TabularDataset {
            names: self.names.clone(),
            columns,
            label: self.label,
            protected: self.protected,
            time: self.time,
            n_rows: self.n_rows,
        })
    }
}

/// Load a CSV file against a declared schema.
///
/// The header row must match the schema's column names in order. Rows are
/// 1-based in error messages and count data rows only.
pub fn load_csv(path: impl AsRef<Path>, schema: &DatasetSchema) -> Result<TabularDataset> {
    schema.validate()?;
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    parse_csv(&text, schema, &path.display().to_string())
}

/// Parse CSV text against a schema. See [`load_csv`].
pub fn parse_csv(text: &str, schema: &DatasetSchema, origin: &str) -> Result<TabularDataset> {
    schema.validate()?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Schema(format!("{origin}: empty file")))?;
    let header_names: Vec<&str> = header.split(',').collect();
    let expected: Vec<&str> = schema.columns.iter().map(|(n, _)| n.as_str()).collect();
    if header_names != expected {
        return Err(Error::Schema(format!(
            "{origin}: header [{}] does not match schema [{}]",
            header_names.join(","),
            expected.join(",")
        )));
    }

    let n_cols = schema.columns.len();
    let mut columns: Vec<Column> = schema
        .columns
        .iter()
        .map(|(_, t)| match t {
            ColumnType::Real => Column::Real(Vec::new()),
            ColumnType::Binary => Column::Binary(Vec::new()),
            ColumnType::Group => Column::Group(Vec::new()),
            ColumnType::Time => Column::Time(Vec::new()),
        })
        .collect();

    let cell_err = |row: usize, col: usize, reason: String| Error::CsvParse {
        path: origin.to_string(),
        row,
        column: schema.columns[col].0.clone(),
        reason,
    };

    for (r, line) in lines.enumerate() {
        let row = r + 1;
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != n_cols {
            return Err(Error::CsvParse {
                path: origin.to_string(),
                row,
                column: String::from("<row>"),
                reason: format!("expected {n_cols} cells, found {}", cells.len()),
            });
        }
        for (c, &cell) in cells.iter().enumerate() {
            if cell.is_empty() {
                return Err(cell_err(row, c, "missing value".into()));
            }
            let is_label = schema.columns[c].0 == schema.label;
            match (&mut columns[c], cell) {
                (Column::Real(v), s) => {
                    let x: f64 = s
                        .parse()
                        .map_err(|_| cell_err(row, c, format!("cannot parse '{s}' as real")))?;
                    if !x.is_finite() {
                        return Err(cell_err(row, c, format!("non-finite value '{s}'")));
                    }
                    v.push(x);
                }
                (Column::Binary(v), "0") => v.push(0),
                (Column::Binary(v), "1") => v.push(1),
                (Column::Binary(_), s) => {
                    let reason = if is_label {
                        "label out of domain".to_string()
                    } else {
                        format!("binary value '{s}' out of domain")
                    };
                    return Err(cell_err(row, c, reason));
                }
                (Column::Group(v), s) => match Group::parse(s) {
                    Some(g) => v.push(g),
                    None => return Err(cell_err(row, c, format!("group code '{s}' not in {{A,B}}"))),
                },
                (Column::Time(v), s) => {
                    let t: u64 = s.parse().map_err(|_| {
                        cell_err(row, c, format!("cannot parse '{s}' as a non-negative integer"))
                    })?;
                    if let Some(&prev) = v.last() {
                        if t < prev {
                            return Err(cell_err(row, c, "time index not sorted".into()));
                        }
                    }
                    v.push(t);
                }
            }
        }
    }

    let names = schema.columns.iter().map(|(n, _)| n.clone()).collect();
    TabularDataset::new(
        names,
        columns,
        &schema.label,
        schema.protected.as_deref(),
        &schema.time_index,
    )
}

/// Write a dataset in canonical CSV form: header row, comma separators,
/// shortest round-tripping decimal notation for reals, one trailing newline.
pub fn write_csv(ds: &TabularDataset, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, render_csv(ds)).map_err(Error::Io)
}

/// Render a dataset to canonical CSV text. See [`write_csv`].
pub fn render_csv(ds: &TabularDataset) -> String {
    let mut out = String::with_capacity(ds.n_rows() * ds.names().len() * 8);
    out.push_str(&ds.names().join(","));
    out.push('\n');
    for r in 0..ds.n_rows() {
        for (c, col) in ds.columns.iter().enumerate() {
            if c > 0 {
                out.push(',');
            }
            col.format_cell(r, &mut out);
        }
        out.push('\n');
    }
    out
}

/// Infer a schema from a CSV file using role column names: `time` and
/// `label` must be present; `protected` is used when present. Remaining
/// columns are binary when every cell is 0 or 1, otherwise real.
pub fn infer_schema(
    path: impl AsRef<Path>,
    label: &str,
    time_index: &str,
    protected: &str,
) -> Result<DatasetSchema> {
    let text = fs::read_to_string(path.as_ref())?;
    infer_schema_from_text(&text, label, time_index, protected)
}

pub fn infer_schema_from_text(
    text: &str,
    label: &str,
    time_index: &str,
    protected: &str,
) -> Result<DatasetSchema> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Schema("empty file".into()))?;
    let names: Vec<String> = header.split(',').map(str::to_string).collect();
    let mut binary_ok = vec![true; names.len()];
    for line in lines {
        for (c, cell) in line.split(',').enumerate() {
            if c < binary_ok.len() && !(cell == "0" || cell == "1") {
                binary_ok[c] = false;
            }
        }
    }
    let columns = names
        .iter()
        .enumerate()
        .map(|(c, n)| {
            let t = if n == time_index {
                ColumnType::Time
            } else if n == label {
                ColumnType::Binary
            } else if n == protected {
                ColumnType::Group
            } else if binary_ok[c] {
                ColumnType::Binary
            } else {
                ColumnType::Real
            };
            (n.clone(), t)
        })
        .collect();
    let schema = DatasetSchema {
        columns,
        label: label.to_string(),
        protected: names.iter().any(|n| n == protected).then(|| protected.to_string()),
        time_index: time_index.to_string(),
    };
    schema.validate()?;
    Ok(schema)
}
