//! Bias injection: append a synthetic protected attribute (and optionally a
//! pair of group-separability features), or flip training labels, so an
//! output dataset provably satisfies a requested bias scenario.
//!
//! Scenario kinds map to distinct generative mechanisms:
//!
//! * `baseline` / `h1` - protected column drawn independently of features
//!   and label (a biased coin over group shares).
//! * `h2_1` / `h2_2_*` - protected column drawn conditionally on the label so
//!   one group's positive prevalence is `c` times the other's; the `h2_2`
//!   variants bias only one partition.
//! * `h3` - two extra features drawn from per-(label, group) bivariate
//!   normals, making one group's classes more separable; group sizes and
//!   prevalences stay untouched.
//! * `h4_1` - negatives of group A flipped to positive in the training
//!   partition until the observed prevalence ratio reaches `c`.
//! * `h4_2` - starting from an `h2_1`-style disparity, positives of the
//!   higher-prevalence group flipped to negative in the training partition
//!   until prevalences match.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{Group, TabularDataset};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, SplitMix64};

/// Canonical name of the injected protected column.
pub const PROTECTED_COLUMN: &str = "z";
/// Canonical names of the injected separability features.
pub const SEPARABILITY_COLUMNS: [&str; 2] = ["x1", "x2"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Baseline,
    H1,
    #[serde(rename = "h2_1")]
    H21,
    #[serde(rename = "h2_2_train_only")]
    H22TrainOnly,
    #[serde(rename = "h2_2_test_only")]
    H22TestOnly,
    H3,
    #[serde(rename = "h4_1")]
    H41,
    #[serde(rename = "h4_2")]
    H42,
}

impl ScenarioKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::Baseline => "baseline",
            ScenarioKind::H1 => "h1",
            ScenarioKind::H21 => "h2_1",
            ScenarioKind::H22TrainOnly => "h2_2_train_only",
            ScenarioKind::H22TestOnly => "h2_2_test_only",
            ScenarioKind::H3 => "h3",
            ScenarioKind::H41 => "h4_1",
            ScenarioKind::H42 => "h4_2",
        }
    }

    pub const ALL: [ScenarioKind; 8] = [
        ScenarioKind::Baseline,
        ScenarioKind::H1,
        ScenarioKind::H21,
        ScenarioKind::H22TrainOnly,
        ScenarioKind::H22TestOnly,
        ScenarioKind::H3,
        ScenarioKind::H41,
        ScenarioKind::H42,
    ];
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ScenarioKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown scenario kind '{s}'")))
    }
}

/// One bivariate normal: mean vector and 2x2 covariance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianComponent {
    pub mean: [f64; 2],
    pub cov: [[f64; 2]; 2],
}

impl GaussianComponent {
    pub fn isotropic(mean: [f64; 2]) -> Self {
        Self {
            mean,
            cov: [[1.0, 0.0], [0.0, 1.0]],
        }
    }

    fn validate(&self, label: &str) -> Result<()> {
        let c = &self.cov;
        if c[0][1] != c[1][0] {
            return Err(Error::Config(format!("covariance for {label} is not symmetric")));
        }
        let det = c[0][0] * c[1][1] - c[0][1] * c[1][0];
        if !(c[0][0] > 0.0 && det > 0.0) {
            return Err(Error::Config(format!(
                "covariance for {label} is not positive-definite"
            )));
        }
        Ok(())
    }

    /// Lower Cholesky factor.
    fn cholesky(&self) -> [f64; 3] {
        let l11 = self.cov[0][0].sqrt();
        let l21 = self.cov[0][1] / l11;
        let l22 = (self.cov[1][1] - l21 * l21).sqrt();
        [l11, l21, l22]
    }
}

/// Per-(label, group) bivariate normals controlling how separable each
/// group's classes are in the injected (x1, x2) plane.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparabilityScheme {
    pub neg_a: GaussianComponent,
    pub pos_a: GaussianComponent,
    pub neg_b: GaussianComponent,
    pub pos_b: GaussianComponent,
}

impl SeparabilityScheme {
    /// Default scheme: identity covariances everywhere; group B classes sit
    /// at (0,0) and (3,3) while both group A classes sit at (1.5, 1.5), so
    /// the plane separates B cleanly and A not at all.
    pub fn default_scheme() -> Self {
        Self {
            neg_a: GaussianComponent::isotropic([1.5, 1.5]),
            pos_a: GaussianComponent::isotropic([1.5, 1.5]),
            neg_b: GaussianComponent::isotropic([0.0, 0.0]),
            pos_b: GaussianComponent::isotropic([3.0, 3.0]),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.neg_a.validate("(y=0, z=A)")?;
        self.pos_a.validate("(y=1, z=A)")?;
        self.neg_b.validate("(y=0, z=B)")?;
        self.pos_b.validate("(y=1, z=B)")
    }

    pub fn component(&self, y: u8, z: Group) -> &GaussianComponent {
        match (y, z) {
            (0, Group::A) => &self.neg_a,
            (_, Group::A) => &self.pos_a,
            (0, Group::B) => &self.neg_b,
            (_, Group::B) => &self.pos_b,
        }
    }

    /// Fisher discriminant ratio between classes within one group:
    /// dmu' pooled_cov^-1 dmu. Larger means more separable.
    pub fn fisher_ratio(&self, z: Group) -> f64 {
        let (neg, pos) = match z {
            Group::A => (&self.neg_a, &self.pos_a),
            Group::B => (&self.neg_b, &self.pos_b),
        };
        let d = [pos.mean[0] - neg.mean[0], pos.mean[1] - neg.mean[1]];
        let s = [
            [
                0.5 * (pos.cov[0][0] + neg.cov[0][0]),
                0.5 * (pos.cov[0][1] + neg.cov[0][1]),
            ],
            [
                0.5 * (pos.cov[1][0] + neg.cov[1][0]),
                0.5 * (pos.cov[1][1] + neg.cov[1][1]),
            ],
        ];
        let det = s[0][0] * s[1][1] - s[0][1] * s[1][0];
        let inv = [
            [s[1][1] / det, -s[0][1] / det],
            [-s[1][0] / det, s[0][0] / det],
        ];
        d[0] * (inv[0][0] * d[0] + inv[0][1] * d[1]) + d[1] * (inv[1][0] * d[0] + inv[1][1] * d[1])
    }
}

/// Declarative description of one bias-scenario instance.
#[derive(Clone, Debug, PartialEq)]
pub struct BiasScenario {
    pub kind: ScenarioKind,
    /// Target P[Z=A].
    pub s_a: f64,
    /// Target prevalence multiplier: P[Y=1|A] = c * P[Y=1|B].
    pub c: f64,
    /// Required for `h3`, forbidden otherwise.
    pub scheme: Option<SeparabilityScheme>,
    pub seed: u64,
}

impl BiasScenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.s_a > 0.0 && self.s_a < 1.0) {
            return Err(Error::Config(format!("s_a must lie in (0,1), got {}", self.s_a)));
        }
        if self.c <= 0.0 {
            return Err(Error::Config(format!("c must be positive, got {}", self.c)));
        }
        match (self.kind, &self.scheme) {
            (ScenarioKind::H3, None) => {
                Err(Error::Config("scenario h3 requires a separability scheme".into()))
            }
            (ScenarioKind::H3, Some(s)) => s.validate(),
            (_, Some(_)) => Err(Error::Config(format!(
                "scenario {} does not take a separability scheme",
                self.kind
            ))),
            (_, None) => Ok(()),
        }
    }
}

/// One recorded label flip.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FlipEntry {
    pub row: usize,
    pub old: u8,
    pub new: u8,
}

/// Record of all label flips applied to one training partition.
#[derive(Clone, Debug, PartialEq)]
pub struct FlipLog {
    pub group: Group,
    pub entries: Vec<FlipEntry>,
    /// Achieved post-flip group prevalences.
    pub prevalence_a: f64,
    pub prevalence_b: f64,
}

impl FlipLog {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Undo the recorded flips, restoring the original labels exactly.
    pub fn revert(&self, ds: &TabularDataset) -> Result<TabularDataset> {
        let mut labels = ds.labels().to_vec();
        for e in &self.entries {
            if labels.get(e.row) != Some(&e.new) {
                return Err(Error::Dataset(format!(
                    "flip log does not match dataset at row {}",
                    e.row
                )));
            }
            labels[e.row] = e.old;
        }
        ds.with_labels(labels)
    }
}

/// Achieved statistics of one injected partition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PartitionStats {
    pub n_rows: usize,
    pub group_fraction_a: f64,
    pub prevalence: f64,
    pub prevalence_a: f64,
    pub prevalence_b: f64,
    pub flip_count: usize,
}

impl PartitionStats {
    pub fn measure(ds: &TabularDataset, flip_count: usize) -> Result<Self> {
        Ok(Self {
            n_rows: ds.n_rows(),
            group_fraction_a: ds.group_fraction(Group::A)?,
            prevalence: ds.prevalence(None)?,
            prevalence_a: ds.prevalence(Some(Group::A))?,
            prevalence_b: ds.prevalence(Some(Group::B))?,
            flip_count,
        })
    }

    /// Observed prevalence ratio A/B, if defined.
    pub fn prevalence_ratio(&self) -> Option<f64> {
        (self.prevalence_b > 0.0).then(|| self.prevalence_a / self.prevalence_b)
    }
}

/// Audit trail for one scenario application.
#[derive(Clone, Debug, PartialEq)]
pub struct InjectionManifest {
    pub scenario: BiasScenario,
    pub seed: u64,
    pub train: PartitionStats,
    pub test: PartitionStats,
    pub columns_added: Vec<String>,
    pub flip_log: Option<FlipLog>,
}

impl InjectionManifest {
    /// Render as key/value text with per-partition tables.
    pub fn render(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        out.push_str("biasforge manifest v1\n");
        writeln!(out, "scenario {}", self.scenario.kind).unwrap();
        writeln!(out, "s_a {}", self.scenario.s_a).unwrap();
        writeln!(out, "c {}", self.scenario.c).unwrap();
        writeln!(out, "seed {}", self.seed).unwrap();
        writeln!(out, "columns_added {}", self.columns_added.join(",")).unwrap();
        for (name, stats) in [("train", &self.train), ("test", &self.test)] {
            writeln!(out, "\n[{name}]").unwrap();
            writeln!(out, "n_rows {}", stats.n_rows).unwrap();
            writeln!(out, "group_fraction_a {}", stats.group_fraction_a).unwrap();
            writeln!(out, "prevalence {}", stats.prevalence).unwrap();
            writeln!(out, "prevalence_a {}", stats.prevalence_a).unwrap();
            writeln!(out, "prevalence_b {}", stats.prevalence_b).unwrap();
            writeln!(out, "flip_count {}", stats.flip_count).unwrap();
        }
        if let Some(log) = &self.flip_log {
            writeln!(out, "\n[flips]").unwrap();
            writeln!(out, "group {}", log.group).unwrap();
            writeln!(out, "row old new").unwrap();
            for e in &log.entries {
                writeln!(out, "{} {} {}", e.row, e.old, e.new).unwrap();
            }
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.render()).map_err(Error::Io)
    }

    /// Canonical manifest file name: `<scenario>_<seed>.manifest`.
    pub fn file_name(&self) -> String {
        format!("{}_{}.manifest", self.scenario.kind, self.seed)
    }
}

/// Append a protected column drawn independently of features and label:
/// each row is A with probability `s_a`.
pub fn assign_groups_independent(ds: &TabularDataset, s_a: f64, seed: u64) -> Result<TabularDataset> {
    if !(s_a > 0.0 && s_a < 1.0) {
        return Err(Error::Config(format!("s_a must lie in (0,1), got {s_a}")));
    }
    let mut rng = SplitMix64::new(seed);
    let groups = (0..ds.n_rows())
        .map(|_| if rng.bernoulli(s_a) { Group::A } else { Group::B })
        .collect();
    ds.with_group_column(PROTECTED_COLUMN, groups)
}

/// Conditional assignment probabilities (P[Z=A|Y=1], P[Z=A|Y=0]) that give
/// expected group share `s_a` and prevalence ratio `c` over an observed
/// global prevalence `p`. Derived by Bayes' rule from
/// p_B = p / (s_a c + 1 - s_a) and p_A = c p_B.
pub fn prevalence_assignment_probs(p: f64, s_a: f64, c: f64) -> Result<(f64, f64)> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Infeasible(format!(
            "global prevalence must lie in (0,1), got {p}"
        )));
    }
    let p_b = p / (s_a * c + 1.0 - s_a);
    let p_a = c * p_b;
    if !(p_b > 0.0 && p_b < 1.0) {
        return Err(Error::Infeasible(format!("implied p_B = {p_b} outside (0,1)")));
    }
    if !(p_a > 0.0 && p_a < 1.0) {
        return Err(Error::Infeasible(format!("implied p_A = {p_a} outside (0,1)")));
    }
    let q_pos = s_a * p_a / p;
    let q_neg = s_a * (1.0 - p_a) / (1.0 - p);
    if !(0.0..=1.0).contains(&q_pos) {
        return Err(Error::Infeasible(format!(
            "implied P[Z=A|Y=1] = {q_pos} outside [0,1]"
        )));
    }
    if !(0.0..=1.0).contains(&q_neg) {
        return Err(Error::Infeasible(format!(
            "implied P[Z=A|Y=0] = {q_neg} outside [0,1]"
        )));
    }
    Ok((q_pos, q_neg))
}

/// Append a protected column drawn conditionally on the label so that, in
/// expectation, P[Z=A] = `s_a` and P[Y=1|A] = `c` * P[Y=1|B].
pub fn assign_groups_prevalence(
    ds: &TabularDataset,
    s_a: f64,
    c: f64,
    seed: u64,
) -> Result<TabularDataset> {
    if !(s_a > 0.0 && s_a < 1.0) {
        return Err(Error::Config(format!("s_a must lie in (0,1), got {s_a}")));
    }
    if c <= 0.0 {
        return Err(Error::Config(format!("c must be positive, got {c}")));
    }
    let p = ds.prevalence(None)?;
    let (q_pos, q_neg) = prevalence_assignment_probs(p, s_a, c)?;
    let mut rng = SplitMix64::new(seed);
    let groups = ds
        .labels()
        .iter()
        .map(|&y| {
            let q = if y == 1 { q_pos } else { q_neg };
            if rng.bernoulli(q) {
                Group::A
            } else {
                Group::B
            }
        })
        .collect();
    ds.with_group_column(PROTECTED_COLUMN, groups)
}

/// Append separability features x1, x2 drawn from the scheme's bivariate
/// normal for each row's (label, group) pair. Group sizes and prevalences
/// are untouched.
pub fn add_separability_features(
    ds: &TabularDataset,
    scheme: &SeparabilityScheme,
    seed: u64,
) -> Result<TabularDataset> {
    scheme.validate()?;
    let groups = ds
        .groups()
        .ok_or_else(|| Error::MissingColumn(PROTECTED_COLUMN.into()))?
        .to_vec();
    let labels = ds.labels();
    let chol: Vec<([f64; 2], [f64; 3])> = [(0u8, Group::A), (1, Group::A), (0, Group::B), (1, Group::B)]
        .into_iter()
        .map(|(y, z)| {
            let comp = scheme.component(y, z);
            (comp.mean, comp.cholesky())
        })
        .collect();
    let comp_index = |y: u8, z: Group| -> usize {
        match (y, z) {
            (0, Group::A) => 0,
            (_, Group::A) => 1,
            (0, Group::B) => 2,
            (_, Group::B) => 3,
        }
    };
    let mut rng = SplitMix64::new(seed);
    let mut x1 = Vec::with_capacity(ds.n_rows());
    let mut x2 = Vec::with_capacity(ds.n_rows());
    for (&y, &z) in labels.iter().zip(&groups) {
        let (mean, l) = &chol[comp_index(y, z)];
        let z1 = rng.next_normal();
        let z2 = rng.next_normal();
        x1.push(mean[0] + l[0] * z1);
        x2.push(mean[1] + l[1] * z1 + l[2] * z2);
    }
    ds.with_real_column(SEPARABILITY_COLUMNS[0], x1)?
        .with_real_column(SEPARABILITY_COLUMNS[1], x2)
}

/// Flip uniformly chosen negatives of `group` to positive until the group's
/// prevalence is at least `c_target` times the other group's. Returns the
/// flipped dataset and the flip log.
pub fn flip_negatives_to_positives(
    ds: &TabularDataset,
    group: Group,
    c_target: f64,
    seed: u64,
) -> Result<(TabularDataset, FlipLog)> {
    if c_target <= 0.0 {
        return Err(Error::Config(format!("c_target must be positive, got {c_target}")));
    }
    let ((na, pa), (nb, pb)) = ds.group_label_counts()?;
    let (n_g, pos_g, n_o, pos_o) = match group {
        Group::A => (na, pa, nb, pb),
        Group::B => (nb, pb, na, pa),
    };
    if n_g == 0 {
        return Err(Error::EmptyGroup(group));
    }
    if n_o == 0 {
        return Err(Error::EmptyGroup(group.other()));
    }
    if pos_o == 0 {
        return Err(Error::Degenerate(
            "prevalence ratio undefined: the reference group has no positives".into(),
        ));
    }
    let target = c_target * (pos_o as f64 / n_o as f64);
    let negatives_available = n_g - pos_g;
    // Smallest k with (pos_g + k) / n_g >= target, searched directly so the
    // result agrees with a recount under the same floating-point division.
    let mut k = ((target * n_g as f64).ceil() as i64 - pos_g as i64 - 2).max(0) as u64;
    while ((pos_g + k) as f64) / (n_g as f64) < target {
        k += 1;
        if k > negatives_available {
            return Err(Error::Infeasible(format!(
                "target ratio {c_target} needs {k} flips but only {negatives_available} negatives exist in group {group}"
            )));
        }
    }

    let groups = ds.groups().expect("group_label_counts checked protected");
    let labels = ds.labels();
    let eligible: Vec<usize> = (0..ds.n_rows())
        .filter(|&i| groups[i] == group && labels[i] == 0)
        .collect();
    let mut rng = SplitMix64::new(seed);
    let mut chosen: Vec<usize> = rng
        .choose_k(eligible.len(), k as usize)
        .into_iter()
        .map(|i| eligible[i])
        .collect();
    chosen.sort_unstable();

    let mut new_labels = labels.to_vec();
    let entries: Vec<FlipEntry> = chosen
        .iter()
        .map(|&row| {
            new_labels[row] = 1;
            FlipEntry { row, old: 0, new: 1 }
        })
        .collect();
    let flipped = ds.with_labels(new_labels)?;
    let log = FlipLog {
        group,
        entries,
        prevalence_a: flipped.prevalence(Some(Group::A))?,
        prevalence_b: flipped.prevalence(Some(Group::B))?,
    };
    Ok((flipped, log))
}

/// Flip uniformly chosen positives of the higher-prevalence group to
/// negative, choosing the flip count that minimizes the post-flip prevalence
/// difference. Equal prevalences yield an empty log, not an error.
pub fn flip_positives_to_negatives_equalize(
    ds: &TabularDataset,
    seed: u64,
) -> Result<(TabularDataset, FlipLog)> {
    let ((na, pa), (nb, pb)) = ds.group_label_counts()?;
    if na == 0 {
        return Err(Error::EmptyGroup(Group::A));
    }
    if nb == 0 {
        return Err(Error::EmptyGroup(Group::B));
    }
    let prev_a = pa as f64 / na as f64;
    let prev_b = pb as f64 / nb as f64;
    let (group, n_g, pos_g, p_o) = if prev_a >= prev_b {
        (Group::A, na, pa, prev_b)
    } else {
        (Group::B, nb, pb, prev_a)
    };

    let ideal = pos_g as f64 - n_g as f64 * p_o;
    let residual = |k: u64| ((pos_g - k) as f64 / n_g as f64 - p_o).abs();
    let mut k = 0u64;
    let mut best = residual(0);
    for cand in [ideal.floor(), ideal.ceil()] {
        if cand >= 0.0 && cand <= pos_g as f64 {
            let c = cand as u64;
            let r = residual(c);
            if r < best || (r == best && c < k) {
                best = r;
                k = c;
            }
        }
    }

    let groups = ds.groups().expect("group_label_counts checked protected");
    let labels = ds.labels();
    let eligible: Vec<usize> = (0..ds.n_rows())
        .filter(|&i| groups[i] == group && labels[i] == 1)
        .collect();
    let mut rng = SplitMix64::new(seed);
    let mut chosen: Vec<usize> = rng
        .choose_k(eligible.len(), k as usize)
        .into_iter()
        .map(|i| eligible[i])
        .collect();
    chosen.sort_unstable();

    let mut new_labels = labels.to_vec();
    let entries: Vec<FlipEntry> = chosen
        .iter()
        .map(|&row| {
            new_labels[row] = 0;
            FlipEntry { row, old: 1, new: 0 }
        })
        .collect();
    let flipped = ds.with_labels(new_labels)?;
    let log = FlipLog {
        group,
        entries,
        prevalence_a: flipped.prevalence(Some(Group::A))?,
        prevalence_b: flipped.prevalence(Some(Group::B))?,
    };
    Ok((flipped, log))
}

/// Apply one scenario to an already-split (train, test) pair, returning the
/// injected partitions and a manifest of achieved statistics.
///
/// The protected column is injected per partition, after the temporal split,
/// so the two partitions can carry different conditions. Sub-streams are
/// derived from the scenario seed: tag 1 for the train assignment, 2 for the
/// test assignment, 3 and 4 for any extra train/test randomness (features or
/// flips).
pub fn apply_scenario(
    train: &TabularDataset,
    test: &TabularDataset,
    scenario: &BiasScenario,
) -> Result<(TabularDataset, TabularDataset, InjectionManifest)> {
    scenario.validate()?;
    let seed = scenario.seed;
    let train_seed = derive_seed(seed, &[1]);
    let test_seed = derive_seed(seed, &[2]);
    let train_extra = derive_seed(seed, &[3]);
    let test_extra = derive_seed(seed, &[4]);

    let mut columns_added = vec![PROTECTED_COLUMN.to_string()];
    let mut flip_log = None;

    let (new_train, new_test) = match scenario.kind {
        ScenarioKind::Baseline => (
            assign_groups_independent(train, 0.5, train_seed)?,
            assign_groups_independent(test, 0.5, test_seed)?,
        ),
        ScenarioKind::H1 => (
            assign_groups_independent(train, scenario.s_a, train_seed)?,
            assign_groups_independent(test, scenario.s_a, test_seed)?,
        ),
        ScenarioKind::H21 => (
            assign_groups_prevalence(train, scenario.s_a, scenario.c, train_seed)?,
            assign_groups_prevalence(test, scenario.s_a, scenario.c, test_seed)?,
        ),
        ScenarioKind::H22TrainOnly => (
            assign_groups_prevalence(train, scenario.s_a, scenario.c, train_seed)?,
            assign_groups_independent(test, scenario.s_a, test_seed)?,
        ),
        ScenarioKind::H22TestOnly => (
            assign_groups_independent(train, scenario.s_a, train_seed)?,
            assign_groups_prevalence(test, scenario.s_a, scenario.c, test_seed)?,
        ),
        ScenarioKind::H3 => {
            let scheme = scenario.scheme.as_ref().expect("validated");
            let tr = assign_groups_independent(train, scenario.s_a, train_seed)?;
            let te = assign_groups_independent(test, scenario.s_a, test_seed)?;
            columns_added.extend(SEPARABILITY_COLUMNS.iter().map(|s| s.to_string()));
            (
                add_separability_features(&tr, scheme, train_extra)?,
                add_separability_features(&te, scheme, test_extra)?,
            )
        }
        ScenarioKind::H41 => {
            let tr = assign_groups_independent(train, scenario.s_a, train_seed)?;
            let te = assign_groups_independent(test, scenario.s_a, test_seed)?;
            let (tr, log) = flip_negatives_to_positives(&tr, Group::A, scenario.c, train_extra)?;
            flip_log = Some(log);
            (tr, te)
        }
        ScenarioKind::H42 => {
            let tr = assign_groups_prevalence(train, scenario.s_a, scenario.c, train_seed)?;
            let te = assign_groups_prevalence(test, scenario.s_a, scenario.c, test_seed)?;
            let (tr, log) = flip_positives_to_negatives_equalize(&tr, train_extra)?;
            flip_log = Some(log);
            (tr, te)
        }
    };

    let flip_count = flip_log.as_ref().map_or(0, FlipLog::len);
    let manifest = InjectionManifest {
        scenario: scenario.clone(),
        seed,
        train: PartitionStats::measure(&new_train, flip_count)?,
        test: PartitionStats::measure(&new_test, 0)?,
        columns_added,
        flip_log,
    };
    Ok((new_train, new_test, manifest))
}
