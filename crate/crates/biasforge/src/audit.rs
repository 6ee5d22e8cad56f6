//! Statistical detectors that decide, from data alone, which bias conditions
//! a dataset satisfies.
//!
//! * group-size disparity: two-sided binomial test of P[Z=A] = 1/2
//!   (exact below 1000 rows, normal approximation above);
//! * prevalence disparity: pooled two-proportion z-test of
//!   P[Y=1|A] = P[Y=1|B];
//! * class-conditional disparity: per (feature, class) two-sample
//!   Kolmogorov-Smirnov tests for real features and Pearson chi-square for
//!   binary features, Bonferroni-corrected by 2 x feature count;
//! * protected-attribute bias: the disjunction of the prevalence and
//!   class-conditional detections. A group-size imbalance alone does not
//!   make the protected attribute informative, so it is excluded.
//!
//! Label noise is undetectable from a single observed dataset and has no
//! detector here; it is verified against a flip log upstream.

use std::fmt;

use crate::data::{Column, Group, TabularDataset};
use crate::error::{Error, Result};
use crate::stats;

pub const DEFAULT_ALPHA: f64 = 0.01;

/// Minimum rows per (group, class) cell for a class-conditional test.
pub const MIN_CELL_ROWS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BiasCondition {
    GroupSizeDisparity,
    PrevalenceDisparity,
    ClassConditionalDisparity,
    ProtectedAttributeBias,
}

impl BiasCondition {
    pub fn as_str(self) -> &'static str {
        match self {
            BiasCondition::GroupSizeDisparity => "group_size_disparity",
            BiasCondition::PrevalenceDisparity => "prevalence_disparity",
            BiasCondition::ClassConditionalDisparity => "class_conditional_disparity",
            BiasCondition::ProtectedAttributeBias => "protected_attribute_bias",
        }
    }
}

impl fmt::Display for BiasCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One per-(feature, class) test inside the class-conditional detector.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureTestDetail {
    pub feature: String,
    pub class: u8,
    pub statistic: f64,
    pub p_raw: f64,
    pub p_corrected: f64,
    pub skipped: bool,
    pub note: String,
}

/// Outcome of one detector.
#[derive(Clone, Debug, PartialEq)]
pub struct AuditResult {
    pub condition: BiasCondition,
    pub statistic: f64,
    pub p_value: f64,
    pub alpha: f64,
    pub detected: bool,
    /// Interpretable effect size: group fraction of A, prevalence ratio A/B,
    /// or the largest KS distance, depending on the condition.
    pub effect: Option<f64>,
    /// Set when the verdict came from a degenerate configuration (such as a
    /// one-group dataset) rather than a tail probability.
    pub degenerate: bool,
    pub detail: Vec<FeatureTestDetail>,
}

fn require_groups(ds: &TabularDataset) -> Result<&[Group]> {
    ds.groups()
        .ok_or_else(|| Error::MissingColumn("protected".into()))
}

/// Two-sided test of equal group sizes. A dataset with one group entirely
/// absent is reported as detected with p = 0 and the degeneracy flag set.
pub fn audit_group_size(ds: &TabularDataset, alpha: f64) -> Result<AuditResult> {
    let groups = require_groups(ds)?;
    let n = groups.len() as u64;
    if n == 0 {
        return Err(Error::Dataset("empty dataset".into()));
    }
    let k = groups.iter().filter(|&&z| z == Group::A).count() as u64;
    let fraction_a = k as f64 / n as f64;
    if k == 0 || k == n {
        return Ok(AuditResult {
            condition: BiasCondition::GroupSizeDisparity,
            statistic: n as f64,
            p_value: 0.0,
            alpha,
            detected: true,
            effect: Some(fraction_a),
            degenerate: true,
            detail: Vec::new(),
        });
    }
    let (z, p) = stats::binomial_test_two_sided(k, n, 0.5);
    Ok(AuditResult {
        condition: BiasCondition::GroupSizeDisparity,
        statistic: z,
        p_value: p,
        alpha,
        detected: p < alpha,
        effect: Some(fraction_a),
        degenerate: false,
        detail: Vec::new(),
    })
}

/// Pooled two-proportion z-test of equal group prevalences. Reports the
/// empirical prevalence ratio A/B as the effect size.
pub fn audit_prevalence(ds: &TabularDataset, alpha: f64) -> Result<AuditResult> {
    require_groups(ds)?;
    let ((na, pa), (nb, pb)) = ds.group_label_counts()?;
    if na == 0 {
        return Err(Error::EmptyGroup(Group::A));
    }
    if nb == 0 {
        return Err(Error::EmptyGroup(Group::B));
    }
    let (z, p) = stats::two_proportion_z_test(pa, na, pb, nb);
    let ratio = (pb > 0).then(|| (pa as f64 / na as f64) / (pb as f64 / nb as f64));
    Ok(AuditResult {
        condition: BiasCondition::PrevalenceDisparity,
        statistic: z,
        p_value: p,
        alpha,
        detected: p < alpha,
        effect: ratio,
        degenerate: false,
        detail: Vec::new(),
    })
}

/// Per-(feature, class) distribution tests of f|y,A against f|y,B with
/// Bonferroni correction by 2 x feature count. Real features use the
/// two-sample KS test; binary features use a chi-square on the within-class
/// contingency table. Cells with fewer than [`MIN_CELL_ROWS`] rows in either
/// group are skipped and flagged in the detail.
pub fn audit_class_conditional(ds: &TabularDataset, alpha: f64) -> Result<AuditResult> {
    let groups = require_groups(ds)?;
    let labels = ds.labels();
    let protected_name = ds.protected_name().unwrap_or_default().to_string();

    let mut feature_names: Vec<String> = ds
        .columns()
        .filter(|(name, col)| {
            *name != ds.label_name()
                && *name != ds.time_name()
                && *name != protected_name
                && matches!(col, Column::Real(_) | Column::Binary(_))
        })
        .map(|(name, _)| name.to_string())
        .collect();
    feature_names.sort_unstable();
    if feature_names.is_empty() {
        return Err(Error::Dataset(
            "class-conditional audit needs at least one non-protected feature".into(),
        ));
    }
    let correction = 2 * feature_names.len() as u64;

    // (group, class) cell occupancy
    let mut cell_counts = [[0usize; 2]; 2]; // [z][y]
    for (&z, &y) in groups.iter().zip(labels) {
        cell_counts[usize::from(z == Group::B)][usize::from(y == 1)] += 1;
    }

    let mut detail = Vec::with_capacity(feature_names.len() * 2);
    for name in &feature_names {
        let col = ds.column(name).expect("listed above");
        for y in [0u8, 1u8] {
            let small_a = cell_counts[0][usize::from(y == 1)] < MIN_CELL_ROWS;
            let small_b = cell_counts[1][usize::from(y == 1)] < MIN_CELL_ROWS;
            if small_a || small_b {
                detail.push(FeatureTestDetail {
                    feature: name.clone(),
                    class: y,
                    statistic: 0.0,
                    p_raw: 1.0,
                    p_corrected: 1.0,
                    skipped: true,
                    note: format!(
                        "cell (group {}, y={y}) below {MIN_CELL_ROWS} rows",
                        if small_a { Group::A } else { Group::B }
                    ),
                });
                continue;
            }
            let (statistic, p_raw, note) = match col {
                Column::Real(v) => {
                    let mut xs = Vec::new();
                    let mut ys = Vec::new();
                    for ((&val, &z), &lab) in v.iter().zip(groups).zip(labels) {
                        if lab == y {
                            match z {
                                Group::A => xs.push(val),
                                Group::B => ys.push(val),
                            }
                        }
                    }
                    let (d, p) = stats::ks_two_sample(&xs, &ys);
                    (d, p, "ks")
                }
                Column::Binary(v) => {
                    // within class y: rows = feature value, columns = group
                    let (mut a, mut b, mut c, mut d) = (0u64, 0u64, 0u64, 0u64);
                    for ((&val, &z), &lab) in v.iter().zip(groups).zip(labels) {
                        if lab == y {
                            match (val, z) {
                                (1, Group::A) => a += 1,
                                (1, Group::B) => b += 1,
                                (_, Group::A) => c += 1,
                                (_, Group::B) => d += 1,
                            }
                        }
                    }
                    let (stat, p) = stats::chi_square_2x2(a, b, c, d);
                    (stat, p, "chi2")
                }
                _ => unreachable!("filtered to real/binary above"),
            };
            let p_corrected = (p_raw * correction as f64).min(1.0);
            detail.push(FeatureTestDetail {
                feature: name.clone(),
                class: y,
                statistic,
                p_raw,
                p_corrected,
                skipped: false,
                note: note.to_string(),
            });
        }
    }

    let best = detail
        .iter()
        .filter(|t| !t.skipped)
        .min_by(|a, b| a.p_corrected.total_cmp(&b.p_corrected));
    let (statistic, p_value) = best.map_or((0.0, 1.0), |t| (t.statistic, t.p_corrected));
    let effect = detail
        .iter()
        .filter(|t| !t.skipped && t.note == "ks")
        .map(|t| t.statistic)
        .fold(None, |acc: Option<f64>, s| Some(acc.map_or(s, |a| a.max(s))));
    Ok(AuditResult {
        condition: BiasCondition::ClassConditionalDisparity,
        statistic,
        p_value,
        alpha,
        detected: p_value < alpha,
        effect,
        degenerate: false,
        detail,
    })
}

/// Run all detectors and append the composite protected-attribute-bias
/// verdict (prevalence or class-conditional disparity; group size alone does
/// not qualify).
pub fn audit_dataset(ds: &TabularDataset, alpha: f64) -> Result<Vec<AuditResult>> {
    let group_size = audit_group_size(ds, alpha)?;
    let prevalence = audit_prevalence(ds, alpha)?;
    let class_conditional = audit_class_conditional(ds, alpha)?;
    let (statistic, p_value) = if prevalence.p_value <= class_conditional.p_value {
        (prevalence.statistic, prevalence.p_value)
    } else {
        (class_conditional.statistic, class_conditional.p_value)
    };
    let composite = AuditResult {
        condition: BiasCondition::ProtectedAttributeBias,
        statistic,
        p_value,
        alpha,
        detected: prevalence.detected || class_conditional.detected,
        effect: None,
        degenerate: false,
        detail: Vec::new(),
    };
    Ok(vec![group_size, prevalence, class_conditional, composite])
}

/// Per-condition disagreement between two audit profiles.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionDisparity {
    pub condition: BiasCondition,
    pub train_detected: bool,
    pub test_detected: bool,
    pub differs: bool,
}

/// Comparison of train and test audit profiles: the measurable counterpart
/// of a train/test bias mismatch.
#[derive(Clone, Debug, PartialEq)]
pub struct ProfileComparison {
    pub conditions: Vec<ConditionDisparity>,
    pub any_differs: bool,
}

pub fn compare_profiles(
    train_audit: &[AuditResult],
    test_audit: &[AuditResult],
) -> Result<ProfileComparison> {
    if train_audit.len() != test_audit.len() {
        return Err(Error::Dataset("mismatched audit condition sets".into()));
    }
    let mut conditions = Vec::with_capacity(train_audit.len());
    for (tr, te) in train_audit.iter().zip(test_audit) {
        if tr.condition != te.condition {
            return Err(Error::Dataset("mismatched audit condition sets".into()));
        }
        if tr.alpha != te.alpha {
            return Err(Error::Dataset("profiles audited at different alpha".into()));
        }
        conditions.push(ConditionDisparity {
            condition: tr.condition,
            train_detected: tr.detected,
            test_detected: te.detected,
            differs: tr.detected != te.detected,
        });
    }
    let any_differs = conditions.iter().any(|c| c.differs);
    Ok(ProfileComparison {
        conditions,
        any_differs,
    })
}

/// Render an audit profile as key/value text.
pub fn render_audit_report(results: &[AuditResult]) -> String {
    use std::fmt::Write;
    let mut out = String::from("biasforge audit v1\n");
    for r in results {
        writeln!(out, "\n[{}]", r.condition).unwrap();
        writeln!(out, "detected {}", r.detected).unwrap();
        writeln!(out, "statistic {}", r.statistic).unwrap();
        writeln!(out, "p_value {}", r.p_value).unwrap();
        writeln!(out, "alpha {}", r.alpha).unwrap();
        if let Some(e) = r.effect {
            writeln!(out, "effect {e}").unwrap();
        }
        if r.degenerate {
            writeln!(out, "degenerate true").unwrap();
        }
        if !r.detail.is_empty() {
            writeln!(out, "feature class test statistic p_raw p_corrected skipped").unwrap();
            for t in &r.detail {
                writeln!(
                    out,
                    "{} {} {} {} {} {} {}",
                    t.feature, t.class, t.note, t.statistic, t.p_raw, t.p_corrected, t.skipped
                )
                .unwrap();
            }
        }
    }
    out
}
