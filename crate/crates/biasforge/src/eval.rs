//! Fixed-FPR thresholding, group-wise confusion metrics, log2 fairness
//! ratios, the FPR-ratio decomposition, 80%-rule flags, and per-seed /
//! aggregate summaries.
//!
//! Ratios are reported in log2 and never as +-infinity: any zero or
//! undefined rate leaves the ratio undefined (`None`) and the report notes
//! the degenerate group.

use crate::data::Group;
use crate::error::{Error, Result};
use crate::stats::median;

/// Per-group confusion counts under the rule `score > threshold`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GroupConfusion {
    pub group: Group,
    pub true_pos: u64,
    pub false_pos: u64,
    pub true_neg: u64,
    pub false_neg: u64,
}

impl GroupConfusion {
    pub fn total(&self) -> u64 {
        self.true_pos + self.false_pos + self.true_neg + self.false_neg
    }

    pub fn positives(&self) -> u64 {
        self.true_pos + self.false_neg
    }

    pub fn negatives(&self) -> u64 {
        self.false_pos + self.true_neg
    }

    pub fn prevalence(&self) -> Option<f64> {
        (self.total() > 0).then(|| self.positives() as f64 / self.total() as f64)
    }

    pub fn fpr(&self) -> Option<f64> {
        (self.negatives() > 0).then(|| self.false_pos as f64 / self.negatives() as f64)
    }

    pub fn fnr(&self) -> Option<f64> {
        (self.positives() > 0).then(|| self.false_neg as f64 / self.positives() as f64)
    }

    pub fn tpr(&self) -> Option<f64> {
        self.fnr().map(|f| 1.0 - f)
    }

    pub fn ppv(&self) -> Option<f64> {
        (self.true_pos + self.false_pos > 0)
            .then(|| self.true_pos as f64 / (self.true_pos + self.false_pos) as f64)
    }
}

/// The inclusive 80%-rule band half-width: log2(1.25).
pub fn eighty_rule_band() -> f64 {
    1.25f64.log2()
}

/// Log2 ratios of group error rates (A over B) with 80%-rule flags.
/// A ratio is `None` whenever either side's rate is zero or undefined.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RatioReport {
    pub log2_fpr_ratio: Option<f64>,
    pub log2_fnr_ratio: Option<f64>,
    pub log2_ppv_ratio: Option<f64>,
    pub eighty_rule_fpr: Option<bool>,
    pub eighty_rule_fnr: Option<bool>,
}

fn log2_ratio(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        // computed as a difference of logs so that swapping the groups
        // negates the ratio exactly
        (Some(x), Some(y)) if x > 0.0 && y > 0.0 => Some(x.log2() - y.log2()),
        _ => None,
    }
}

/// Compute the three log2 ratios and the 80%-rule flags for a pair of group
/// confusions. Flags are true iff the ratio lies inside the inclusive band
/// [-log2(1.25), +log2(1.25)].
pub fn fairness_ratios(conf_a: &GroupConfusion, conf_b: &GroupConfusion) -> RatioReport {
    let band = eighty_rule_band();
    // representation slack keeps rates sitting exactly on the 0.8 / 1.25
    // boundary inside the band
    let in_band = |r: f64| r.abs() <= band + 1e-12;
    let fpr = log2_ratio(conf_a.fpr(), conf_b.fpr());
    let fnr = log2_ratio(conf_a.fnr(), conf_b.fnr());
    let ppv = log2_ratio(conf_a.ppv(), conf_b.ppv());
    RatioReport {
        log2_fpr_ratio: fpr,
        log2_fnr_ratio: fnr,
        log2_ppv_ratio: ppv,
        eighty_rule_fpr: fpr.map(in_band),
        eighty_rule_fnr: fnr.map(in_band),
    }
}

/// Multiplicative decomposition of the group FPR ratio:
///
/// FPR_A/FPR_B = prevalence_odds * imprecision_odds * recall_ratio
///
/// where prevalence_odds = [p_A/(1-p_A)] / [p_B/(1-p_B)],
/// imprecision_odds = [(1-PPV_A)/PPV_A] / [(1-PPV_B)/PPV_B], and
/// recall_ratio = (1-FNR_A)/(1-FNR_B). The identity is algebraic on exact
/// counts, so the relative residual stays below 1e-9.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Decomposition {
    pub prevalence_odds: f64,
    pub imprecision_odds: f64,
    pub recall_ratio: f64,
    pub fpr_ratio: f64,
    pub residual: f64,
}

pub fn decompose_fpr_ratio(
    conf_a: &GroupConfusion,
    conf_b: &GroupConfusion,
) -> Result<Decomposition> {
    let need = |v: Option<f64>, what: &str, g: Group| {
        v.ok_or_else(|| Error::Degenerate(format!("{what} undefined for group {g}")))
    };
    let p_a = need(conf_a.prevalence(), "prevalence", Group::A)?;
    let p_b = need(conf_b.prevalence(), "prevalence", Group::B)?;
    let ppv_a = need(conf_a.ppv(), "PPV", Group::A)?;
    let ppv_b = need(conf_b.ppv(), "PPV", Group::B)?;
    let fnr_a = need(conf_a.fnr(), "FNR", Group::A)?;
    let fnr_b = need(conf_b.fnr(), "FNR", Group::B)?;
    let fpr_a = need(conf_a.fpr(), "FPR", Group::A)?;
    let fpr_b = need(conf_b.fpr(), "FPR", Group::B)?;
    for (v, what, g) in [
        (1.0 - p_a, "1 - prevalence", Group::A),
        (1.0 - p_b, "1 - prevalence", Group::B),
        (ppv_a, "PPV", Group::A),
        (ppv_b, "PPV", Group::B),
        (1.0 - fnr_b, "recall", Group::B),
        (p_b, "prevalence", Group::B),
        (fpr_b, "FPR", Group::B),
        (fpr_a, "FPR", Group::A),
    ] {
        if v == 0.0 {
            return Err(Error::Degenerate(format!("{what} is zero for group {g}")));
        }
    }
    let prevalence_odds = (p_a / (1.0 - p_a)) / (p_b / (1.0 - p_b));
    let imprecision_odds = ((1.0 - ppv_a) / ppv_a) / ((1.0 - ppv_b) / ppv_b);
    let recall_ratio = (1.0 - fnr_a) / (1.0 - fnr_b);
    let fpr_ratio = fpr_a / fpr_b;
    let product = prevalence_odds * imprecision_odds * recall_ratio;
    let residual = (product - fpr_ratio).abs() / fpr_ratio;
    Ok(Decomposition {
        prevalence_odds,
        imprecision_odds,
        recall_ratio,
        fpr_ratio,
        residual,
    })
}

/// Smallest threshold t such that the achieved global FPR under the rule
/// `score > t` does not exceed `target_fpr`. Tied scores are never split, so
/// the achieved FPR is the largest feasible value not above the target.
pub fn threshold_at_global_fpr(scores: &[f64], labels: &[u8], target_fpr: f64) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Dataset("scores and labels differ in length".into()));
    }
    if !(target_fpr > 0.0 && target_fpr < 1.0) {
        return Err(Error::Config(format!(
            "target_fpr must lie in (0,1), got {target_fpr}"
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Dataset("non-finite score".into()));
    }
    let mut neg: Vec<f64> = scores
        .iter()
        .zip(labels)
        .filter(|(_, &y)| y == 0)
        .map(|(&s, _)| s)
        .collect();
    if neg.is_empty() {
        return Err(Error::Degenerate("no negative labels: FPR undefined".into()));
    }
    neg.sort_unstable_by(|a, b| a.total_cmp(b));
    let n = neg.len();
    // Candidate thresholds are the distinct negative scores, scanned in
    // ascending order; FPR(neg[i]) = (count of negatives > neg[i]) / n is
    // non-increasing along the scan, so the first feasible candidate is the
    // smallest feasible threshold.
    let mut i = 0;
    while i < n {
        let v = neg[i];
        let mut j = i;
        while j < n && neg[j] == v {
            j += 1;
        }
        let fpr = (n - j) as f64 / n as f64;
        if fpr <= target_fpr {
            return Ok(v);
        }
        i = j;
    }
    unreachable!("the largest negative score always achieves FPR 0");
}

/// Group confusion counts at a threshold. Both groups must be non-empty;
/// a group with no negatives simply reports an undefined FPR.
pub fn group_confusion(
    scores: &[f64],
    labels: &[u8],
    groups: &[Group],
    threshold: f64,
) -> Result<(GroupConfusion, GroupConfusion)> {
    if scores.len() != labels.len() || scores.len() != groups.len() {
        return Err(Error::Dataset("scores, labels, groups differ in length".into()));
    }
    let mut confs = [
        GroupConfusion {
            group: Group::A,
            true_pos: 0,
            false_pos: 0,
            true_neg: 0,
            false_neg: 0,
        },
        GroupConfusion {
            group: Group::B,
            true_pos: 0,
            false_pos: 0,
            true_neg: 0,
            false_neg: 0,
        },
    ];
    for ((&s, &y), &z) in scores.iter().zip(labels).zip(groups) {
        let conf = &mut confs[usize::from(z == Group::B)];
        let predicted_pos = s > threshold;
        match (y == 1, predicted_pos) {
            (true, true) => conf.true_pos += 1,
            (true, false) => conf.false_neg += 1,
            (false, true) => conf.false_pos += 1,
            (false, false) => conf.true_neg += 1,
        }
    }
    let [a, b] = confs;
    if a.total() == 0 {
        return Err(Error::EmptyGroup(Group::A));
    }
    if b.total() == 0 {
        return Err(Error::EmptyGroup(Group::B));
    }
    Ok((a, b))
}

/// Complete fairness evaluation of one score vector at one operating point.
#[derive(Clone, Debug, PartialEq)]
pub struct FairnessReport {
    pub threshold: f64,
    pub global_tpr: f64,
    pub global_fpr: f64,
    pub group_a: GroupConfusion,
    pub group_b: GroupConfusion,
    pub ratios: RatioReport,
    /// Present only when every quantity in the identity is defined.
    pub decomposition: Option<Decomposition>,
}

/// Threshold at the target global FPR, then compute group confusions,
/// ratios, and the decomposition.
pub fn evaluate(
    scores: &[f64],
    labels: &[u8],
    groups: &[Group],
    target_fpr: f64,
) -> Result<FairnessReport> {
    let threshold = threshold_at_global_fpr(scores, labels, target_fpr)?;
    let (group_a, group_b) = group_confusion(scores, labels, groups, threshold)?;
    let (mut tp, mut fp, mut pos, mut neg) = (0u64, 0u64, 0u64, 0u64);
    for (&s, &y) in scores.iter().zip(labels) {
        if y == 1 {
            pos += 1;
            tp += u64::from(s > threshold);
        } else {
            neg += 1;
            fp += u64::from(s > threshold);
        }
    }
    if pos == 0 {
        return Err(Error::Degenerate("no positive labels: TPR undefined".into()));
    }
    Ok(FairnessReport {
        threshold,
        global_tpr: tp as f64 / pos as f64,
        global_fpr: fp as f64 / neg as f64,
        group_a,
        group_b,
        ratios: fairness_ratios(&group_a, &group_b),
        decomposition: decompose_fpr_ratio(&group_a, &group_b).ok(),
    })
}

/// Area under the ROC curve by the rank-sum (Mann-Whitney) formulation with
/// midrank tie handling. `None` when either class is absent.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Option<f64> {
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_unstable_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // midrank of the tie block, 1-based
        let midrank = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            if labels[idx] == 1 {
                rank_sum_pos += midrank;
            }
        }
        i = j;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos as f64 * n_neg as f64))
}

/// One evaluated run, keyed by its dataset seed (replicate).
#[derive(Clone, Debug)]
pub struct SeedRun {
    pub seed: u64,
    pub spec_id: String,
    pub report: FairnessReport,
}

/// Keep, per seed, the run maximizing global TPR. Ties break toward the
/// smaller |log2 FPR ratio| (undefined ranks last), then lexicographically
/// smaller spec id.
pub fn select_top_per_seed(runs: &[SeedRun]) -> Vec<SeedRun> {
    let better = |cand: &SeedRun, best: &SeedRun| -> bool {
        if cand.report.global_tpr != best.report.global_tpr {
            return cand.report.global_tpr > best.report.global_tpr;
        }
        let key = |r: &SeedRun| {
            r.report
                .ratios
                .log2_fpr_ratio
                .map_or(f64::INFINITY, f64::abs)
        };
        let (ck, bk) = (key(cand), key(best));
        if ck != bk {
            return ck < bk;
        }
        cand.spec_id < best.spec_id
    };
    let mut best_per_seed: Vec<SeedRun> = Vec::new();
    for run in runs {
        match best_per_seed.iter_mut().find(|r| r.seed == run.seed) {
            None => best_per_seed.push(run.clone()),
            Some(best) => {
                if better(run, best) {
                    *best = run.clone();
                }
            }
        }
    }
    best_per_seed.sort_by_key(|r| r.seed);
    best_per_seed
}

/// Median / min / max summary of one metric across seeds, with the count of
/// seeds where the metric was undefined.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AggregateStat {
    pub median: f64,
    pub min: f64,
    pub max: f64,
    pub n_defined: usize,
    pub n_undefined: usize,
}

fn aggregate_metric(values: &[Option<f64>]) -> Option<AggregateStat> {
    let defined: Vec<f64> = values.iter().flatten().copied().collect();
    if defined.is_empty() {
        return None;
    }
    Some(AggregateStat {
        median: median(&defined),
        min: defined.iter().copied().fold(f64::INFINITY, f64::min),
        max: defined.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        n_defined: defined.len(),
        n_undefined: values.len() - defined.len(),
    })
}

/// Error-bar aggregation of per-seed top models.
#[derive(Clone, Debug)]
pub struct AggregateResult {
    pub per_seed: Vec<SeedRun>,
    pub tpr: AggregateStat,
    pub log2_fpr_ratio: Option<AggregateStat>,
    pub log2_fnr_ratio: Option<AggregateStat>,
    pub log2_ppv_ratio: Option<AggregateStat>,
}

pub fn aggregate_error_bars(top_runs: &[SeedRun]) -> Result<AggregateResult> {
    if top_runs.is_empty() {
        return Err(Error::Dataset("no runs to aggregate".into()));
    }
    let tpr = aggregate_metric(
        &top_runs
            .iter()
            .map(|r| Some(r.report.global_tpr))
            .collect::<Vec<_>>(),
    )
    .expect("TPR always defined");
    let grab = |f: fn(&RatioReport) -> Option<f64>| {
        aggregate_metric(&top_runs.iter().map(|r| f(&r.report.ratios)).collect::<Vec<_>>())
    };
    Ok(AggregateResult {
        per_seed: top_runs.to_vec(),
        tpr,
        log2_fpr_ratio: grab(|r| r.log2_fpr_ratio),
        log2_fnr_ratio: grab(|r| r.log2_fnr_ratio),
        log2_ppv_ratio: grab(|r| r.log2_ppv_ratio),
    })
}
