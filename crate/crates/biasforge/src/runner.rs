//! Configuration-driven orchestration of the full pipeline: base synthesis,
//! temporal split, multi-seed bias injection, auditing, the model grid, the
//! fixed-FPR evaluation, and report emission.
//!
//! One experiment = scenarios x replicates x algorithms x sampled specs x
//! awareness modes x target FPRs. Within a (scenario, replicate) cell the
//! fit tasks run on the worker pool; cells are processed in order and every
//! output file is written by this single orchestrator, so reruns of the same
//! config produce byte-identical reports regardless of scheduling.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::audit::{audit_dataset, compare_profiles, AuditResult, DEFAULT_ALPHA};
use crate::data::{Group, TabularDataset};
use crate::error::{Error, Result};
use crate::eval::{
    aggregate_error_bars, evaluate, roc_auc, select_top_per_seed, AggregateStat, SeedRun,
};
use crate::inject::{apply_scenario, BiasScenario, InjectionManifest, ScenarioKind, SeparabilityScheme};
use crate::learn::{
    fit_matrix, matrix::FeatureMatrix, predict_matrix, sample_hyperparams, Algorithm, ModelSpec,
};
use crate::par;
use crate::rng::derive_seed;
use crate::synth::{gen_base_dataset, BaseConfig};

const SPEC_STREAM: u64 = 0x5bec;
const CELL_STREAM: u64 = 0xce11;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Awareness {
    Aware,
    Unaware,
}

impl Awareness {
    pub fn as_bool(self) -> bool {
        matches!(self, Awareness::Aware)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Awareness::Aware => "aware",
            Awareness::Unaware => "unaware",
        }
    }
}

impl std::fmt::Display for Awareness {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Awareness {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "aware" => Ok(Awareness::Aware),
            "unaware" => Ok(Awareness::Unaware),
            _ => Err(Error::Config(format!("unknown awareness mode '{s}'"))),
        }
    }
}

/// A scenario without its per-replicate seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioTemplate {
    pub kind: ScenarioKind,
    #[serde(default = "default_s_a")]
    pub s_a: f64,
    #[serde(default = "default_c")]
    pub c: f64,
    #[serde(default)]
    pub scheme: Option<SeparabilityScheme>,
}

fn default_s_a() -> f64 {
    0.5
}

fn default_c() -> f64 {
    1.0
}

impl ScenarioTemplate {
    pub fn new(kind: ScenarioKind) -> Self {
        Self {
            kind,
            s_a: 0.5,
            c: 1.0,
            scheme: None,
        }
    }

    pub fn with_s_a(mut self, s_a: f64) -> Self {
        self.s_a = s_a;
        self
    }

    pub fn with_c(mut self, c: f64) -> Self {
        self.c = c;
        self
    }

    /// Stable label used in report rows.
    pub fn label(&self) -> String {
        let mut label = self.kind.to_string();
        if self.kind != ScenarioKind::Baseline {
            write!(label, "_sa{}", self.s_a).unwrap();
        }
        if matches!(
            self.kind,
            ScenarioKind::H21
                | ScenarioKind::H22TrainOnly
                | ScenarioKind::H22TestOnly
                | ScenarioKind::H41
                | ScenarioKind::H42
        ) {
            write!(label, "_c{}", self.c).unwrap();
        }
        label
    }

    /// Bind a seed, inserting the default separability scheme for `h3`
    /// templates that leave it unset.
    pub fn instantiate(&self, seed: u64) -> Result<BiasScenario> {
        let scheme = match (self.kind, &self.scheme) {
            (ScenarioKind::H3, None) => Some(SeparabilityScheme::default_scheme()),
            (_, s) => s.clone(),
        };
        let scenario = BiasScenario {
            kind: self.kind,
            s_a: self.s_a,
            c: self.c,
            scheme,
            seed,
        };
        scenario.validate()?;
        Ok(scenario)
    }
}

/// Full experiment description. Parsed from TOML for the command line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub base: BaseConfig,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    pub scenarios: Vec<ScenarioTemplate>,
    #[serde(default = "default_replicates")]
    pub replicates: u32,
    #[serde(default = "default_algorithms")]
    pub algorithms: Vec<Algorithm>,
    #[serde(default = "default_configs")]
    pub configs_per_algorithm: u32,
    #[serde(default = "default_awareness")]
    pub awareness_modes: Vec<Awareness>,
    #[serde(default = "default_target_fprs")]
    pub target_fprs: Vec<f64>,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_train_fraction() -> f64 {
    0.75
}

fn default_replicates() -> u32 {
    10
}

fn default_algorithms() -> Vec<Algorithm> {
    Algorithm::ALL.to_vec()
}

fn default_configs() -> u32 {
    50
}

fn default_awareness() -> Vec<Awareness> {
    vec![Awareness::Aware, Awareness::Unaware]
}

fn default_target_fprs() -> Vec<f64> {
    vec![0.05]
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("biasforge_out")
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("config parse: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config("train_fraction must lie in (0,1)".into()));
        }
        if self.scenarios.is_empty() {
            return Err(Error::Config("at least one scenario is required".into()));
        }
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be at least 1".into()));
        }
        if self.configs_per_algorithm == 0 {
            return Err(Error::Config("configs_per_algorithm must be at least 1".into()));
        }
        if self.algorithms.is_empty() {
            return Err(Error::Config("at least one algorithm is required".into()));
        }
        if self.awareness_modes.is_empty() {
            return Err(Error::Config("at least one awareness mode is required".into()));
        }
        if self.target_fprs.is_empty() {
            return Err(Error::Config("at least one target FPR is required".into()));
        }
        for &fpr in &self.target_fprs {
            if !(fpr > 0.0 && fpr < 1.0) {
                return Err(Error::Config(format!("target FPR {fpr} outside (0,1)")));
            }
        }
        let mut labels: Vec<String> = self.scenarios.iter().map(ScenarioTemplate::label).collect();
        labels.sort_unstable();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("duplicate scenario labels; vary their parameters".into()));
        }
        for template in &self.scenarios {
            template.instantiate(0)?;
        }
        Ok(())
    }
}

/// Injection seed for one (scenario, replicate) cell: a pure function of the
/// master seed and the two indices, so one scenario's parameters never
/// perturb another scenario's stream.
pub fn replicate_seed(master_seed: u64, scenario_idx: usize, replicate: u32) -> u64 {
    derive_seed(
        master_seed,
        &[CELL_STREAM, scenario_idx as u64, u64::from(replicate)],
    )
}

/// Seed for the hyperparameter sample of one algorithm.
pub fn spec_seed(master_seed: u64, algorithm: Algorithm) -> u64 {
    let ordinal = Algorithm::ALL
        .iter()
        .position(|&a| a == algorithm)
        .expect("algorithm in ALL") as u64;
    derive_seed(master_seed, &[SPEC_STREAM, ordinal])
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

fn fmt_opt_bool(v: Option<bool>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

/// One evaluated (cell, model, operating point) outcome.
#[derive(Clone, Debug)]
pub struct ResultRow {
    pub scenario: String,
    pub replicate: u32,
    pub injection_seed: u64,
    pub algorithm: Algorithm,
    pub awareness: Awareness,
    pub spec_id: String,
    pub target_fpr: f64,
    pub converged: bool,
    pub report: crate::eval::FairnessReport,
    pub auc_a: Option<f64>,
    pub auc_b: Option<f64>,
}

pub const RESULTS_HEADER: &str = "scenario,replicate,injection_seed,algorithm,awareness,spec_id,target_fpr,converged,threshold,global_tpr,global_fpr,tp_a,fp_a,tn_a,fn_a,tp_b,fp_b,tn_b,fn_b,prevalence_a,prevalence_b,fpr_a,fpr_b,fnr_a,fnr_b,ppv_a,ppv_b,auc_a,auc_b,log2_fpr_ratio,log2_fnr_ratio,log2_ppv_ratio,eighty_rule_fpr,eighty_rule_fnr,factor_prevalence_odds,factor_imprecision_odds,factor_recall,fpr_ratio,decomposition_residual";

impl ResultRow {
    pub fn to_csv_row(&self) -> String {
        let r = &self.report;
        let a = &r.group_a;
        let b = &r.group_b;
        let d = r.decomposition.as_ref();
        let mut out = String::new();
        write!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.scenario,
            self.replicate,
            self.injection_seed,
            self.algorithm,
            self.awareness,
            self.spec_id,
            self.target_fpr,
            self.converged,
            r.threshold,
            r.global_tpr,
            r.global_fpr
        )
        .unwrap();
        write!(
            out,
            ",{},{},{},{},{},{},{},{}",
            a.true_pos, a.false_pos, a.true_neg, a.false_neg, b.true_pos, b.false_pos, b.true_neg, b.false_neg
        )
        .unwrap();
        write!(
            out,
            ",{},{},{},{},{},{},{},{},{},{}",
            fmt_opt(a.prevalence()),
            fmt_opt(b.prevalence()),
            fmt_opt(a.fpr()),
            fmt_opt(b.fpr()),
            fmt_opt(a.fnr()),
            fmt_opt(b.fnr()),
            fmt_opt(a.ppv()),
            fmt_opt(b.ppv()),
            fmt_opt(self.auc_a),
            fmt_opt(self.auc_b)
        )
        .unwrap();
        write!(
            out,
            ",{},{},{},{},{}",
            fmt_opt(r.ratios.log2_fpr_ratio),
            fmt_opt(r.ratios.log2_fnr_ratio),
            fmt_opt(r.ratios.log2_ppv_ratio),
            fmt_opt_bool(r.ratios.eighty_rule_fpr),
            fmt_opt_bool(r.ratios.eighty_rule_fnr)
        )
        .unwrap();
        write!(
            out,
            ",{},{},{},{},{}",
            fmt_opt(d.map(|d| d.prevalence_odds)),
            fmt_opt(d.map(|d| d.imprecision_odds)),
            fmt_opt(d.map(|d| d.recall_ratio)),
            fmt_opt(d.map(|d| d.fpr_ratio)),
            fmt_opt(d.map(|d| d.residual))
        )
        .unwrap();
        out
    }
}

/// Median/min/max summary row for one (scenario, algorithm, awareness,
/// target FPR) group of per-seed top models.
#[derive(Clone, Debug)]
pub struct AggregateRow {
    pub scenario: String,
    pub algorithm: Algorithm,
    pub awareness: Awareness,
    pub target_fpr: f64,
    pub n_seeds: usize,
    pub tpr: AggregateStat,
    pub log2_fpr_ratio: Option<AggregateStat>,
    pub log2_fnr_ratio: Option<AggregateStat>,
    pub log2_ppv_ratio: Option<AggregateStat>,
}

pub const AGGREGATE_HEADER: &str = "scenario,algorithm,awareness,target_fpr,n_seeds,tpr_median,tpr_min,tpr_max,log2_fpr_median,log2_fpr_min,log2_fpr_max,log2_fpr_undefined,log2_fnr_median,log2_fnr_min,log2_fnr_max,log2_fnr_undefined,log2_ppv_median,log2_ppv_min,log2_ppv_max,log2_ppv_undefined";

impl AggregateRow {
    pub fn to_csv_row(&self) -> String {
        let stat = |s: &Option<AggregateStat>| -> String {
            match s {
                Some(s) => format!("{},{},{},{}", s.median, s.min, s.max, s.n_undefined),
                None => "NA,NA,NA,NA".to_string(),
            }
        };
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.scenario,
            self.algorithm,
            self.awareness,
            self.target_fpr,
            self.n_seeds,
            self.tpr.median,
            self.tpr.min,
            self.tpr.max,
            stat(&self.log2_fpr_ratio),
            stat(&self.log2_fnr_ratio),
            stat(&self.log2_ppv_ratio)
        )
    }
}

pub const AUDITS_HEADER: &str =
    "scenario,replicate,partition,condition,detected,statistic,p_value,alpha,effect,degenerate,differs";

#[derive(Clone, Debug)]
pub struct AuditRow {
    pub scenario: String,
    pub replicate: u32,
    pub partition: &'static str,
    pub condition: String,
    pub detected: bool,
    pub statistic: f64,
    pub p_value: f64,
    pub alpha: f64,
    pub effect: Option<f64>,
    pub degenerate: bool,
    pub differs: bool,
}

impl AuditRow {
    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.scenario,
            self.replicate,
            self.partition,
            self.condition,
            self.detected,
            self.statistic,
            self.p_value,
            self.alpha,
            fmt_opt(self.effect),
            self.degenerate,
            self.differs
        )
    }
}

/// Everything `run_experiment` leaves behind, plus in-memory aggregates for
/// callers that want to inspect the run programmatically.
#[derive(Debug)]
pub struct RunSummary {
    pub output_dir: PathBuf,
    pub results_path: PathBuf,
    pub aggregate_path: PathBuf,
    pub audits_path: PathBuf,
    pub plot_paths: Vec<PathBuf>,
    pub manifest_paths: Vec<PathBuf>,
    pub rows_written: usize,
    pub cells_total: usize,
    pub failed_cells: Vec<(String, String)>,
    pub aggregates: Vec<AggregateRow>,
}

impl RunSummary {
    pub fn any_failed(&self) -> bool {
        !self.failed_cells.is_empty()
    }

    /// Human-readable exit summary: one line per aggregate row.
    pub fn render(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "cells: {} ok, {} failed; {} result rows -> {}",
            self.cells_total - self.failed_cells.len(),
            self.failed_cells.len(),
            self.rows_written,
            self.results_path.display()
        )
        .unwrap();
        for agg in &self.aggregates {
            let ratio = agg
                .log2_fpr_ratio
                .as_ref()
                .map_or("NA".to_string(), |s| format!("{:.3}", s.median));
            writeln!(
                out,
                "  {} {} {} fpr@{}: median TPR {:.3} [{:.3},{:.3}], median log2 FPR ratio {}",
                agg.scenario,
                agg.algorithm,
                agg.awareness,
                agg.target_fpr,
                agg.tpr.median,
                agg.tpr.min,
                agg.tpr.max,
                ratio
            )
            .unwrap();
        }
        for (cell, err) in &self.failed_cells {
            writeln!(out, "  FAILED {cell}: {err}").unwrap();
        }
        out
    }
}

struct CellTask<'a> {
    algorithm: Algorithm,
    spec: &'a ModelSpec,
    awareness: Awareness,
}

struct CellOutput {
    rows: Vec<ResultRow>,
    audit_rows: Vec<AuditRow>,
    manifest: InjectionManifest,
}

#[allow(clippy::too_many_arguments)]
fn run_cell(
    train: &TabularDataset,
    test: &TabularDataset,
    scenario: &BiasScenario,
    label: &str,
    replicate: u32,
    cfg: &ExperimentConfig,
    specs: &[(Algorithm, Vec<ModelSpec>)],
) -> Result<CellOutput> {
    let (tr, te, manifest) = apply_scenario(train, test, scenario)?;

    let audits_train = audit_dataset(&tr, DEFAULT_ALPHA)?;
    let audits_test = audit_dataset(&te, DEFAULT_ALPHA)?;
    let comparison = compare_profiles(&audits_train, &audits_test)?;
    let mut audit_rows = Vec::new();
    for (partition, audits) in [("train", &audits_train), ("test", &audits_test)] {
        for r in audits.iter() {
            let differs = comparison
                .conditions
                .iter()
                .find(|c| c.condition == r.condition)
                .is_some_and(|c| c.differs);
            audit_rows.push(audit_row(label, replicate, partition, r, differs));
        }
    }

    let need = |mode: Awareness| cfg.awareness_modes.contains(&mode);
    let m_train_aware = need(Awareness::Aware)
        .then(|| FeatureMatrix::from_dataset(&tr, true))
        .transpose()?;
    let m_train_unaware = need(Awareness::Unaware)
        .then(|| FeatureMatrix::from_dataset(&tr, false))
        .transpose()?;
    let m_test_aware = need(Awareness::Aware)
        .then(|| FeatureMatrix::from_dataset(&te, true))
        .transpose()?;
    let m_test_unaware = need(Awareness::Unaware)
        .then(|| FeatureMatrix::from_dataset(&te, false))
        .transpose()?;

    let mut tasks = Vec::new();
    for &(algorithm, ref algo_specs) in specs {
        for spec in algo_specs {
            for &awareness in &cfg.awareness_modes {
                tasks.push(CellTask {
                    algorithm,
                    spec,
                    awareness,
                });
            }
        }
    }

    let test_labels = te.labels();
    let test_groups = te
        .groups()
        .ok_or_else(|| Error::MissingColumn("protected".into()))?;
    let outcomes: Vec<Result<Vec<ResultRow>>> = par::map(&tasks, |task| {
        let (m_tr, m_te) = match task.awareness {
            Awareness::Aware => (
                m_train_aware.as_ref().expect("built for requested mode"),
                m_test_aware.as_ref().expect("built for requested mode"),
            ),
            Awareness::Unaware => (
                m_train_unaware.as_ref().expect("built for requested mode"),
                m_test_unaware.as_ref().expect("built for requested mode"),
            ),
        };
        let spec = task.spec.clone().with_awareness(task.awareness.as_bool());
        let model = fit_matrix(&spec, m_tr, tr.labels())?;
        let scores = predict_matrix(&model, m_te)?;

        let mut scores_a = Vec::new();
        let mut labels_a = Vec::new();
        let mut scores_b = Vec::new();
        let mut labels_b = Vec::new();
        for ((&s, &y), &z) in scores.iter().zip(test_labels).zip(test_groups) {
            match z {
                Group::A => {
                    scores_a.push(s);
                    labels_a.push(y);
                }
                Group::B => {
                    scores_b.push(s);
                    labels_b.push(y);
                }
            }
        }
        let auc_a = roc_auc(&scores_a, &labels_a);
        let auc_b = roc_auc(&scores_b, &labels_b);

        let mut rows = Vec::with_capacity(cfg.target_fprs.len());
        for &target_fpr in &cfg.target_fprs {
            let report = evaluate(&scores, test_labels, test_groups, target_fpr)?;
            rows.push(ResultRow {
                scenario: label.to_string(),
                replicate,
                injection_seed: scenario.seed,
                algorithm: task.algorithm,
                awareness: task.awareness,
                spec_id: spec.spec_id(),
                target_fpr,
                converged: model.converged,
                report,
                auc_a,
                auc_b,
            });
        }
        Ok(rows)
    });

    let mut rows = Vec::with_capacity(tasks.len() * cfg.target_fprs.len());
    for outcome in outcomes {
        rows.extend(outcome?);
    }
    Ok(CellOutput {
        rows,
        audit_rows,
        manifest,
    })
}

fn audit_row(
    scenario: &str,
    replicate: u32,
    partition: &'static str,
    r: &AuditResult,
    differs: bool,
) -> AuditRow {
    AuditRow {
        scenario: scenario.to_string(),
        replicate,
        partition,
        condition: r.condition.to_string(),
        detected: r.detected,
        statistic: r.statistic,
        p_value: r.p_value,
        alpha: r.alpha,
        effect: r.effect,
        degenerate: r.degenerate,
        differs,
    }
}

/// Execute the full experiment. Cell failures are recorded and the run
/// continues; the summary lists them and `any_failed` drives the exit code.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunSummary> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.output_dir)?;
    let manifest_dir = cfg.output_dir.join("manifests");
    let plot_dir = cfg.output_dir.join("plot_data");
    fs::create_dir_all(&manifest_dir)?;
    fs::create_dir_all(&plot_dir)?;

    let base = gen_base_dataset(&cfg.base)?;
    let (train, test) = base.temporal_split(cfg.train_fraction)?;

    let specs: Vec<(Algorithm, Vec<ModelSpec>)> = cfg
        .algorithms
        .iter()
        .map(|&a| {
            sample_hyperparams(a, cfg.configs_per_algorithm, spec_seed(cfg.master_seed, a))
                .map(|s| (a, s))
        })
        .collect::<Result<_>>()?;

    let mut all_rows: Vec<ResultRow> = Vec::new();
    let mut all_audit_rows: Vec<AuditRow> = Vec::new();
    let mut manifest_paths = Vec::new();
    let mut failed_cells = Vec::new();
    let mut cells_total = 0usize;

    for (s_idx, template) in cfg.scenarios.iter().enumerate() {
        let label = template.label();
        for replicate in 0..cfg.replicates {
            cells_total += 1;
            let seed = replicate_seed(cfg.master_seed, s_idx, replicate);
            let cell_name = format!("{label}/replicate{replicate}");
            let outcome = template
                .instantiate(seed)
                .and_then(|scenario| {
                    run_cell(&train, &test, &scenario, &label, replicate, cfg, &specs)
                });
            match outcome {
                Ok(cell) => {
                    let path = manifest_dir.join(cell.manifest.file_name());
                    cell.manifest.write(&path)?;
                    manifest_paths.push(path);
                    all_rows.extend(cell.rows);
                    all_audit_rows.extend(cell.audit_rows);
                }
                Err(e) => failed_cells.push((cell_name, e.to_string())),
            }
        }
    }

    // aggregate per (scenario, algorithm, awareness, target_fpr), in config order
    let mut aggregates = Vec::new();
    for template in &cfg.scenarios {
        let label = template.label();
        for &(algorithm, _) in &specs {
            for &awareness in &cfg.awareness_modes {
                for &target_fpr in &cfg.target_fprs {
                    let runs: Vec<SeedRun> = all_rows
                        .iter()
                        .filter(|r| {
                            r.scenario == label
                                && r.algorithm == algorithm
                                && r.awareness == awareness
                                && r.target_fpr == target_fpr
                        })
                        .map(|r| SeedRun {
                            seed: u64::from(r.replicate),
                            spec_id: r.spec_id.clone(),
                            report: r.report.clone(),
                        })
                        .collect();
                    if runs.is_empty() {
                        continue;
                    }
                    let top = select_top_per_seed(&runs);
                    let agg = aggregate_error_bars(&top)?;
                    aggregates.push(AggregateRow {
                        scenario: label.clone(),
                        algorithm,
                        awareness,
                        target_fpr,
                        n_seeds: top.len(),
                        tpr: agg.tpr,
                        log2_fpr_ratio: agg.log2_fpr_ratio,
                        log2_fnr_ratio: agg.log2_fnr_ratio,
                        log2_ppv_ratio: agg.log2_ppv_ratio,
                    });
                }
            }
        }
    }

    let results_path = cfg.output_dir.join("results.csv");
    let mut results_text = String::from(RESULTS_HEADER);
    results_text.push('\n');
    for row in &all_rows {
        results_text.push_str(&row.to_csv_row());
        results_text.push('\n');
    }
    fs::write(&results_path, &results_text)?;

    let aggregate_path = cfg.output_dir.join("aggregate.csv");
    let mut agg_text = String::from(AGGREGATE_HEADER);
    agg_text.push('\n');
    for row in &aggregates {
        agg_text.push_str(&row.to_csv_row());
        agg_text.push('\n');
    }
    fs::write(&aggregate_path, &agg_text)?;

    let audits_path = cfg.output_dir.join("audits.csv");
    let mut audits_text = String::from(AUDITS_HEADER);
    audits_text.push('\n');
    for row in &all_audit_rows {
        audits_text.push_str(&row.to_csv_row());
        audits_text.push('\n');
    }
    fs::write(&audits_path, &audits_text)?;

    let plot_paths = emit_plot_data(&aggregates, &plot_dir)?;

    Ok(RunSummary {
        output_dir: cfg.output_dir.clone(),
        results_path,
        aggregate_path,
        audits_path,
        plot_paths,
        manifest_paths,
        rows_written: all_rows.len(),
        cells_total,
        failed_cells,
        aggregates,
    })
}

/// Emit error-bar plot data: one file per (ratio metric, target FPR), each
/// row carrying x = TPR median/min/max and y = ratio median/min/max, with
/// the 80%-rule band constants in the file header.
pub fn emit_plot_data(aggregates: &[AggregateRow], dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let metrics: [(&str, fn(&AggregateRow) -> Option<AggregateStat>); 3] = [
        ("log2_fpr_ratio", |a| a.log2_fpr_ratio),
        ("log2_fnr_ratio", |a| a.log2_fnr_ratio),
        ("log2_ppv_ratio", |a| a.log2_ppv_ratio),
    ];
    let mut fprs: Vec<f64> = aggregates.iter().map(|a| a.target_fpr).collect();
    fprs.sort_unstable_by(f64::total_cmp);
    fprs.dedup();

    let band = crate::eval::eighty_rule_band();
    let mut paths = Vec::new();
    for (metric, getter) in metrics {
        for &fpr in &fprs {
            let path = dir.join(format!("plot_{metric}_fpr{fpr}.csv"));
            let mut text = String::new();
            writeln!(text, "# eighty_rule_band_upper {band:.6}").unwrap();
            writeln!(text, "# eighty_rule_band_lower {:.6}", -band).unwrap();
            writeln!(
                text,
                "scenario,algorithm,awareness,tpr_median,tpr_min,tpr_max,ratio_median,ratio_min,ratio_max"
            )
            .unwrap();
            for agg in aggregates.iter().filter(|a| a.target_fpr == fpr) {
                let (rm, rlo, rhi) = match getter(agg) {
                    Some(s) => (s.median.to_string(), s.min.to_string(), s.max.to_string()),
                    None => ("NA".into(), "NA".into(), "NA".into()),
                };
                writeln!(
                    text,
                    "{},{},{},{},{},{},{},{},{}",
                    agg.scenario,
                    agg.algorithm,
                    agg.awareness,
                    agg.tpr.median,
                    agg.tpr.min,
                    agg.tpr.max,
                    rm,
                    rlo,
                    rhi
                )
                .unwrap();
            }
            fs::write(&path, &text)?;
            paths.push(path);
        }
    }
    Ok(paths)
}
