//! Cross-module integration: the full experiment loop at small scale,
//! byte-determinism of report files, and learner comparisons on injected
//! data.

use biasforge::data::Group;
use biasforge::eval::roc_auc;
use biasforge::inject::{apply_scenario, BiasScenario, ScenarioKind};
use biasforge::learn::{fit, predict, sample_hyperparams, Algorithm, GbtParams, HyperParams, LogRegParams, ModelSpec};
use biasforge::runner::{run_experiment, Awareness, ExperimentConfig, ScenarioTemplate};
use biasforge::stats::median;
use biasforge::synth::{gen_base_dataset, BaseConfig};

fn small_config(outdir: std::path::PathBuf) -> ExperimentConfig {
    ExperimentConfig {
        base: BaseConfig {
            n_rows: 4_000,
            base_prevalence: 0.05,
            n_informative: 3,
            n_noise: 1,
            class_separation: 1.0,
            drift_shift: 0.1,
            drift_fraction: 0.25,
            seed: 11,
        },
        train_fraction: 0.75,
        scenarios: vec![
            ScenarioTemplate::new(ScenarioKind::Baseline),
            ScenarioTemplate::new(ScenarioKind::H21).with_s_a(0.5).with_c(2.0),
        ],
        replicates: 2,
        algorithms: vec![Algorithm::LogReg, Algorithm::Tree],
        configs_per_algorithm: 2,
        awareness_modes: vec![Awareness::Aware, Awareness::Unaware],
        target_fprs: vec![0.05],
        master_seed: 99,
        output_dir: outdir,
    }
}

#[test]
fn experiment_produces_expected_row_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path().join("run"));
    let summary = run_experiment(&cfg).unwrap();
    assert!(summary.failed_cells.is_empty(), "{:?}", summary.failed_cells);
    assert_eq!(summary.cells_total, 4);

    // 2 scenarios x 2 replicates x 2 algorithms x 2 specs x 2 modes x 1 fpr
    let results = std::fs::read_to_string(&summary.results_path).unwrap();
    assert_eq!(results.lines().count() - 1, 32);
    assert!(results.starts_with("scenario,replicate,"));

    // aggregates: one row per (scenario, algorithm, mode, fpr)
    let agg = std::fs::read_to_string(&summary.aggregate_path).unwrap();
    assert_eq!(agg.lines().count() - 1, 8);

    // audits: per cell, two partitions, four conditions
    let audits = std::fs::read_to_string(&summary.audits_path).unwrap();
    assert_eq!(audits.lines().count() - 1, 4 * 2 * 4);

    // manifests: one per cell; plot data: three metrics x one fpr
    assert_eq!(summary.manifest_paths.len(), 4);
    assert_eq!(summary.plot_paths.len(), 3);
    for p in &summary.plot_paths {
        let text = std::fs::read_to_string(p).unwrap();
        assert!(text.contains("# eighty_rule_band_upper 0.321928"));
        assert!(text.contains("# eighty_rule_band_lower -0.321928"));
        // 8 aggregate rows under each metric file
        assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count() - 1, 8);
    }
}

#[test]
fn rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let first = run_experiment(&small_config(dir.path().join("a"))).unwrap();
    let second = run_experiment(&small_config(dir.path().join("b"))).unwrap();
    for (p1, p2) in [
        (&first.results_path, &second.results_path),
        (&first.aggregate_path, &second.aggregate_path),
        (&first.audits_path, &second.audits_path),
    ] {
        let a = std::fs::read(p1).unwrap();
        let b = std::fs::read(p2).unwrap();
        assert_eq!(a, b, "{} differs across reruns", p1.display());
    }
    for (m1, m2) in first.manifest_paths.iter().zip(&second.manifest_paths) {
        assert_eq!(
            std::fs::read(m1).unwrap(),
            std::fs::read(m2).unwrap(),
            "manifest differs"
        );
    }
}

#[test]
fn single_cell_rows_reproducible_in_isolation() {
    // every results row can be recomputed by re-running its cell alone
    let dir = tempfile::tempdir().unwrap();
    let full = small_config(dir.path().join("full"));
    let summary = run_experiment(&full).unwrap();
    let full_rows = std::fs::read_to_string(&summary.results_path).unwrap();

    let mut solo = small_config(dir.path().join("solo"));
    solo.scenarios = vec![full.scenarios[1].clone()];
    // scenario index changes, so reuse the same derived seed by keeping the
    // scenario at its original position via a placeholder
    solo.scenarios.insert(0, full.scenarios[0].clone());
    solo.replicates = full.replicates;
    let solo_summary = run_experiment(&solo).unwrap();
    let solo_rows = std::fs::read_to_string(&solo_summary.results_path).unwrap();
    // identical config -> identical rows for the shared scenario
    let pick = |text: &str| -> Vec<String> {
        text.lines()
            .filter(|l| l.starts_with("h2_1"))
            .map(str::to_string)
            .collect()
    };
    assert_eq!(pick(&full_rows), pick(&solo_rows));
}

#[test]
fn failed_cell_recorded_and_run_continues() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path().join("fail"));
    // an h4_1 target far beyond the available negatives fails injection
    cfg.scenarios = vec![
        ScenarioTemplate::new(ScenarioKind::Baseline),
        ScenarioTemplate::new(ScenarioKind::H41).with_c(50.0),
    ];
    let summary = run_experiment(&cfg).unwrap();
    assert_eq!(summary.failed_cells.len(), 2); // both replicates of h4_1
    assert!(summary.any_failed());
    // baseline cells still produced rows
    let results = std::fs::read_to_string(&summary.results_path).unwrap();
    assert_eq!(results.lines().filter(|l| l.starts_with("baseline")).count(), 16);
}

fn h3_pair(seed: u64) -> (biasforge::TabularDataset, biasforge::TabularDataset) {
    let base = gen_base_dataset(&BaseConfig {
        n_rows: 20_000,
        base_prevalence: 0.03,
        n_informative: 2,
        n_noise: 1,
        class_separation: 0.5,
        drift_shift: 0.0,
        drift_fraction: 0.0,
        seed,
    })
    .unwrap();
    let (train, test) = base.temporal_split(0.75).unwrap();
    let scenario = BiasScenario {
        kind: ScenarioKind::H3,
        s_a: 0.5,
        c: 1.0,
        scheme: Some(biasforge::SeparabilityScheme::default_scheme()),
        seed,
    };
    let (tr, te, _) = apply_scenario(&train, &test, &scenario).unwrap();
    (tr, te)
}

#[test]
fn gbt_beats_logreg_on_nonlinear_boundary() {
    // the injected separability features interact with the group code, which
    // an additive logistic model cannot express
    let mut gbt_aucs = Vec::new();
    let mut logreg_aucs = Vec::new();
    for seed in 0..5 {
        let (tr, te) = h3_pair(1000 + seed);
        let gbt_spec = ModelSpec {
            params: HyperParams::Gbt(GbtParams {
                n_rounds: 100,
                learning_rate: 0.1,
                max_depth: 4,
                subsample: 1.0,
            }),
            awareness: true,
            seed,
        };
        let lr_spec = ModelSpec {
            params: HyperParams::LogReg(LogRegParams {
                learning_rate: 0.05,
                l2: 1e-4,
                epochs: 60,
            }),
            awareness: true,
            seed,
        };
        let gbt = fit(&gbt_spec, &tr).unwrap();
        let lr = fit(&lr_spec, &tr).unwrap();
        gbt_aucs.push(roc_auc(&predict(&gbt, &te).unwrap(), te.labels()).unwrap());
        logreg_aucs.push(roc_auc(&predict(&lr, &te).unwrap(), te.labels()).unwrap());
    }
    let (g, l) = (median(&gbt_aucs), median(&logreg_aucs));
    assert!(g > l, "gbt median auc {g} not above logreg {l}");
}

#[test]
fn separability_auc_is_monotone_in_class_separation() {
    let auc_at = |sep: f64, seed: u64| -> f64 {
        let base = gen_base_dataset(&BaseConfig {
            n_rows: 20_000,
            base_prevalence: 0.03,
            n_informative: 3,
            n_noise: 1,
            class_separation: sep,
            drift_shift: 0.0,
            drift_fraction: 0.0,
            seed,
        })
        .unwrap();
        let (tr, te) = base.temporal_split(0.75).unwrap();
        let spec = ModelSpec {
            params: HyperParams::LogReg(LogRegParams {
                learning_rate: 0.05,
                l2: 1e-4,
                epochs: 40,
            }),
            awareness: false,
            seed,
        };
        let model = fit(&spec, &tr).unwrap();
        roc_auc(&predict(&model, &te).unwrap(), te.labels()).unwrap()
    };
    let low: Vec<f64> = (0..5).map(|s| auc_at(0.4, 300 + s)).collect();
    let high: Vec<f64> = (0..5).map(|s| auc_at(1.2, 300 + s)).collect();
    assert!(
        median(&high) >= median(&low),
        "auc not monotone: {} vs {}",
        median(&high),
        median(&low)
    );
}

#[test]
fn zero_separation_means_chance_auc() {
    let mut aucs = Vec::new();
    for seed in 0..5 {
        let base = gen_base_dataset(&BaseConfig {
            class_separation: 0.0,
            seed: 500 + seed,
            ..BaseConfig::default()
        })
        .unwrap();
        let (tr, te) = base.temporal_split(0.75).unwrap();
        let spec = ModelSpec {
            params: HyperParams::LogReg(LogRegParams {
                learning_rate: 0.05,
                l2: 1e-4,
                epochs: 30,
            }),
            awareness: false,
            seed,
        };
        let model = fit(&spec, &tr).unwrap();
        aucs.push(roc_auc(&predict(&model, &te).unwrap(), te.labels()).unwrap());
    }
    let m = median(&aucs);
    assert!((0.45..=0.55).contains(&m), "chance-level auc violated: {m}");
}

#[test]
fn scenario_h22_members_bias_expected_partitions() {
    let base = gen_base_dataset(&BaseConfig {
        n_rows: 30_000,
        base_prevalence: 0.02,
        n_informative: 2,
        n_noise: 0,
        class_separation: 1.0,
        drift_shift: 0.0,
        drift_fraction: 0.0,
        seed: 2,
    })
    .unwrap();
    let (train, test) = base.temporal_split(0.75).unwrap();
    for (kind, train_biased, test_biased) in [
        (ScenarioKind::H22TrainOnly, true, false),
        (ScenarioKind::H22TestOnly, false, true),
        (ScenarioKind::H21, true, true),
    ] {
        let scenario = BiasScenario {
            kind,
            s_a: 0.5,
            c: 2.5,
            scheme: None,
            seed: 77,
        };
        let (_, _, manifest) = apply_scenario(&train, &test, &scenario).unwrap();
        let check = |ratio: f64, biased: bool, side: &str| {
            if biased {
                assert!(ratio > 1.7, "{kind:?} {side} ratio {ratio} should be biased");
            } else {
                assert!((0.6..=1.6).contains(&ratio), "{kind:?} {side} ratio {ratio} should be flat");
            }
        };
        check(manifest.train.prevalence_ratio().unwrap(), train_biased, "train");
        check(manifest.test.prevalence_ratio().unwrap(), test_biased, "test");
    }
}

#[test]
fn unaware_h21_scores_are_group_independent() {
    // conditional-on-label group assignment leaves features untouched, so an
    // unaware model's group FPRs agree in expectation
    let base = gen_base_dataset(&BaseConfig {
        n_rows: 30_000,
        base_prevalence: 0.02,
        n_informative: 3,
        n_noise: 1,
        class_separation: 1.2,
        drift_shift: 0.0,
        drift_fraction: 0.0,
        seed: 5,
    })
    .unwrap();
    let (train, test) = base.temporal_split(0.75).unwrap();
    let scenario = BiasScenario {
        kind: ScenarioKind::H21,
        s_a: 0.5,
        c: 2.0,
        scheme: None,
        seed: 13,
    };
    let (tr, te, _) = apply_scenario(&train, &test, &scenario).unwrap();
    let spec = sample_hyperparams(Algorithm::Gbt, 1, 21).unwrap().remove(0);
    let model = fit(&spec, &tr).unwrap(); // unaware by default
    let scores = predict(&model, &te).unwrap();
    let report = biasforge::eval::evaluate(&scores, te.labels(), te.groups().unwrap(), 0.05).unwrap();
    let ratio = report.ratios.log2_fpr_ratio.unwrap();
    assert!(ratio.abs() < 0.5, "unaware model shows group FPR skew: {ratio}");
    // sanity: groups present on both sides
    assert!(te.groups().unwrap().contains(&Group::A));
}
