//! Command-line front end: `gen`, `inject`, `audit`, `train-eval`, `run`.
//!
//! Exit codes: 0 on success, 1 when any experiment cell failed, 2 on
//! configuration errors. `BIASFORGE_THREADS` caps worker parallelism.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use biasforge::audit::{audit_dataset, compare_profiles, render_audit_report, DEFAULT_ALPHA};
use biasforge::data::{infer_schema, load_csv, write_csv, TabularDataset};
use biasforge::error::Error;
use biasforge::eval::{evaluate, roc_auc};
use biasforge::inject::ScenarioKind;
use biasforge::learn::{
    fit, predict, save_model, Algorithm, ForestParams, GbtParams, HyperParams, LogRegParams,
    ModelSpec, TreeParams,
};
use biasforge::runner::{
    run_experiment, Awareness, ExperimentConfig, ResultRow, ScenarioTemplate, RESULTS_HEADER,
};
use biasforge::synth::{gen_base_dataset, BaseConfig};

#[derive(Parser)]
#[command(
    name = "biasforge",
    about = "Bias-injection sandbox and fairness audit toolkit for tabular binary classification",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SchemaArgs {
    /// Label column name
    #[arg(long, default_value = "y")]
    label: String,
    /// Time-index column name
    #[arg(long, default_value = "t")]
    time: String,
    /// Protected column name (used when present)
    #[arg(long, default_value = "z")]
    protected: String,
}

impl SchemaArgs {
    fn load(&self, path: &PathBuf) -> Result<TabularDataset, Error> {
        let schema = infer_schema(path, &self.label, &self.time, &self.protected)?;
        load_csv(path, &schema)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic base dataset and write it as CSV
    Gen {
        /// Output CSV path
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 60_000)]
        rows: usize,
        #[arg(long, default_value_t = 0.01)]
        prevalence: f64,
        #[arg(long, default_value_t = 6)]
        informative: usize,
        #[arg(long, default_value_t = 4)]
        noise: usize,
        #[arg(long, default_value_t = 1.0)]
        separation: f64,
        #[arg(long, default_value_t = 0.25)]
        drift_shift: f64,
        #[arg(long, default_value_t = 0.25)]
        drift_fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Split a base CSV temporally and apply one bias scenario
    Inject {
        /// Base dataset CSV (no protected column)
        #[arg(long)]
        data: PathBuf,
        /// Scenario kind: baseline|h1|h2_1|h2_2_train_only|h2_2_test_only|h3|h4_1|h4_2
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value_t = 0.5)]
        s_a: f64,
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        #[arg(long, default_value_t = 0.75)]
        train_fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory for train.csv, test.csv, and the manifest
        #[arg(long, default_value = "injected")]
        output: PathBuf,
        #[command(flatten)]
        schema: SchemaArgs,
    },
    /// Audit a dataset file for bias conditions
    Audit {
        #[arg(long)]
        data: PathBuf,
        /// Optional second dataset; when given, both are audited and their
        /// profiles compared
        #[arg(long)]
        compare: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_ALPHA)]
        alpha: f64,
        /// Write the report here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        schema: SchemaArgs,
    },
    /// Train one model on a train CSV and evaluate it on a test CSV
    TrainEval {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        /// logreg|tree|forest|gbt
        #[arg(long)]
        algorithm: String,
        #[arg(long, default_value = "aware")]
        awareness: String,
        #[arg(long, default_value_t = 0.05)]
        target_fpr: f64,
        #[arg(long, default_value_t = 0)]
        spec_seed: u64,
        /// Persist the fitted model here (.model text format)
        #[arg(long)]
        model_out: Option<PathBuf>,
        /// Write result rows here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        schema: SchemaArgs,
        #[command(flatten)]
        hyper: HyperArgs,
    },
    /// Run a full experiment from a TOML config
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the config's output directory
        #[arg(long)]
        output: Option<PathBuf>,
        /// Override the config's master seed
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Args)]
struct HyperArgs {
    #[arg(long, default_value_t = 0.02)]
    learning_rate: f64,
    #[arg(long, default_value_t = 1e-4)]
    l2: f64,
    #[arg(long, default_value_t = 50)]
    epochs: u32,
    #[arg(long, default_value_t = 6)]
    max_depth: u32,
    #[arg(long, default_value_t = 20)]
    min_leaf: u64,
    #[arg(long, default_value_t = 100)]
    n_trees: u32,
    #[arg(long, default_value_t = 0.7)]
    feature_subsample: f64,
    #[arg(long, default_value_t = 150)]
    n_rounds: u32,
    #[arg(long, default_value_t = 0.1)]
    gbt_learning_rate: f64,
    #[arg(long, default_value_t = 0.8)]
    subsample: f64,
}

impl HyperArgs {
    fn to_params(&self, algorithm: Algorithm) -> HyperParams {
        match algorithm {
            Algorithm::LogReg => HyperParams::LogReg(LogRegParams {
                learning_rate: self.learning_rate,
                l2: self.l2,
                epochs: self.epochs,
            }),
            Algorithm::Tree => HyperParams::Tree(TreeParams {
                max_depth: self.max_depth,
                min_leaf: self.min_leaf,
            }),
            Algorithm::Forest => HyperParams::Forest(ForestParams {
                n_trees: self.n_trees,
                max_depth: self.max_depth,
                feature_subsample: self.feature_subsample,
                bootstrap: true,
            }),
            Algorithm::Gbt => HyperParams::Gbt(GbtParams {
                n_rounds: self.n_rounds,
                learning_rate: self.gbt_learning_rate,
                max_depth: self.max_depth.min(6),
                subsample: self.subsample,
            }),
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Gen {
            out,
            rows,
            prevalence,
            informative,
            noise,
            separation,
            drift_shift,
            drift_fraction,
            seed,
        } => {
            let cfg = BaseConfig {
                n_rows: rows,
                base_prevalence: prevalence,
                n_informative: informative,
                n_noise: noise,
                class_separation: separation,
                drift_shift,
                drift_fraction,
                seed,
            };
            let ds = gen_base_dataset(&cfg)?;
            write_csv(&ds, &out)?;
            println!(
                "wrote {} rows x {} columns to {} (prevalence {:.4})",
                ds.n_rows(),
                ds.names().len(),
                out.display(),
                ds.prevalence(None)?
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Inject {
            data,
            scenario,
            s_a,
            c,
            train_fraction,
            seed,
            output,
            schema,
        } => {
            let kind: ScenarioKind = scenario.parse()?;
            let ds = schema.load(&data)?;
            let (train, test) = ds.temporal_split(train_fraction)?;
            let template = ScenarioTemplate::new(kind).with_s_a(s_a).with_c(c);
            let scenario = template.instantiate(seed)?;
            let (tr, te, manifest) = biasforge::inject::apply_scenario(&train, &test, &scenario)?;
            std::fs::create_dir_all(&output)?;
            write_csv(&tr, output.join("train.csv"))?;
            write_csv(&te, output.join("test.csv"))?;
            let manifest_path = output.join(manifest.file_name());
            manifest.write(&manifest_path)?;
            println!(
                "injected {}: train ratio {}, test ratio {} -> {}",
                template.label(),
                manifest
                    .train
                    .prevalence_ratio()
                    .map_or("NA".into(), |r| format!("{r:.3}")),
                manifest
                    .test
                    .prevalence_ratio()
                    .map_or("NA".into(), |r| format!("{r:.3}")),
                output.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Audit {
            data,
            compare,
            alpha,
            out,
            schema,
        } => {
            let ds = schema.load(&data)?;
            let results = audit_dataset(&ds, alpha)?;
            let mut report = render_audit_report(&results);
            if let Some(other) = compare {
                let ds2 = schema.load(&other)?;
                let results2 = audit_dataset(&ds2, alpha)?;
                let cmp = compare_profiles(&results, &results2)?;
                report.push_str("\n[comparison]\n");
                for c in &cmp.conditions {
                    report.push_str(&format!(
                        "{} first={} second={} differs={}\n",
                        c.condition, c.train_detected, c.test_detected, c.differs
                    ));
                }
                report.push_str(&format!("any_differs {}\n", cmp.any_differs));
            }
            match out {
                Some(path) => std::fs::write(path, report)?,
                None => print!("{report}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::TrainEval {
            train,
            test,
            algorithm,
            awareness,
            target_fpr,
            spec_seed,
            model_out,
            out,
            schema,
            hyper,
        } => {
            let algorithm: Algorithm = algorithm.parse()?;
            let awareness: Awareness = awareness.parse()?;
            let train_ds = schema.load(&train)?;
            let test_ds = schema.load(&test)?;
            let spec = ModelSpec {
                params: hyper.to_params(algorithm),
                awareness: awareness.as_bool(),
                seed: spec_seed,
            };
            let model = fit(&spec, &train_ds)?;
            if let Some(path) = &model_out {
                save_model(&model, path)?;
            }
            let scores = predict(&model, &test_ds)?;
            let groups = test_ds
                .groups()
                .ok_or_else(|| Error::MissingColumn("protected".into()))?;
            let report = evaluate(&scores, test_ds.labels(), groups, target_fpr)?;
            let (mut sa, mut la, mut sb, mut lb) = (vec![], vec![], vec![], vec![]);
            for ((&s, &y), &z) in scores.iter().zip(test_ds.labels()).zip(groups) {
                if z == biasforge::data::Group::A {
                    sa.push(s);
                    la.push(y);
                } else {
                    sb.push(s);
                    lb.push(y);
                }
            }
            let row = ResultRow {
                scenario: "adhoc".into(),
                replicate: 0,
                injection_seed: 0,
                algorithm,
                awareness,
                spec_id: spec.spec_id(),
                target_fpr,
                converged: model.converged,
                report,
                auc_a: roc_auc(&sa, &la),
                auc_b: roc_auc(&sb, &lb),
            };
            let text = format!("{}\n{}\n", RESULTS_HEADER, row.to_csv_row());
            match out {
                Some(path) => std::fs::write(path, text)?,
                None => print!("{text}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Run {
            config,
            output,
            seed,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(dir) = output {
                cfg.output_dir = dir;
            }
            if let Some(s) = seed {
                cfg.master_seed = s;
            }
            let summary = run_experiment(&cfg)?;
            print!("{}", summary.render());
            Ok(if summary.any_failed() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e @ Error::Config(_)) | Err(e @ Error::Schema(_)) => {
            eprintln!("configuration error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
