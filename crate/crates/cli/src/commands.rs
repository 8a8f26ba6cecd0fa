//! Subcommand implementations.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde_json::json;

use qrobust::ansatz::checkpoint::{read_checkpoint, write_checkpoint};
use qrobust::attacks::{adversarial_accuracy, AttackConfig, AttackTarget};
use qrobust::certify::{certify_dataset_with, CertifyOptions};
use qrobust::data::{
    load_breast_cancer, load_csv, load_iris_seeded, load_mnist, load_pid_replica, MnistOptions, IRIS_SEED,
};
use qrobust::qsim::qubits_for_dim;
use qrobust::train::{evaluate, train_with_observer};
use qrobust::{
    AttackConfig64, Classifier64, Dataset64, Loss, ModelConfig, NoiseSpec64, PreprocessRecipe, SplitSpec, TrainConfig64,
    TrainMode,
};

use crate::config::{resolve_data_path, AttackName, DatasetName, ExperimentConfig, DATA_DIR_ENV};
use crate::output::{
    line_plot_svg, tau_column, write_csv, write_json, CERTIFICATE_PREFIX, HISTORY_HEADER, SWEEP_HEADER,
};
use crate::CliError;

pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const HISTORY_FILE: &str = "history.csv";
pub const SWEEP_FILE: &str = "sweep.csv";
pub const SWEEP_PLOT: &str = "sweep.svg";
pub const CERTIFICATE_FILE: &str = "certificates.csv";
pub const SUMMARY_FILE: &str = "certify_summary.csv";

/// Resolved inputs shared by every subcommand.
pub struct Context {
    pub config: ExperimentConfig,
    pub config_dir: PathBuf,
    pub out_dir: PathBuf,
}

impl Context {
    fn dataset(&self) -> Result<Dataset64, CliError> {
        let d = &self.config.dataset;
        let split = d.split.as_ref().map(SplitSpec::from);
        let seed = d.seed.unwrap_or(0);
        if d.max_samples.is_some() && !matches!(d.name, DatasetName::Mnist2 | DatasetName::Mnist4 | DatasetName::Mnist10) {
            return Err(CliError::Config("`max_samples` only applies to MNIST datasets".into()));
        }
        let mut ds = match d.name {
            DatasetName::Iris => load_iris_seeded(d.seed.unwrap_or(IRIS_SEED))?,
            DatasetName::Bc => load_breast_cancer(seed)?,
            DatasetName::Pid => load_pid_replica(seed)?,
            DatasetName::Mnist2 | DatasetName::Mnist4 | DatasetName::Mnist10 => {
                let mut opts = match d.name {
                    DatasetName::Mnist2 => MnistOptions::mnist2(seed),
                    DatasetName::Mnist4 => MnistOptions::mnist4(seed),
                    _ => MnistOptions::mnist10(seed),
                };
                opts.max_samples = d.max_samples;
                if let Some(s) = split {
                    opts.split = s;
                }
                let dir = match (&d.path, std::env::var_os(DATA_DIR_ENV)) {
                    (Some(p), _) => resolve_data_path(p, &self.config_dir),
                    (None, Some(dir)) => PathBuf::from(dir),
                    (None, None) => {
                        return Err(CliError::Config(format!(
                            "MNIST datasets need `path` or the {DATA_DIR_ENV} environment variable"
                        )))
                    }
                };
                return Ok(load_mnist(&dir, &opts)?);
            }
            DatasetName::Csv => {
                let path = resolve_data_path(d.path.as_deref().expect("validated"), &self.config_dir);
                let recipe = PreprocessRecipe::parse(&d.recipe)?;
                let label = d.label_column.as_deref().expect("validated");
                return Ok(load_csv(&path, label, &recipe, split.unwrap_or(SplitSpec::holdout(0.2)), seed)?);
            }
        };
        if let Some(s) = split {
            ds.resplit(s, seed)?;
        }
        Ok(ds)
    }

    fn model_config(&self, ds: &Dataset64) -> Result<ModelConfig, CliError> {
        let m = &self.config.model;
        let need = qubits_for_dim(ds.dim()).max(1);
        let n_qubits = m.n_qubits.unwrap_or(need);
        if n_qubits < need {
            return Err(CliError::Config(format!(
                "{n_qubits} qubits cannot encode {} features (need {need})",
                ds.dim()
            )));
        }
        if let Some(c) = m.n_classes.filter(|&c| c != ds.n_classes()) {
            return Err(CliError::Config(format!("model has {c} classes, dataset has {}", ds.n_classes())));
        }
        let cfg = ModelConfig {
            n_qubits,
            n_layers: m.n_layers,
            n_measured: m.n_measured,
            n_classes: ds.n_classes(),
            seed: m.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn train_config(&self, ds: &Dataset64) -> TrainConfig64 {
        let t = &self.config.train;
        let (lo, hi) = ds.domain;
        TrainConfig64 {
            learning_rate: t.learning_rate,
            batch_size: t.batch_size,
            epochs: t.epochs,
            loss: t.loss.into(),
            mode: t.mode.into(),
            attack: (TrainMode::from(t.mode) == TrainMode::Adversarial).then(|| {
                AttackConfig::pgd(t.attack_epsilon.unwrap_or(0.05), t.attack_steps.unwrap_or(10)).with_domain(lo, hi)
            }),
            sigma: t.sigma.unwrap_or(0.0),
            early_stop_loss: t.early_stop_loss,
            seed: t.seed,
            backend: t.backend.into(),
        }
    }

    fn train_model(&self, ds: &Dataset64) -> Result<(Classifier64, qrobust::TrainHistory), CliError> {
        let model = Classifier64::random(self.model_config(ds)?)?;
        let cfg = self.train_config(ds);
        let (model, history) = train_with_observer(model, ds, &cfg, |r, _| {
            eprintln!(
                "epoch {:>4}  train loss {:.5}  val loss {:.5}  val acc {:.4}",
                r.epoch + 1,
                r.train_loss,
                r.val_loss,
                r.val_acc
            );
            Ok(())
        })?;
        Ok((model, history))
    }

    /// The configured checkpoint, or a freshly trained model.
    fn model(&self, ds: &Dataset64) -> Result<Classifier64, CliError> {
        match &self.config.model.checkpoint {
            Some(p) => {
                let path = if p.is_absolute() { p.clone() } else { self.config_dir.join(p) };
                let model: Classifier64 = read_checkpoint(&path)?;
                let expected = self.model_config(ds)?;
                if model.config.n_classes != expected.n_classes || model.config.n_qubits < qubits_for_dim(ds.dim()) {
                    return Err(CliError::Config(format!(
                        "checkpoint {} does not fit dataset {}",
                        path.display(),
                        ds.name
                    )));
                }
                Ok(model)
            }
            None => {
                eprintln!("no checkpoint configured; training");
                Ok(self.train_model(ds)?.0)
            }
        }
    }

    fn out(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn manifest(&self, command: &str, started: Instant, outputs: &[&str]) -> Result<(), CliError> {
        let c = &self.config;
        let value = json!({
            "command": command,
            "version": env!("CARGO_PKG_VERSION"),
            "seeds": {
                "dataset": c.dataset.seed,
                "model": c.model.seed,
                "train": c.train.seed,
            },
            "wall_time_s": started.elapsed().as_secs_f64(),
            "outputs": outputs,
            "config": serde_json::to_value(c).expect("config serializes"),
        });
        write_json(&self.out(&format!("manifest-{command}.json")), &value)
    }
}

fn splits_label(ds: &Dataset64) -> String {
    match ds.splits.sizes() {
        (tr, Some(v), te) => format!("{tr}/{v}/{te}"),
        (tr, None, te) => format!("{tr}/{te}"),
    }
}

pub fn cmd_data(ctx: &Context) -> Result<(), CliError> {
    let ds = ctx.dataset()?;
    println!(
        "{}: {} samples, dim {}, {} classes, splits {}, domain [{}, {}]",
        ds.name,
        ds.len(),
        ds.dim(),
        ds.n_classes(),
        splits_label(&ds),
        ds.domain.0,
        ds.domain.1
    );
    Ok(())
}

pub fn cmd_train(ctx: &Context) -> Result<(), CliError> {
    let started = Instant::now();
    let ds = ctx.dataset()?;
    let (model, history) = ctx.train_model(&ds)?;
    write_checkpoint(&ctx.out(CHECKPOINT_FILE), &model)?;
    let rows: Vec<Vec<String>> = (0..history.epochs())
        .map(|i| {
            vec![
                (i + 1).to_string(),
                history.train_loss[i].to_string(),
                history.val_loss[i].to_string(),
                history.val_acc[i].to_string(),
            ]
        })
        .collect();
    write_csv(&ctx.out(HISTORY_FILE), &strings(&HISTORY_HEADER), &rows)?;
    let loss: Loss = ctx.config.train.loss.into();
    let (_, acc) = evaluate(&model, &ds.test(), loss)?;
    println!("{}: {} epochs, test accuracy {:.1}%", ds.name, history.epochs(), 100.0 * acc);
    ctx.manifest("train", started, &[CHECKPOINT_FILE, HISTORY_FILE])
}

struct GridPoint {
    epsilon: f64,
    p: f64,
    block: usize,
    noise: Option<NoiseSpec64>,
}

pub fn cmd_sweep(ctx: &Context) -> Result<(), CliError> {
    let started = Instant::now();
    let c = &ctx.config;
    let ds = ctx.dataset()?;
    let model = ctx.model(&ds)?;
    let test = ds.test();
    let kind = c.attack_kind();
    let steps = if kind == AttackName::Fgsm { 1 } else { c.attack.steps };
    let [lo, hi] = c.attack.clip.unwrap_or([ds.domain.0, ds.domain.1]);

    let mut grid = Vec::new();
    for &epsilon in &c.attack.epsilon {
        if c.noise.is_empty() {
            grid.push(GridPoint { epsilon, p: 0.0, block: 0, noise: None });
        }
        for (block, nb) in c.noise.iter().enumerate() {
            for &p in &nb.p {
                grid.push(GridPoint { epsilon, p, block, noise: Some(nb.spec(p, model.config.n_layers)?) });
            }
        }
    }
    let loss: Loss = c.train.loss.into();
    let mut results: Vec<(&GridPoint, f64)> = grid
        .par_iter()
        .map(|g| {
            let attack: AttackConfig64 = match kind {
                AttackName::Fgsm => AttackConfig::fgsm(g.epsilon),
                AttackName::Pgd => AttackConfig::pgd(g.epsilon, steps),
            }
            .with_domain(lo, hi);
            let target = AttackTarget::new(&model, g.noise.as_ref(), loss);
            Ok((g, adversarial_accuracy(&test, &target, &attack)?))
        })
        .collect::<Result<_, CliError>>()?;
    results.sort_by(|a, b| {
        a.0.epsilon.total_cmp(&b.0.epsilon).then(a.0.p.total_cmp(&b.0.p)).then(a.0.block.cmp(&b.0.block))
    });

    let kind_name = match kind {
        AttackName::Fgsm => "fgsm",
        AttackName::Pgd => "pgd",
    };
    let rows: Vec<Vec<String>> = results
        .iter()
        .map(|(g, acc)| {
            vec![
                g.epsilon.to_string(),
                g.p.to_string(),
                acc.to_string(),
                test.len().to_string(),
                kind_name.to_string(),
                steps.to_string(),
            ]
        })
        .collect();
    write_csv(&ctx.out(SWEEP_FILE), &strings(&SWEEP_HEADER), &rows)?;
    for r in &rows {
        println!("epsilon {:<8} p {:<6} adversarial accuracy {}", r[0], r[1], r[2]);
    }
    let mut outputs = vec![SWEEP_FILE];
    if c.output.plot {
        let mut series: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
        for (g, acc) in &results {
            let label = if c.noise.len() > 1 { format!("p={} ({})", g.p, g.block + 1) } else { format!("p={}", g.p) };
            match series.iter_mut().find(|(l, _)| *l == label) {
                Some((_, pts)) => pts.push((g.epsilon, *acc)),
                None => series.push((label, vec![(g.epsilon, *acc)])),
            }
        }
        let title = format!("{} {} robustness ({})", ds.name, kind_name.to_uppercase(), steps_label(steps));
        let svg = line_plot_svg(&title, "epsilon", "adversarial accuracy", &series);
        qrobust::ansatz::checkpoint::write_atomic(&ctx.out(SWEEP_PLOT), svg.as_bytes())?;
        outputs.push(SWEEP_PLOT);
    }
    ctx.manifest("sweep", started, &outputs)
}

fn steps_label(steps: usize) -> String {
    if steps == 1 {
        "1 step".into()
    } else {
        format!("{steps} steps")
    }
}

pub fn cmd_certify(ctx: &Context) -> Result<(), CliError> {
    let started = Instant::now();
    let c = &ctx.config;
    let ds = ctx.dataset()?;
    let model = ctx.model(&ds)?;
    let template = match c.noise.first() {
        Some(nb) => Some(nb.spec(0.0, model.config.n_layers)?),
        None => None,
    };
    let opts = CertifyOptions {
        template: template.as_ref(),
        source: c.certify.source.into(),
        convention: c.certify.convention.into(),
    };
    let samples: Vec<(usize, &[f64], usize)> = ds
        .splits
        .test
        .iter()
        .map(|&i| (i, ds.features[i].as_slice(), ds.labels[i]))
        .collect();
    let report = certify_dataset_with(&samples, &model, &c.certify.p, &opts)?;

    let mut header = strings(&CERTIFICATE_PREFIX);
    header.extend(c.certify.p.iter().map(|&p| tau_column(p)));
    let rows: Vec<Vec<String>> = report
        .certificates
        .iter()
        .map(|cert| {
            let mut row = vec![
                cert.sample_id.to_string(),
                cert.true_class.to_string(),
                cert.predicted_class.to_string(),
                cert.y_c.to_string(),
                cert.y_k.to_string(),
                cert.eps_min.to_string(),
            ];
            row.extend(cert.tau_d().iter().map(f64::to_string));
            row
        })
        .collect();
    write_csv(&ctx.out(CERTIFICATE_FILE), &header, &rows)?;

    let mut summary_header = strings(&["dataset", "n_samples", "accuracy"]);
    summary_header.extend(c.certify.p.iter().map(|&p| tau_column(p)));
    let mut summary = vec![ds.name.clone(), samples.len().to_string(), (100.0 * report.accuracy).to_string()];
    summary.extend(report.mean_tau_d.iter().map(f64::to_string));
    write_csv(&ctx.out(SUMMARY_FILE), &summary_header, &[summary])?;

    let taus: Vec<String> = report.mean_tau_d.iter().map(|t| format!("{:.3}", 100.0 * t)).collect();
    println!("{} | {:.1} | {}   (mean tau_D x1e-2 at p = {:?})", ds.name, 100.0 * report.accuracy, taus.join(" | "), c.certify.p);
    ctx.manifest("certify", started, &[CERTIFICATE_FILE, SUMMARY_FILE])
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

/// Output directory: `--out`, else `[output] dir` relative to the config, else `out`.
pub fn output_dir(flag: Option<&Path>, config: &ExperimentConfig, config_dir: &Path) -> PathBuf {
    match (flag, &config.output.dir) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(d)) if d.is_absolute() => d.clone(),
        (None, Some(d)) => config_dir.join(d),
        (None, None) => PathBuf::from("out"),
    }
}
