//! Config-driven experiment runs writing CSV artifacts and a JSON manifest.
//!
//! Every CSV is a pure function of the configuration and seed; wall-clock
//! timestamps appear only in `manifest.json`.

pub mod config;
pub mod csvio;
pub mod report;

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

pub use config::{Command, RunConfig};
pub use report::{convergence_curves, eval_accuracy, CurveSeries, EvalReport};

use crate::data::{load_mnist, sample, subset, LabeledSet};
use crate::error::{Error, Result};
use crate::nn::Model;
use crate::oracles::{ex1_risks, ex2_risks, mc_for_metric, three_clusters_risks, RiskReport};
use crate::sense::{train, Method, Monitor};
use config::{DataSource, MethodKind};
use csvio::{real, write_table};

pub const VERSION: &str = concat!("v", env!("CARGO_PKG_VERSION"));

/// Seeds derived from the run seed for independent purposes.
const TEST_SAMPLE_SALT: u64 = 0x7e57;
const EVAL_SALT: u64 = 0xe7a1;

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub artifacts: Vec<PathBuf>,
    pub manifest: PathBuf,
}

struct Artifacts {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Artifacts {
    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.written.push(p.clone());
        p
    }
}

fn unix_seconds() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// Executes the configured command in `config.out`. The manifest is written
/// even when the command fails, flagging whatever artifacts exist as
/// partial.
pub fn run(config: &RunConfig) -> Result<RunOutcome> {
    std::fs::create_dir_all(&config.out).map_err(|e| Error::io(&config.out, e))?;
    let started = unix_seconds();
    let mut arts = Artifacts {
        dir: config.out.clone(),
        written: Vec::new(),
    };
    let result = dispatch(config, &mut arts);
    let existing: Vec<String> = arts
        .written
        .iter()
        .filter(|p| p.exists())
        .map(|p| p.file_name().unwrap_or_default().to_string_lossy().into_owned())
        .collect();
    let manifest = json!({
        "version": VERSION,
        "command": config.command.name(),
        "seed": config.seed,
        "config": config,
        "status": if result.is_ok() { "ok" } else { "failed" },
        "error": result.as_ref().err().map(|e| e.to_string()),
        "partial": result.is_err(),
        "artifacts": existing,
        "started_unix": started,
        "finished_unix": unix_seconds(),
    });
    let manifest_path = config.out.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&manifest_path, text).map_err(|e| Error::io(&manifest_path, e))?;
    result.map(|()| RunOutcome {
        artifacts: arts.written,
        manifest: manifest_path,
    })
}

fn dispatch(cfg: &RunConfig, arts: &mut Artifacts) -> Result<()> {
    match cfg.command {
        Command::Train => cmd_train(cfg, arts),
        Command::Attack => cmd_attack(cfg, arts),
        Command::Eval => cmd_eval(cfg, arts),
        Command::Analytic => cmd_analytic(cfg, arts),
        Command::Synthetic => cmd_synthetic(cfg, arts),
        Command::Convcheck => cmd_convcheck(cfg, arts),
    }
}

/// Training and test sets named by the data section.
pub fn load_data(cfg: &RunConfig) -> Result<(LabeledSet, LabeledSet)> {
    let d = &cfg.data;
    let (train, test) = match d.source {
        DataSource::Mnist => {
            let f = |name: &str| d.dir.join(name);
            let [tri, trl, tei, tel] = config::MNIST_FILES;
            (load_mnist(&f(tri), &f(trl))?, load_mnist(&f(tei), &f(tel))?)
        }
        DataSource::Synthetic => (
            sample(&d.dist, d.n_train, cfg.seed)?,
            sample(&d.dist, d.n_test, cfg.seed ^ TEST_SAMPLE_SALT)?,
        ),
        DataSource::Csv => {
            let need = |p: &Option<PathBuf>| p.clone().ok_or_else(|| Error::config("data", "csv paths missing"));
            (
                LabeledSet::read_csv(&need(&d.train_csv)?)?,
                LabeledSet::read_csv(&need(&d.test_csv)?)?,
            )
        }
    };
    let cut = |set: LabeledSet, n: usize| {
        if n == 0 || n >= set.len() {
            Ok(set)
        } else {
            subset(&set, n, cfg.seed)
        }
    };
    Ok((cut(train, d.train_subset)?, cut(test, d.test_subset)?))
}

fn check_model_fits(model: &Model, set: &LabeledSet) -> Result<()> {
    if model.input_len() != set.features() || model.classes() != set.classes() {
        return Err(Error::config(
            "model",
            format!(
                "model maps {} → {} but the data has {} features and {} classes",
                model.input_len(),
                model.classes(),
                set.features(),
                set.classes()
            ),
        ));
    }
    Ok(())
}

fn cmd_train(cfg: &RunConfig, arts: &mut Artifacts) -> Result<()> {
    let (train_set, test_set) = load_data(cfg)?;
    let clip = train_set.domain();
    let mut model = Model::build(cfg.model.spec(train_set.features(), train_set.classes(), cfg.seed))?;
    check_model_fits(&model, &train_set)?;
    if cfg.train.pretrain_epochs > 0 {
        let mut pre = cfg.train_spec();
        pre.epochs = cfg.train.pretrain_epochs;
        model = train(model, &train_set, &Method::Natural, &pre, None, &mut |_, _| {})?.0;
    }
    let method = match cfg.train.method {
        MethodKind::Nat => Method::Natural,
        MethodKind::Rat => Method::Regular(cfg.attack.spec(clip)),
        MethodKind::Sense => Method::Sensible(cfg.sense_spec(clip)),
    };
    let monitor = Monitor {
        set: &test_set,
        attack: cfg.train.monitor_attack.then(|| cfg.attack.spec(clip)),
        c: cfg.train.c,
    };
    let (model, log) = train(
        model,
        &train_set,
        &method,
        &cfg.train_spec(),
        Some(&monitor),
        &mut |_, _| {},
    )?;
    model.save(&arts.path("model.snsm"))?;
    log.write_csv(&arts.path("train_log.csv"))?;
    let attack = cfg.eval.after_train.then(|| cfg.eval.attack().spec(clip));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ EVAL_SALT);
    let report = eval_accuracy(&model, &test_set, attack.as_ref(), Some(cfg.train.c), &mut rng)?;
    report.write_csv(&arts.path("eval.csv"))?;
    std::fs::write(arts.path("model.sha256"), model.hash_hex() + "\n").map_err(|e| Error::io(&arts.dir, e))
}

fn load_checkpoint(cfg: &RunConfig) -> Result<Model> {
    let path = cfg
        .model
        .checkpoint
        .as_deref()
        .ok_or_else(|| Error::config("model.checkpoint", "required by this command"))?;
    Model::load(path)
}

fn cmd_eval(cfg: &RunConfig, arts: &mut Artifacts) -> Result<()> {
    let model = load_checkpoint(cfg)?;
    let (_, test_set) = load_data(cfg)?;
    check_model_fits(&model, &test_set)?;
    let attack = cfg.eval.attack().spec(test_set.domain());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ EVAL_SALT);
    let report = eval_accuracy(&model, &test_set, Some(&attack), cfg.eval.c, &mut rng)?;
    report.write_csv(&arts.path("eval.csv"))
}

fn cmd_attack(cfg: &RunConfig, arts: &mut Artifacts) -> Result<()> {
    let model = load_checkpoint(cfg)?;
    let (_, test_set) = load_data(cfg)?;
    check_model_fits(&model, &test_set)?;
    let (x, y) = (test_set.inputs(), test_set.labels());
    let attack = cfg.eval.attack().spec(test_set.domain());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ EVAL_SALT);
    let out = crate::attacks::worst_case_over_restarts(&model, x, y, &attack, &mut rng)?;
    let clean = model.evaluate(x, y)?;
    let adv = model.evaluate(&out.worst, y)?;
    let rows: Vec<Vec<String>> = (0..y.len())
        .map(|i| {
            vec![
                i.to_string(),
                y[i].to_string(),
                clean[i].predicted.to_string(),
                adv[i].predicted.to_string(),
                real(clean[i].loss),
                real(adv[i].loss),
                real(attack.norm.distance(out.worst.row(i), x.row(i))),
            ]
        })
        .collect();
    write_table(
        &arts.path("attack.csv"),
        &[
            "index",
            "label",
            "clean_pred",
            "adv_pred",
            "clean_loss",
            "adv_loss",
            "perturbation_norm",
        ],
        &rows,
    )?;
    let mut curve = CurveSeries::new("restart", (1..=attack.restarts).map(|r| r as f64).collect())?;
    curve.push("worst_case_accuracy", out.cumulative_accuracy())?;
    curve.write_csv(&arts.path("restart_curve.csv"))
}

fn cmd_convcheck(cfg: &RunConfig, arts: &mut Artifacts) -> Result<()> {
    let model = load_checkpoint(cfg)?;
    let (_, test_set) = load_data(cfg)?;
    check_model_fits(&model, &test_set)?;
    let n = cfg.eval.examples.clamp(1, test_set.len());
    let idx: Vec<usize> = (0..n).collect();
    let part = test_set.select(&idx);
    let attack = cfg.eval.attack().spec(test_set.domain());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ EVAL_SALT);
    let (losses, restarts) = convergence_curves(&model, part.inputs(), part.labels(), &attack, &mut rng)?;
    losses.write_csv(&arts.path("loss_curve.csv"))?;
    restarts.write_csv(&arts.path("restart_curve.csv"))
}

/// Closed-form risks of the configured analytic setting.
pub fn analytic_report(cfg: &RunConfig) -> Result<RiskReport> {
    let a = &cfg.analytic;
    match a.setting.as_str() {
        "ex1" => ex1_risks(a.p, a.epsilon),
        "ex2" => ex2_risks(a.p, a.epsilon),
        "three_clusters" => three_clusters_risks(a.p, a.sigma, a.m, a.gamma),
        other => Err(Error::config("analytic.setting", format!("unknown setting `{other}`"))),
    }
}

pub const RISK_HEADER: [&str; 9] = [
    "setting",
    "p",
    "sigma",
    "m",
    "epsilon",
    "metric",
    "closed_form",
    "mc_estimate",
    "mc_stderr",
];

fn cmd_analytic(cfg: &RunConfig, arts: &mut Artifacts) -> Result<()> {
    let report = analytic_report(cfg)?;
    let opt = |v: Option<f64>| v.map_or(String::new(), real);
    let mut rows = Vec::new();
    for (k, e) in report.entries.iter().enumerate() {
        let mc = if cfg.analytic.mc_n > 0 {
            mc_for_metric(&report, e.metric, cfg.analytic.mc_n, cfg.seed.wrapping_add(k as u64))?
        } else {
            None
        };
        rows.push(vec![
            report.setting.to_string(),
            real(report.p),
            opt(report.sigma),
            opt(report.m),
            real(report.epsilon),
            e.metric.to_string(),
            real(e.closed_form),
            opt(mc.map(|m| m.estimate)),
            opt(mc.map(|m| m.std_error)),
        ]);
    }
    write_table(&arts.path("risks.csv"), &RISK_HEADER, &rows)
}

fn cmd_synthetic(cfg: &RunConfig, arts: &mut Artifacts) -> Result<()> {
    let d = &cfg.data;
    sample(&d.dist, d.n_train, cfg.seed)?.write_csv(&arts.path("train.csv"))?;
    sample(&d.dist, d.n_test, cfg.seed ^ TEST_SAMPLE_SALT)?.write_csv(&arts.path("test.csv"))
}

/// Reads a file written by [`run`] back as rows of strings, header first.
pub fn read_table(path: &Path) -> Result<Vec<Vec<String>>> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(csv_err)?;
    r.records()
        .map(|rec| rec.map(|r| r.iter().map(str::to_string).collect()).map_err(csv_err))
        .collect()
}
