//! Sensible adversarial training.
//!
//! A sensible adversarial example is a PGD iterate that stops as soon as the
//! next step would push the cross-entropy above `log(1/c)`. Training on it
//! with the ordinary cross-entropy evaluates the truncated loss
//! `ℓᵗ_nat + ℓᵗ_rob` implicitly:
//!
//! | group | condition                    | loss              |
//! |-------|------------------------------|-------------------|
//! | A     | `p̂_y(x) ≤ c`                 | `−log p̂_y(x)`     |
//! | B     | `p̂_y(x) > c ≥ p̂_y(x̃)`        | `log(1/c)`        |
//! | C     | `p̂_y(x̃) > c`                 | `−log p̂_y(x̃)`     |
//!
//! `c = 0` recovers regular adversarial training and `c = 1` natural
//! training, bit for bit.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attacks::{ascend, AttackSpec, EngineStats, Norm, Reversion, RowPlan};
use crate::autodiff::{sgd_step, Tensor};
use crate::data::{batches, LabeledSet};
use crate::error::{Error, Result};
use crate::harness::csvio;
use crate::nn::Model;
use crate::oracles::grid_search_ball;

/// Random stream for attack noise during training; shuffling uses the
/// per-epoch streams `0, 1, 2, …`.
const ATTACK_STREAM: u64 = 1 << 63;
/// Random streams for monitoring, offset by the epoch.
const MONITOR_STREAM: u64 = 1 << 62;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SenseSpec {
    pub c: f64,
    pub attack: AttackSpec,
    #[serde(default)]
    pub warmup_epochs: usize,
    #[serde(default)]
    pub reversion: Reversion,
}

impl SenseSpec {
    pub fn new(c: f64, attack: AttackSpec) -> Self {
        SenseSpec {
            c,
            attack,
            warmup_epochs: 0,
            reversion: Reversion::Break,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.c) {
            return Err(Error::Spec(format!("c must lie in [0, 1], got {}", self.c)));
        }
        if self.c > 0.0 && self.c < 0.5 {
            log::warn!("c = {} is below the recommended range [0.5, 1]", self.c);
        }
        self.attack.validate()
    }
}

/// `log(1/c)`; infinite at `c = 0`.
pub fn loss_threshold(c: f64) -> f64 {
    (-c.ln()).max(0.0)
}

fn check_prob(name: &str, p: f64) -> Result<()> {
    if p == 0.0 {
        return Err(Error::Numeric(format!("{name} is 0; the log-loss is infinite")));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Input(format!("{name} must lie in (0, 1], got {p}")));
    }
    Ok(())
}

fn check_c(c: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&c) {
        return Err(Error::Input(format!("c must lie in [0, 1], got {c}")));
    }
    Ok(())
}

/// `max(0, −log p̂ − log(1/c))`: zero iff `p̂ ≥ c`.
pub fn trunc_nat_loss(p_hat: f64, c: f64) -> Result<f64> {
    check_prob("p_hat", p_hat)?;
    check_c(c)?;
    Ok((-p_hat.ln() - loss_threshold(c)).max(0.0))
}

/// `min(−log p̂(x̃), log(1/c))`.
pub fn trunc_rob_loss(p_hat_adv: f64, c: f64) -> Result<f64> {
    check_prob("p_hat_adv", p_hat_adv)?;
    check_c(c)?;
    Ok((-p_hat_adv.ln()).min(loss_threshold(c)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Partition {
    A,
    B,
    C,
}

pub fn partition_from_probs(p_nat: f64, p_adv: f64, c: f64) -> Partition {
    if p_adv > c {
        Partition::C
    } else if p_nat > c {
        Partition::B
    } else {
        Partition::A
    }
}

/// Labels every row given its full-PGD adversarial counterpart `x_tilde`.
pub fn partition_points(model: &Model, x: &Tensor, y: &[usize], x_tilde: &Tensor, c: f64) -> Result<Vec<Partition>> {
    let nat = model.evaluate(x, y)?;
    let adv = model.evaluate(x_tilde, y)?;
    Ok(nat
        .iter()
        .zip(&adv)
        .map(|(n, a)| partition_from_probs(n.p_label, a.p_label, c))
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossIdentity {
    /// `−log p̂_y(x̃ˢ)` with `p̂_y(x̃ˢ)` the confidence the sensible example
    /// retains: `p_nat` in A, `c` in B, `p_adv` in C.
    pub unified: f64,
    /// `ℓᵗ_nat + ℓᵗ_rob`.
    pub decomposed: f64,
    pub piecewise: f64,
}

/// The three formulations of the sensible loss for scalar confidences.
pub fn loss_identity_check(p_nat: f64, p_adv: f64, c: f64) -> Result<LossIdentity> {
    check_prob("p_nat", p_nat)?;
    check_prob("p_adv", p_adv)?;
    if p_adv > p_nat {
        return Err(Error::Input(format!(
            "adversarial confidence {p_adv} exceeds natural confidence {p_nat}"
        )));
    }
    check_c(c)?;
    let decomposed = trunc_nat_loss(p_nat, c)? + trunc_rob_loss(p_adv, c)?;
    let (piecewise, retained) = match partition_from_probs(p_nat, p_adv, c) {
        Partition::A => (-p_nat.ln(), p_nat),
        Partition::B => (loss_threshold(c), c),
        Partition::C => (-p_adv.ln(), p_adv),
    };
    Ok(LossIdentity {
        unified: -retained.ln(),
        decomposed,
        piecewise,
    })
}

fn logit(p: f64) -> f64 {
    p.ln() - (-p).ln_1p()
}

/// The unified loss `−log p̂_y(x̃ˢ)` found by exhaustive search.
///
/// Builds a two-class linear score on the unit ℓ∞ ball whose clean
/// confidence is `p_nat` and whose worst corner has confidence `p_adv`. For
/// group B a second corner sits exactly on the level set `p̂ = c`. The
/// sensible example is the lattice point of maximum loss among those with
/// `p̂ ≥ c` (or the clean point in group A).
pub fn unified_loss_on_grid(p_nat: f64, p_adv: f64, c: f64, res: usize) -> Result<f64> {
    loss_identity_check(p_nat, p_adv, c)?;
    let m0 = logit(p_nat);
    let drop = m0 - logit(p_adv);
    let (a, b) = if p_adv <= c && c < p_nat {
        let t = m0 - logit(c);
        (-(drop + t) / 2.0, -(drop - t) / 2.0)
    } else {
        (-drop / 2.0, -drop / 2.0)
    };
    let conf = |u: &[f64; 2]| {
        let m = m0 + a * u[0] + b * u[1];
        let z = [0.0, m];
        crate::autodiff::softmax_probs(&z).map(|p| p[1])
    };
    if p_nat <= c {
        return Ok(-conf(&[0.0, 0.0])?.ln());
    }
    let found = grid_search_ball(&[0.0, 0.0], 1.0, Norm::Linf, res, None, |pts| {
        pts.iter()
            .map(|u| {
                let p = conf(u)?;
                Ok(if p >= c - 1e-12 { -p.ln() } else { f64::NEG_INFINITY })
            })
            .collect()
    })?;
    Ok(found.expect("the clean point is feasible").1)
}

fn plans_for(spec: &SenseSpec, n: usize) -> Vec<RowPlan> {
    let plan = if spec.c <= 0.0 {
        RowPlan::PGD
    } else {
        RowPlan {
            threshold: loss_threshold(spec.c),
            gate_misclassified: true,
        }
    };
    vec![plan; n]
}

/// Sensible adversarial examples for a batch, with the engine's cost
/// counters.
///
/// Misclassified rows and, for `c ≥ 1`, every row are returned unchanged.
/// With `c = 0` there is no threshold and no gate: the output is exactly
/// [`pgd`](crate::attacks::pgd) with the same random stream.
pub fn sensible_examples_with_stats<R: Rng + ?Sized>(
    model: &Model,
    x: &Tensor,
    y: &[usize],
    spec: &SenseSpec,
    rng: &mut R,
) -> Result<(Tensor, EngineStats)> {
    spec.validate()?;
    if spec.c >= 1.0 {
        return Ok((x.clone(), EngineStats::default()));
    }
    let plans = plans_for(spec, x.rows());
    ascend(model, x, y, &spec.attack, &plans, spec.reversion, rng)
}

pub fn sensible_example<R: Rng + ?Sized>(
    model: &Model,
    x: &Tensor,
    y: &[usize],
    spec: &SenseSpec,
    rng: &mut R,
) -> Result<Tensor> {
    Ok(sensible_examples_with_stats(model, x, y, spec, rng)?.0)
}

/// Per-row cross-entropy at the sensible examples.
pub fn sense_loss<R: Rng + ?Sized>(
    model: &Model,
    x: &Tensor,
    y: &[usize],
    spec: &SenseSpec,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let xs = sensible_example(model, x, y, spec, rng)?;
    Ok(model.evaluate(&xs, y)?.iter().map(|e| e.loss).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSpec {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    #[serde(default)]
    pub lr_decay_steps: Vec<usize>,
    #[serde(default = "one")]
    pub lr_decay_factor: f64,
    #[serde(default)]
    pub weight_decay: f64,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> f64 {
    1.0
}

impl TrainSpec {
    pub fn new(epochs: usize, batch_size: usize, lr: f64, seed: u64) -> Self {
        TrainSpec {
            epochs,
            batch_size,
            lr,
            lr_decay_steps: Vec::new(),
            lr_decay_factor: 1.0,
            weight_decay: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Spec("epochs and batch size must be positive".into()));
        }
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(Error::Spec(format!("learning rate must be positive, got {}", self.lr)));
        }
        if !(self.lr_decay_factor > 0.0 && self.lr_decay_factor <= 1.0) {
            return Err(Error::Spec(format!(
                "decay factor must lie in (0, 1], got {}",
                self.lr_decay_factor
            )));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::Spec(format!(
                "weight decay must be ≥ 0, got {}",
                self.weight_decay
            )));
        }
        Ok(())
    }

    /// Step-decayed learning rate in effect during `epoch` (0-based).
    pub fn lr_at(&self, epoch: usize) -> f64 {
        let k = self.lr_decay_steps.iter().filter(|&&s| s <= epoch).count();
        self.lr * self.lr_decay_factor.powi(k as i32)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Method {
    Natural,
    Regular(AttackSpec),
    Sensible(SenseSpec),
}

/// Held-out set evaluated after every epoch.
#[derive(Clone, Copy, Debug)]
pub struct Monitor<'a> {
    pub set: &'a LabeledSet,
    /// Attack for robust accuracy, partition and sensible loss; `None`
    /// evaluates clean inputs only.
    pub attack: Option<AttackSpec>,
    pub c: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub nat_acc: f64,
    /// NaN without a monitor attack.
    pub rob_acc: f64,
    pub n_a: usize,
    pub n_b: usize,
    pub n_c: usize,
    pub mean_sense_loss: f64,
    pub lr: f64,
    pub param_hash: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub records: Vec<EpochRecord>,
}

impl TrainLog {
    pub const HEADER: [&'static str; 9] = [
        "epoch",
        "nat_acc",
        "rob_acc",
        "n_A",
        "n_B",
        "n_C",
        "mean_sense_loss",
        "lr",
        "param_hash",
    ];

    pub fn rows(&self) -> Vec<Vec<String>> {
        self.records
            .iter()
            .map(|r| {
                vec![
                    r.epoch.to_string(),
                    csvio::real(r.nat_acc),
                    csvio::real(r.rob_acc),
                    r.n_a.to_string(),
                    r.n_b.to_string(),
                    r.n_c.to_string(),
                    csvio::real(r.mean_sense_loss),
                    csvio::real(r.lr),
                    r.param_hash.clone(),
                ]
            })
            .collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        csvio::write_table(path, &Self::HEADER, &self.rows())
    }
}

fn monitor_epoch(model: &Model, mon: &Monitor, epoch: usize, lr: f64, seed: u64) -> Result<EpochRecord> {
    let x = mon.set.inputs();
    let y = mon.set.labels();
    let nat = model.evaluate(x, y)?;
    let n = nat.len().max(1) as f64;
    let nat_acc = crate::attacks::accuracy(&nat, y);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(MONITOR_STREAM + epoch as u64);
    let (rob_acc, adv_p, sense_loss) = match &mon.attack {
        Some(a) => {
            let out = crate::attacks::worst_case_over_restarts(model, x, y, a, &mut rng)?;
            let adv = model.evaluate(&out.worst, y)?;
            let sl = sense_loss(model, x, y, &SenseSpec::new(mon.c, *a), &mut rng)?;
            (
                out.robust_accuracy(),
                adv.iter().map(|e| e.p_label).collect::<Vec<_>>(),
                sl.iter().sum::<f64>() / n,
            )
        }
        None => (
            f64::NAN,
            nat.iter().map(|e| e.p_label).collect(),
            nat.iter().map(|e| e.loss).sum::<f64>() / n,
        ),
    };
    let mut counts = [0usize; 3];
    for (e, &pa) in nat.iter().zip(&adv_p) {
        counts[partition_from_probs(e.p_label, pa, mon.c) as usize] += 1;
    }
    Ok(EpochRecord {
        epoch,
        nat_acc,
        rob_acc,
        n_a: counts[0],
        n_b: counts[1],
        n_c: counts[2],
        mean_sense_loss: sense_loss,
        lr,
        param_hash: model.hash_hex()[..16].to_string(),
    })
}

fn augment<R: Rng + ?Sized>(
    model: &Model,
    xb: &Tensor,
    yb: &[usize],
    method: &Method,
    epoch: usize,
    rng: &mut R,
) -> Result<Tensor> {
    match method {
        Method::Natural => Ok(xb.clone()),
        Method::Regular(a) => {
            let plans = vec![RowPlan::PGD; xb.rows()];
            Ok(ascend(model, xb, yb, a, &plans, Reversion::Break, rng)?.0)
        }
        Method::Sensible(s) => {
            if s.c >= 1.0 {
                return Ok(xb.clone());
            }
            let mut plans = plans_for(s, xb.rows());
            if epoch < s.warmup_epochs && s.c > 0.0 {
                let thr = loss_threshold(s.c);
                for (plan, (e, &l)) in plans.iter_mut().zip(model.evaluate(xb, yb)?.iter().zip(yb)) {
                    if e.correct(l) && e.loss < thr {
                        *plan = RowPlan::PGD;
                    }
                }
            }
            let (out, _) = ascend(model, xb, yb, &s.attack, &plans, s.reversion, rng)?;
            if cfg!(debug_assertions) && s.c > 0.0 {
                let evals = model.evaluate(&out, yb)?;
                for (i, e) in evals.iter().enumerate() {
                    debug_assert!(
                        plans[i].threshold.is_infinite() || e.loss <= plans[i].threshold || out.row(i) == xb.row(i),
                        "sensible example {i} exceeds the loss threshold"
                    );
                }
            }
            Ok(out)
        }
    }
}

/// Mini-batch SGD on the (possibly perturbed) cross-entropy. The observer
/// sees the model after every epoch.
pub fn train(
    mut model: Model,
    set: &LabeledSet,
    method: &Method,
    spec: &TrainSpec,
    monitor: Option<&Monitor>,
    observer: &mut dyn FnMut(usize, &Model),
) -> Result<(Model, TrainLog)> {
    spec.validate()?;
    match method {
        Method::Regular(a) => a.validate()?,
        Method::Sensible(s) => s.validate()?,
        Method::Natural => {}
    }
    if set.is_empty() {
        return Err(Error::Input("training set is empty".into()));
    }
    if set.features() != model.input_len() {
        return Err(Error::Shape {
            op: "train(features)",
            left: vec![set.features()],
            right: vec![model.input_len()],
        });
    }
    let mut schedule = batches(set, spec.batch_size, spec.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(ATTACK_STREAM);
    let mut log = TrainLog::default();
    for epoch in 0..spec.epochs {
        let lr = spec.lr_at(epoch);
        let epoch_batches = schedule.next().expect("infinite schedule");
        for idx in epoch_batches {
            let xb = set.inputs().select_rows(&idx);
            let yb: Vec<usize> = idx.iter().map(|&i| set.labels()[i]).collect();
            let aug = augment(&model, &xb, &yb, method, epoch, &mut rng)?;
            let (_, mut grads) = model.loss_and_param_grads(&aug, &yb)?;
            let scale = 1.0 / idx.len() as f64;
            for g in &mut grads {
                g.data_mut().iter_mut().for_each(|v| *v *= scale);
            }
            sgd_step(model.params_mut(), &grads, lr, spec.weight_decay)?;
        }
        if let Some(mon) = monitor {
            let rec = monitor_epoch(&model, mon, epoch, lr, spec.seed)?;
            log::info!(
                "epoch {epoch}: nat {:.4} rob {:.4} A/B/C {}/{}/{} sense loss {:.4}",
                rec.nat_acc,
                rec.rob_acc,
                rec.n_a,
                rec.n_b,
                rec.n_c,
                rec.mean_sense_loss
            );
            log.records.push(rec);
        }
        observer(epoch, &model);
    }
    Ok((model, log))
}

pub fn train_sense(
    model: Model,
    set: &LabeledSet,
    sense: &SenseSpec,
    spec: &TrainSpec,
    monitor: Option<&Monitor>,
) -> Result<(Model, TrainLog)> {
    train(model, set, &Method::Sensible(*sense), spec, monitor, &mut |_, _| {})
}

pub fn train_rat(
    model: Model,
    set: &LabeledSet,
    attack: &AttackSpec,
    spec: &TrainSpec,
    monitor: Option<&Monitor>,
) -> Result<(Model, TrainLog)> {
    train(model, set, &Method::Regular(*attack), spec, monitor, &mut |_, _| {})
}

pub fn train_nat(
    model: Model,
    set: &LabeledSet,
    spec: &TrainSpec,
    monitor: Option<&Monitor>,
) -> Result<(Model, TrainLog)> {
    train(model, set, &Method::Natural, spec, monitor, &mut |_, _| {})
}
