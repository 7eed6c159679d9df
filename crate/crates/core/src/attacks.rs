//! Norm-ball projection, FGSM, PGD and restart evaluation.
//!
//! PGD and sensible adversarial generation share one batch engine
//! ([`ascend`]). The engine keeps, for every row, the last iterate whose loss
//! stayed within that row's threshold; with an infinite threshold it is plain
//! PGD.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::nn::{Model, RowEval};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Norm {
    Linf,
    /// Finite `p ≥ 1`.
    Lp(f64),
}

impl Norm {
    pub fn of(self, v: &[f64]) -> f64 {
        match self {
            Norm::Linf => v.iter().fold(0.0, |m, x| m.max(x.abs())),
            Norm::Lp(2.0) => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
            Norm::Lp(1.0) => v.iter().map(|x| x.abs()).sum(),
            Norm::Lp(p) => v.iter().map(|x| x.abs().powf(p)).sum::<f64>().powf(1.0 / p),
        }
    }

    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        self.of(&d)
    }

    fn validate(self) -> Result<()> {
        match self {
            Norm::Lp(p) if !(p >= 1.0) || !p.is_finite() => {
                Err(Error::Spec(format!("norm order must be finite and ≥ 1, got {p}")))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Norm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Norm::Linf => write!(f, "linf"),
            Norm::Lp(p) => write!(f, "l{p}"),
        }
    }
}

impl FromStr for Norm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Norm> {
        let t = s.trim().to_ascii_lowercase();
        if t == "linf" || t == "inf" {
            return Ok(Norm::Linf);
        }
        let num = t.strip_prefix('l').unwrap_or(&t);
        let p: f64 = num
            .parse()
            .map_err(|_| Error::Spec(format!("unknown norm `{s}`; use linf or l<p>")))?;
        let n = Norm::Lp(p);
        n.validate()?;
        Ok(n)
    }
}

impl TryFrom<String> for Norm {
    type Error = Error;
    fn try_from(s: String) -> Result<Norm> {
        s.parse()
    }
}

impl From<Norm> for String {
    fn from(n: Norm) -> String {
        n.to_string()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackSpec {
    pub norm: Norm,
    pub epsilon: f64,
    pub step_size: f64,
    pub steps: usize,
    pub restarts: usize,
    pub random_start: bool,
    pub clip: Option<(f64, f64)>,
}

impl AttackSpec {
    pub fn linf(epsilon: f64, step_size: f64, steps: usize) -> Self {
        AttackSpec {
            norm: Norm::Linf,
            epsilon,
            step_size,
            steps,
            restarts: 1,
            random_start: false,
            clip: None,
        }
    }

    pub fn l2(epsilon: f64, step_size: f64, steps: usize) -> Self {
        AttackSpec {
            norm: Norm::Lp(2.0),
            ..AttackSpec::linf(epsilon, step_size, steps)
        }
    }

    pub fn with_clip(mut self, lo: f64, hi: f64) -> Self {
        self.clip = Some((lo, hi));
        self
    }

    pub fn with_restarts(mut self, restarts: usize, random_start: bool) -> Self {
        self.restarts = restarts;
        self.random_start = random_start;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.norm.validate()?;
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(Error::Spec(format!(
                "epsilon must be finite and ≥ 0, got {}",
                self.epsilon
            )));
        }
        if !(self.step_size > 0.0) || !self.step_size.is_finite() {
            return Err(Error::Spec(format!(
                "step size must be finite and > 0, got {}",
                self.step_size
            )));
        }
        if self.steps == 0 {
            return Err(Error::Spec("attack needs at least one step".into()));
        }
        if self.restarts == 0 {
            return Err(Error::Spec("attack needs at least one restart".into()));
        }
        if let Some((lo, hi)) = self.clip {
            if !(lo < hi) {
                return Err(Error::Spec(format!("clip domain [{lo}, {hi}] is empty")));
            }
        }
        Ok(())
    }
}

/// Projects `candidate` onto the `epsilon`-ball around `center`, then onto
/// `clip`. Idempotent: projecting a projected point returns it unchanged.
pub fn project(norm: Norm, candidate: &[f64], center: &[f64], epsilon: f64, clip: Option<(f64, f64)>) -> Vec<f64> {
    let mut z = candidate.to_vec();
    project_in_place(norm, &mut z, center, epsilon, clip);
    z
}

pub fn project_in_place(norm: Norm, z: &mut [f64], center: &[f64], epsilon: f64, clip: Option<(f64, f64)>) {
    match norm {
        Norm::Linf => {
            for (v, &c) in z.iter_mut().zip(center) {
                *v = v.clamp(c - epsilon, c + epsilon);
            }
        }
        Norm::Lp(_) => {
            let delta: Vec<f64> = z.iter().zip(center).map(|(v, c)| v - c).collect();
            let n = norm.of(&delta);
            if n > epsilon {
                let mut scale = epsilon / n;
                loop {
                    for ((v, &c), d) in z.iter_mut().zip(center).zip(&delta) {
                        *v = c + d * scale;
                    }
                    if norm.distance(z, center) <= epsilon {
                        break;
                    }
                    scale *= 1.0 - 4.0 * f64::EPSILON;
                }
            }
        }
    }
    if let Some((lo, hi)) = clip {
        for v in z.iter_mut() {
            *v = v.clamp(lo, hi);
        }
    }
}

/// `sign(0) = 0`.
fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Ascent direction: coordinate signs for ℓ∞, the gradient normalized in
/// the `p`-norm otherwise. A zero gradient gives a zero direction.
pub fn step_direction(norm: Norm, grad: &[f64]) -> Vec<f64> {
    match norm {
        Norm::Linf => grad.iter().map(|&g| sign(g)).collect(),
        Norm::Lp(_) => {
            let n = norm.of(grad);
            if n > 0.0 {
                grad.iter().map(|g| g / n).collect()
            } else {
                vec![0.0; grad.len()]
            }
        }
    }
}

/// A uniformly drawn point of the ball for ℓ∞; a normalized Gaussian
/// direction with radius `ε·u^(1/dim)` otherwise. Projected onto `clip`.
pub fn random_start<R: Rng + ?Sized>(
    norm: Norm,
    center: &[f64],
    epsilon: f64,
    clip: Option<(f64, f64)>,
    rng: &mut R,
) -> Vec<f64> {
    let mut z: Vec<f64> = match norm {
        Norm::Linf => center
            .iter()
            .map(|&c| c + epsilon * (2.0 * rng.random::<f64>() - 1.0))
            .collect(),
        Norm::Lp(_) => {
            let g: Vec<f64> = (0..center.len()).map(|_| rng.sample(StandardNormal)).collect();
            let n = norm.of(&g);
            let u: f64 = rng.random();
            let r = epsilon * u.powf(1.0 / center.len() as f64);
            center
                .iter()
                .zip(&g)
                .map(|(c, gi)| if n > 0.0 { c + r * gi / n } else { *c })
                .collect()
        }
    };
    project_in_place(norm, &mut z, center, epsilon, clip);
    z
}

/// What to do when an iterate's loss exceeds its row threshold.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Reversion {
    /// Return the previous accepted iterate.
    #[default]
    Break,
    /// Step back to the previous accepted iterate, perturb it by uniform
    /// noise of half-width `η₁/10`, re-project and keep iterating.
    NoiseContinue,
}

/// Per-row control of the batch engine.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct RowPlan {
    /// Loss ceiling; `f64::INFINITY` disables reversion.
    pub threshold: f64,
    /// Return the clean input unchanged when it is misclassified.
    pub gate_misclassified: bool,
}

impl RowPlan {
    pub const PGD: RowPlan = RowPlan {
        threshold: f64::INFINITY,
        gate_misclassified: false,
    };
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EngineStats {
    pub forward_rows: usize,
    pub backward_rows: usize,
    pub reversions: usize,
}

/// Batch projected gradient ascent on the cross-entropy with per-row
/// reversion thresholds.
///
/// Every row costs at most `K` gradient evaluations and `K + 1` forward
/// evaluations (one more when both gating and a random start are active).
/// Random-start noise is drawn for every row in order, whatever the plans,
/// so the random stream does not depend on the thresholds.
pub(crate) fn ascend<R: Rng + ?Sized>(
    model: &Model,
    x: &Tensor,
    y: &[usize],
    spec: &AttackSpec,
    plans: &[RowPlan],
    mode: Reversion,
    rng: &mut R,
) -> Result<(Tensor, EngineStats)> {
    spec.validate()?;
    let n = x.rows();
    assert_eq!(plans.len(), n, "one plan per row");
    let mut stats = EngineStats::default();

    let mut current: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            if spec.random_start {
                random_start(spec.norm, x.row(i), spec.epsilon, spec.clip, rng)
            } else {
                x.row(i).to_vec()
            }
        })
        .collect();
    let mut accepted: Vec<Vec<f64>> = (0..n).map(|i| x.row(i).to_vec()).collect();
    let mut active: Vec<usize> = (0..n).collect();

    if spec.random_start && plans.iter().any(|p| p.gate_misclassified) {
        let gated: Vec<usize> = (0..n).filter(|&i| plans[i].gate_misclassified).collect();
        let evals = model.evaluate(&x.select_rows(&gated), &select(y, &gated))?;
        stats.forward_rows += gated.len();
        let mut wrong = vec![false; n];
        for (&i, e) in gated.iter().zip(&evals) {
            wrong[i] = !e.correct(y[i]);
        }
        active.retain(|&i| !wrong[i]);
    }
    // With no random start the first gradient pass doubles as the gate.
    let gate_in_loop = !spec.random_start;

    let width = x.row_len();
    for k in 0..spec.steps {
        if active.is_empty() {
            break;
        }
        let batch = rows_tensor(&current, &active, width)?;
        let (grad, evals) = model.input_gradient(&batch, &select(y, &active))?;
        stats.forward_rows += active.len();
        stats.backward_rows += active.len();

        let mut still = Vec::with_capacity(active.len());
        for (j, &i) in active.iter().enumerate() {
            let e = evals[j];
            if k == 0 && gate_in_loop && plans[i].gate_misclassified && !e.correct(y[i]) {
                continue;
            }
            if e.loss > plans[i].threshold {
                stats.reversions += 1;
                match mode {
                    Reversion::Break => continue,
                    Reversion::NoiseContinue => {
                        let h = spec.step_size / 10.0;
                        let mut z: Vec<f64> = accepted[i]
                            .iter()
                            .map(|v| v + h * (2.0 * rng.random::<f64>() - 1.0))
                            .collect();
                        project_in_place(spec.norm, &mut z, x.row(i), spec.epsilon, spec.clip);
                        current[i] = z;
                        still.push(i);
                        continue;
                    }
                }
            }
            accepted[i].clone_from(&current[i]);
            let dir = step_direction(spec.norm, grad.row(j));
            let z = &mut current[i];
            for (v, d) in z.iter_mut().zip(&dir) {
                *v += spec.step_size * d;
            }
            project_in_place(spec.norm, z, x.row(i), spec.epsilon, spec.clip);
            still.push(i);
        }
        active = still;
    }

    // Final iterate: accept unless a finite threshold is exceeded.
    let checked: Vec<usize> = active
        .iter()
        .copied()
        .filter(|&i| plans[i].threshold.is_finite())
        .collect();
    if !checked.is_empty() {
        let evals = model.evaluate(&rows_tensor(&current, &checked, width)?, &select(y, &checked))?;
        stats.forward_rows += checked.len();
        for (&i, e) in checked.iter().zip(&evals) {
            if e.loss > plans[i].threshold {
                stats.reversions += 1;
            } else {
                accepted[i].clone_from(&current[i]);
            }
        }
    }
    for &i in &active {
        if !plans[i].threshold.is_finite() {
            accepted[i].clone_from(&current[i]);
        }
    }

    let refs: Vec<&[f64]> = accepted.iter().map(|r| r.as_slice()).collect();
    let mut shape = x.shape().to_vec();
    shape[0] = n;
    Ok((Tensor::new(shape, refs.concat())?, stats))
}

fn select(y: &[usize], idx: &[usize]) -> Vec<usize> {
    idx.iter().map(|&i| y[i]).collect()
}

fn rows_tensor(rows: &[Vec<f64>], idx: &[usize], width: usize) -> Result<Tensor> {
    let refs: Vec<&[f64]> = idx.iter().map(|&i| rows[i].as_slice()).collect();
    Tensor::stack_rows(&[width], &refs)
}

/// `clip(x + ε·sign(∇ₓℓ))`.
pub fn fgsm(model: &Model, x: &Tensor, y: &[usize], epsilon: f64, clip: Option<(f64, f64)>) -> Result<Tensor> {
    if epsilon == 0.0 {
        return Ok(x.clone());
    }
    let (grad, _) = model.input_gradient(x, y)?;
    let mut out = x.clone();
    for i in 0..x.rows() {
        let center = x.row(i).to_vec();
        let row = out.row_mut(i);
        for (v, g) in row.iter_mut().zip(grad.row(i)) {
            *v += epsilon * sign(*g);
        }
        project_in_place(Norm::Linf, row, &center, epsilon, clip);
    }
    Ok(out)
}

/// `K` steps of projected gradient ascent from `x` (or a random start).
/// The gradient is taken at the current iterate.
pub fn pgd<R: Rng + ?Sized>(model: &Model, x: &Tensor, y: &[usize], spec: &AttackSpec, rng: &mut R) -> Result<Tensor> {
    let plans = vec![RowPlan::PGD; x.rows()];
    Ok(ascend(model, x, y, spec, &plans, Reversion::Break, rng)?.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RestartOutcome {
    /// Per row, the restart point with the largest loss.
    pub worst: Tensor,
    /// `losses[r][i]`: loss of row `i` after restart `r`.
    pub losses: Vec<Vec<f64>>,
    /// `correct[r][i]`: row `i` classified correctly after restart `r`.
    pub correct: Vec<Vec<bool>>,
}

impl RestartOutcome {
    /// Fraction of rows still correct after the first `r + 1` restarts,
    /// for every `r`. Non-increasing by construction.
    pub fn cumulative_accuracy(&self) -> Vec<f64> {
        let n = self.worst.rows();
        let mut alive = vec![true; n];
        self.correct
            .iter()
            .map(|c| {
                alive.iter_mut().zip(c).for_each(|(a, &ok)| *a &= ok);
                if n == 0 {
                    1.0
                } else {
                    alive.iter().filter(|&&a| a).count() as f64 / n as f64
                }
            })
            .collect()
    }

    /// Fraction of rows correct under every restart.
    pub fn robust_accuracy(&self) -> f64 {
        *self.cumulative_accuracy().last().unwrap_or(&1.0)
    }
}

/// Runs `spec.restarts` PGD attacks drawing from one random stream and keeps,
/// per row, the point with maximum loss.
pub fn worst_case_over_restarts<R: Rng + ?Sized>(
    model: &Model,
    x: &Tensor,
    y: &[usize],
    spec: &AttackSpec,
    rng: &mut R,
) -> Result<RestartOutcome> {
    spec.validate()?;
    let mut worst = x.clone();
    let mut best = vec![f64::NEG_INFINITY; x.rows()];
    let mut losses = Vec::with_capacity(spec.restarts);
    let mut correct = Vec::with_capacity(spec.restarts);
    for _ in 0..spec.restarts {
        let adv = pgd(model, x, y, spec, rng)?;
        let evals = model.evaluate(&adv, y)?;
        for (i, e) in evals.iter().enumerate() {
            if e.loss > best[i] {
                best[i] = e.loss;
                worst.row_mut(i).copy_from_slice(adv.row(i));
            }
        }
        losses.push(evals.iter().map(|e| e.loss).collect());
        correct.push(evals.iter().zip(y).map(|(e, &l)| e.correct(l)).collect());
    }
    Ok(RestartOutcome { worst, losses, correct })
}

/// Victim accuracy on worst-case restart points generated against
/// `generator`.
pub fn transfer_eval<R: Rng + ?Sized>(
    generator: &Model,
    victim: &Model,
    x: &Tensor,
    y: &[usize],
    spec: &AttackSpec,
    rng: &mut R,
) -> Result<f64> {
    if generator.input_len() != victim.input_len() || generator.classes() != victim.classes() {
        return Err(Error::Spec(format!(
            "generator ({} → {}) and victim ({} → {}) dimensions differ",
            generator.input_len(),
            generator.classes(),
            victim.input_len(),
            victim.classes()
        )));
    }
    let adv = worst_case_over_restarts(generator, x, y, spec, rng)?.worst;
    Ok(accuracy(&victim.evaluate(&adv, y)?, y))
}

pub fn accuracy(evals: &[RowEval], y: &[usize]) -> f64 {
    if evals.is_empty() {
        return 0.0;
    }
    evals.iter().zip(y).filter(|(e, &l)| e.correct(l)).count() as f64 / evals.len() as f64
}

/// Losses of every PGD iterate, `trace[k][i]` for `k = 0..=K` (no restarts,
/// no reversion).
pub fn pgd_loss_trace<R: Rng + ?Sized>(
    model: &Model,
    x: &Tensor,
    y: &[usize],
    spec: &AttackSpec,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    let mut z = x.clone();
    if spec.random_start {
        for i in 0..x.rows() {
            let s = random_start(spec.norm, x.row(i), spec.epsilon, spec.clip, rng);
            z.row_mut(i).copy_from_slice(&s);
        }
    }
    let mut trace = Vec::with_capacity(spec.steps + 1);
    for _ in 0..spec.steps {
        let (grad, evals) = model.input_gradient(&z, y)?;
        trace.push(evals.iter().map(|e| e.loss).collect());
        for i in 0..x.rows() {
            let dir = step_direction(spec.norm, grad.row(i));
            let row = z.row_mut(i);
            row.iter_mut().zip(&dir).for_each(|(v, d)| *v += spec.step_size * d);
            project_in_place(spec.norm, row, x.row(i), spec.epsilon, spec.clip);
        }
    }
    trace.push(model.evaluate(&z, y)?.iter().map(|e| e.loss).collect());
    Ok(trace)
}
