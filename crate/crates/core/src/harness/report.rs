use std::path::Path;

use rand::Rng;
use serde::Serialize;

use super::csvio::{real, write_table};
use crate::attacks::{accuracy, pgd_loss_trace, worst_case_over_restarts, AttackSpec};
use crate::autodiff::Tensor;
use crate::data::LabeledSet;
use crate::error::{Error, Result};
use crate::nn::Model;
use crate::sense::partition_from_probs;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub natural_acc: f64,
    /// `(attack label, robust accuracy)`.
    pub robust: Vec<(String, f64)>,
    /// Cumulative worst-case accuracy after each restart.
    pub worst_case_curve: Vec<f64>,
    /// Counts of groups A, B, C at the evaluation `c`.
    pub partition: Option<[usize; 3]>,
    /// Distinct predicted classes on clean inputs.
    pub classes_predicted: usize,
}

impl EvalReport {
    pub fn robust_acc(&self) -> Option<f64> {
        self.robust.first().map(|r| r.1)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut rows = vec![
            vec!["natural_acc".to_string(), real(self.natural_acc)],
            vec!["classes_predicted".to_string(), self.classes_predicted.to_string()],
        ];
        for (name, acc) in &self.robust {
            rows.push(vec![format!("robust_acc[{name}]"), real(*acc)]);
        }
        for (k, acc) in self.worst_case_curve.iter().enumerate() {
            rows.push(vec![format!("worst_case_after_restart_{}", k + 1), real(*acc)]);
        }
        if let Some(counts) = self.partition {
            for (g, n) in ["n_A", "n_B", "n_C"].iter().zip(counts) {
                rows.push(vec![g.to_string(), n.to_string()]);
            }
        }
        write_table(path, &["metric", "value"], &rows)
    }
}

pub fn attack_label(a: &AttackSpec) -> String {
    format!("pgd{}x{}_{}_eps{}", a.steps, a.restarts, a.norm, a.epsilon)
}

/// Natural accuracy and, given an attack, robust accuracy as the fraction of
/// examples surviving every restart. Partition counts need both an attack
/// and `c`.
pub fn eval_accuracy<R: Rng + ?Sized>(
    model: &Model,
    set: &LabeledSet,
    attack: Option<&AttackSpec>,
    c: Option<f64>,
    rng: &mut R,
) -> Result<EvalReport> {
    let (x, y) = (set.inputs(), set.labels());
    let nat = model.evaluate(x, y)?;
    let natural_acc = accuracy(&nat, y);
    let mut seen = vec![false; model.classes()];
    for e in &nat {
        seen[e.predicted] = true;
    }
    let mut report = EvalReport {
        natural_acc,
        robust: Vec::new(),
        worst_case_curve: Vec::new(),
        partition: None,
        classes_predicted: seen.iter().filter(|&&s| s).count(),
    };
    if let Some(a) = attack {
        let out = worst_case_over_restarts(model, x, y, a, rng)?;
        report.robust.push((attack_label(a), out.robust_accuracy()));
        report.worst_case_curve = out.cumulative_accuracy();
        if let Some(c) = c {
            let adv = model.evaluate(&out.worst, y)?;
            let mut counts = [0usize; 3];
            for (n, a) in nat.iter().zip(&adv) {
                counts[partition_from_probs(n.p_label, a.p_label, c) as usize] += 1;
            }
            report.partition = Some(counts);
        }
    }
    Ok(report)
}

/// Columns of reals sharing one strictly increasing abscissa.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurveSeries {
    pub x_label: String,
    pub x: Vec<f64>,
    pub series: Vec<(String, Vec<f64>)>,
}

impl CurveSeries {
    pub fn new(x_label: &str, x: Vec<f64>) -> Result<Self> {
        if x.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Input(format!("{x_label} values must be strictly increasing")));
        }
        Ok(CurveSeries {
            x_label: x_label.to_string(),
            x,
            series: Vec::new(),
        })
    }

    pub fn push(&mut self, name: impl Into<String>, y: Vec<f64>) -> Result<()> {
        if y.len() != self.x.len() {
            return Err(Error::Shape {
                op: "CurveSeries::push",
                left: vec![self.x.len()],
                right: vec![y.len()],
            });
        }
        self.series.push((name.into(), y));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.series.iter().find(|s| s.0 == name).map(|s| s.1.as_slice())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut header = vec![self.x_label.clone()];
        header.extend(self.series.iter().map(|s| s.0.clone()));
        let rows: Vec<Vec<String>> = (0..self.x.len())
            .map(|i| {
                let mut row = vec![real(self.x[i])];
                row.extend(self.series.iter().map(|s| real(s.1[i])));
                row
            })
            .collect();
        write_table(path, &header, &rows)
    }
}

/// Per-example loss against PGD step for the first restart (plus the mean),
/// and cumulative worst-case accuracy against restart index.
pub fn convergence_curves<R: Rng + ?Sized>(
    model: &Model,
    x: &Tensor,
    y: &[usize],
    spec: &AttackSpec,
    rng: &mut R,
) -> Result<(CurveSeries, CurveSeries)> {
    if x.rows() == 0 {
        return Err(Error::Input("convergence curves need at least one example".into()));
    }
    let single = AttackSpec { restarts: 1, ..*spec };
    let trace = pgd_loss_trace(model, x, y, &single, rng)?;
    let mut losses = CurveSeries::new("step", (0..trace.len()).map(|k| k as f64).collect())?;
    let n = x.rows();
    let mean = trace.iter().map(|t| t.iter().sum::<f64>() / n as f64).collect();
    losses.push("mean", mean)?;
    for i in 0..n {
        losses.push(format!("example_{i}"), trace.iter().map(|t| t[i]).collect())?;
    }
    let out = worst_case_over_restarts(model, x, y, spec, rng)?;
    let cum = out.cumulative_accuracy();
    let mut restarts = CurveSeries::new("restart", (1..=cum.len()).map(|k| k as f64).collect())?;
    restarts.push("worst_case_accuracy", cum)?;
    Ok((losses, restarts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::ModelSpec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy() -> (Model, LabeledSet) {
        let m = Model::build(ModelSpec::mlp(vec![2, 6, 3], 2)).unwrap();
        let x = Tensor::new(vec![6, 2], (0..12).map(|i| (i as f64 * 0.7).sin()).collect()).unwrap();
        let set = LabeledSet::new(x, vec![0, 1, 2, 0, 1, 2], 3, None).unwrap();
        (m, set)
    }

    #[test]
    fn zero_radius_keeps_natural_accuracy() {
        let (m, set) = toy();
        let a = AttackSpec::linf(0.0, 0.1, 5);
        let r = eval_accuracy(&m, &set, Some(&a), Some(0.5), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(r.robust_acc(), Some(r.natural_acc));
        assert_eq!(r.partition.unwrap().iter().sum::<usize>(), 6);
    }

    #[test]
    fn worst_case_curve_is_monotone() {
        let (m, set) = toy();
        let a = AttackSpec::linf(0.5, 0.1, 5).with_restarts(4, true);
        let r = eval_accuracy(&m, &set, Some(&a), None, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!(r.worst_case_curve.windows(2).all(|w| w[1] <= w[0]));
        assert!(r.robust_acc().unwrap() <= r.natural_acc);
    }

    #[test]
    fn empty_series_writes_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let mut s = CurveSeries::new("step", vec![]).unwrap();
        s.push("mean", vec![]).unwrap();
        s.write_csv(&path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "step,mean\n");
        assert!(CurveSeries::new("step", vec![0.0, 0.0]).is_err());
    }
}
