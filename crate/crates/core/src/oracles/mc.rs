use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::dist::{in_hole_neighbourhood, SyntheticDist, DEFAULT_ALPHA};
use super::grid::grid_points;
use super::risks::RiskReport;
use crate::attacks::Norm;
use crate::error::{Error, Result};

/// A classifier on ℝ² together with a worst-case perturbation oracle.
pub trait PointClassifier: Sync {
    fn classify(&self, x: [f64; 2]) -> usize;

    /// Whether some `x'` with `‖x'−x‖ ≤ ε` inside `domain` is misclassified.
    /// The default searches a 41×41 lattice of the ball.
    fn worst_case_error(&self, x: [f64; 2], y: usize, epsilon: f64, norm: Norm, domain: Option<(f64, f64)>) -> bool {
        grid_points(&x, epsilon, norm, 41, domain)
            .map(|pts| pts.iter().any(|&z| self.classify(z) != y))
            .unwrap_or(true)
    }
}

/// Class 1 iff `x₁ > t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Threshold {
    pub t: f64,
}

impl PointClassifier for Threshold {
    fn classify(&self, x: [f64; 2]) -> usize {
        usize::from(x[0] > self.t)
    }

    fn worst_case_error(&self, x: [f64; 2], y: usize, epsilon: f64, _norm: Norm, domain: Option<(f64, f64)>) -> bool {
        let (lo, hi) = domain.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
        if y == 1 {
            (x[0] - epsilon).max(lo) <= self.t
        } else {
            (x[0] + epsilon).min(hi) > self.t
        }
    }
}

/// Class 1 iff `w·x + b > 0`. The exact oracle ignores the domain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearRule {
    pub w: [f64; 2],
    pub b: f64,
}

impl PointClassifier for LinearRule {
    fn classify(&self, x: [f64; 2]) -> usize {
        usize::from(self.w[0] * x[0] + self.w[1] * x[1] + self.b > 0.0)
    }

    fn worst_case_error(&self, x: [f64; 2], y: usize, epsilon: f64, norm: Norm, _domain: Option<(f64, f64)>) -> bool {
        let score = self.w[0] * x[0] + self.w[1] * x[1] + self.b;
        let reach = epsilon * dual_norm(norm, &self.w);
        if y == 1 {
            score - reach <= 0.0
        } else {
            score + reach > 0.0
        }
    }
}

pub(crate) fn dual_norm(norm: Norm, w: &[f64]) -> f64 {
    match norm {
        Norm::Linf => Norm::Lp(1.0).of(w),
        Norm::Lp(1.0) => Norm::Linf.of(w),
        Norm::Lp(p) => Norm::Lp(p / (p - 1.0)).of(w),
    }
}

/// The Bayes rule of a synthetic distribution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BayesRule(pub SyntheticDist);

impl PointClassifier for BayesRule {
    fn classify(&self, x: [f64; 2]) -> usize {
        self.0.bayes_classify(x)
    }
}

/// Cheese-hole family: inside the closed ℓ∞ `r`-neighbourhood of the holes
/// predicts class 1 iff `x₁ > t`; outside it predicts the opposite of the
/// Bayes rule (the worst completion).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CheeseRule {
    pub alpha: f64,
    pub t: f64,
    pub r: f64,
}

impl PointClassifier for CheeseRule {
    fn classify(&self, x: [f64; 2]) -> usize {
        if in_hole_neighbourhood(x, self.alpha, self.r) {
            usize::from(x[0] > self.t)
        } else {
            usize::from(x[0] <= 0.5)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub n: usize,
}

/// Error frequency of `classifier` over `n` draws, optionally under the
/// exact worst-case attack of radius `ε` in `norm`. The standard error is
/// the binomial one at the estimate.
pub fn mc_risk(
    dist: &SyntheticDist,
    classifier: &dyn PointClassifier,
    attack: Option<(f64, Norm)>,
    n: usize,
    seed: u64,
) -> Result<McEstimate> {
    dist.validate()?;
    if n < 1000 {
        return Err(Error::Input(format!("Monte-Carlo needs n ≥ 1000, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let domain = dist.domain();
    let mut errors = 0usize;
    for _ in 0..n {
        let (x, y) = dist.draw(&mut rng);
        let wrong = match attack {
            None => classifier.classify(x) != y,
            Some((eps, norm)) => classifier.worst_case_error(x, y, eps, norm, domain),
        };
        errors += usize::from(wrong);
    }
    let est = errors as f64 / n as f64;
    Ok(McEstimate {
        estimate: est,
        std_error: (est * (1.0 - est) / n as f64).sqrt(),
        n,
    })
}

/// Distribution, classifier and optional `(radius, norm)` attack.
pub type McSetup = (SyntheticDist, Box<dyn PointClassifier>, Option<(f64, Norm)>);

/// The distribution, classifier and attack whose Monte-Carlo error frequency
/// estimates `metric` of `report`. `None` for derived metrics such as
/// `traded_robustness`.
pub fn mc_setup(report: &RiskReport, metric: &str) -> Option<McSetup> {
    let (p, eps) = (report.p, report.epsilon);
    let halves = SyntheticDist::UniformHalves { p };
    let linf = Some((eps, Norm::Linf));
    let cheese = |t: f64, r: f64| -> Box<dyn PointClassifier> {
        Box::new(CheeseRule {
            alpha: DEFAULT_ALPHA,
            t,
            r,
        })
    };
    let out: (SyntheticDist, Box<dyn PointClassifier>, Option<(f64, Norm)>) = match (report.setting, metric) {
        ("ex1", "r_std_bayes") => (halves, Box::new(Threshold { t: 0.5 }), None),
        ("ex1", "r_rob_bayes") => (halves, Box::new(Threshold { t: 0.5 }), linf),
        ("ex1", "r_std_frob") => (halves, Box::new(Threshold { t: 0.5 - eps }), None),
        ("ex1", "r_rob_frob") => (halves, Box::new(Threshold { t: 0.5 - eps }), linf),
        ("ex2", "r_std_worst_natural") => (halves, cheese(0.5, 0.0), None),
        ("ex2", "r_std_worst_sensible") => (halves, cheese(0.5, eps), None),
        ("ex2", "r_std_worst_robust" | "r_std_worst_robust_stated") => (halves, cheese(0.5 - eps, eps), None),
        ("three_clusters", m @ ("r_std_fstd" | "r_rob_fstd")) => {
            let dist = SyntheticDist::ThreeClusters {
                p,
                sigma: report.sigma?,
                m: report.m?,
            };
            let rule = Box::new(LinearRule { w: [1.0, 0.0], b: 0.0 });
            let attack = (m == "r_rob_fstd").then_some((eps, Norm::Lp(2.0)));
            (dist, rule, attack)
        }
        _ => return None,
    };
    Some(out)
}

/// Monte-Carlo estimate of one closed-form metric; `None` when the metric
/// has no direct estimator.
pub fn mc_for_metric(report: &RiskReport, metric: &str, n: usize, seed: u64) -> Result<Option<McEstimate>> {
    match mc_setup(report, metric) {
        Some((dist, rule, attack)) => mc_risk(&dist, rule.as_ref(), attack, n, seed).map(Some),
        None => Ok(None),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bayes_has_zero_error_on_halves() {
        let d = SyntheticDist::UniformHalves { p: 0.75 };
        let r = mc_risk(&d, &BayesRule(d), None, 10_000, 1).unwrap();
        assert_eq!(r.estimate, 0.0);
        assert_eq!(r.std_error, 0.0);
    }

    #[test]
    fn constant_classifier_error_is_class_mass() {
        let d = SyntheticDist::UniformHalves { p: 0.75 };
        let always_one = Threshold { t: f64::NEG_INFINITY };
        let r = mc_risk(&d, &always_one, None, 100_000, 2).unwrap();
        assert!((r.estimate - 0.25).abs() < 4.0 * (0.25f64 * 0.75 / 1e5).sqrt());
    }

    #[test]
    fn linear_oracle_matches_grid() {
        let rule = LinearRule { w: [0.6, -1.3], b: 0.2 };
        let mut diffs = 0;
        for i in 0..200 {
            let x = [(i as f64 * 0.37).sin(), (i as f64 * 0.91).cos()];
            let y = i % 2;
            for norm in [Norm::Linf, Norm::Lp(2.0)] {
                let exact = rule.worst_case_error(x, y, 0.3, norm, None);
                let grid = grid_points(&x, 0.3, norm, 201, None)
                    .unwrap()
                    .iter()
                    .any(|&z| rule.classify(z) != y);
                diffs += usize::from(exact != grid);
            }
        }
        // Only points within a lattice cell of the boundary may disagree.
        assert!(diffs <= 4, "{diffs}");
    }

    #[test]
    fn ex1_metrics_agree_with_simulation() {
        let r = super::super::ex1_risks(0.75, 0.1).unwrap();
        for e in &r.entries {
            if let Some(mc) = mc_for_metric(&r, e.metric, 100_000, 9).unwrap() {
                let se = (e.closed_form * (1.0 - e.closed_form) / 1e5).sqrt();
                assert!(
                    (mc.estimate - e.closed_form).abs() <= 4.0 * se + 1e-12,
                    "{}: {mc:?}",
                    e.metric
                );
            }
        }
        assert!(mc_for_metric(&r, "traded_robustness", 1000, 0).unwrap().is_none());
    }
}
