//! Finite checks of the optimality statements for sensible robustness on
//! discretized classifier families.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::dist::SyntheticDist;
use super::grid::grid_points;
use super::mc::{mc_risk, CheeseRule, PointClassifier, Threshold};
use crate::attacks::Norm;
use crate::error::Result;

/// Sensible 0-1 loss of `f` at `(x, y)`: the clean loss when the Bayes rule
/// errs at `x`, otherwise the worst loss over lattice points of the ball
/// whose Bayes label stays `y`.
fn sensible_zero_one(
    dist: &SyntheticDist,
    sensible_set: &[[f64; 2]],
    x: [f64; 2],
    y: usize,
    f: &dyn PointClassifier,
) -> bool {
    if dist.bayes_classify(x) != y {
        return f.classify(x) != y;
    }
    sensible_set.iter().any(|&z| f.classify(z) != y)
}

fn sensible_sets(
    dist: &SyntheticDist,
    pts: &[([f64; 2], usize)],
    epsilon: f64,
    norm: Norm,
    res: usize,
) -> Result<Vec<Vec<[f64; 2]>>> {
    pts.iter()
        .map(|&(x, y)| {
            Ok(grid_points(&x, epsilon, norm, res, dist.domain())?
                .into_iter()
                .filter(|&z| dist.bayes_classify(z) == y)
                .collect())
        })
        .collect()
}

fn draw_points(dist: &SyntheticDist, n: usize, seed: u64) -> Vec<([f64; 2], usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| dist.draw(&mut rng)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SensibleMinimizerOutcome {
    pub thresholds: Vec<f64>,
    /// Empirical sensible robust risk of each threshold classifier.
    pub risks: Vec<f64>,
    pub minimizers: Vec<usize>,
}

impl SensibleMinimizerOutcome {
    /// The Bayes threshold ½ is the only minimizer.
    pub fn unique_bayes_minimizer(&self) -> bool {
        self.minimizers.len() == 1 && (self.thresholds[self.minimizers[0]] - 0.5).abs() < 1e-12
    }
}

/// Uniform halves: empirical sensible robust risk of `count` vertical
/// threshold classifiers evenly spaced on `[0, 1]`.
pub fn sensible_minimizer_check(
    p: f64,
    epsilon: f64,
    norm: Norm,
    n: usize,
    count: usize,
    res: usize,
    seed: u64,
) -> Result<SensibleMinimizerOutcome> {
    let dist = SyntheticDist::UniformHalves { p };
    dist.validate()?;
    let pts = draw_points(&dist, n, seed);
    let sets = sensible_sets(&dist, &pts, epsilon, norm, res)?;
    let thresholds: Vec<f64> = (0..count).map(|k| k as f64 / (count - 1) as f64).collect();
    let risks: Vec<f64> = thresholds
        .iter()
        .map(|&t| {
            let f = Threshold { t };
            let errs = pts
                .iter()
                .zip(&sets)
                .filter(|((x, y), s)| sensible_zero_one(&dist, s, *x, *y, &f))
                .count();
            errs as f64 / n as f64
        })
        .collect();
    let best = risks.iter().copied().fold(f64::INFINITY, f64::min);
    let minimizers = (0..count).filter(|&i| risks[i] == best).collect();
    Ok(SensibleMinimizerOutcome {
        thresholds,
        risks,
        minimizers,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct BayesDominanceOutcome {
    pub points: usize,
    pub bayes_errors: usize,
    /// `(threshold, worst-case errors)` for every competitor.
    pub competitors: Vec<(f64, usize)>,
}

impl BayesDominanceOutcome {
    pub fn bayes_dominates(&self) -> bool {
        self.competitors.iter().all(|&(_, e)| self.bayes_errors <= e)
    }
}

/// Uniform halves restricted to points farther than `ε` from the Bayes
/// boundary: worst-case 0-1 errors of the Bayes rule against the robust
/// rule `½−ε` and `count` thresholds on `[0, 1]`.
pub fn bayes_dominance_check(
    p: f64,
    epsilon: f64,
    norm: Norm,
    n: usize,
    count: usize,
    seed: u64,
) -> Result<BayesDominanceOutcome> {
    let dist = SyntheticDist::UniformHalves { p };
    dist.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts = Vec::with_capacity(n);
    while pts.len() < n {
        let (x, y) = dist.draw(&mut rng);
        if (x[0] - 0.5).abs() > epsilon {
            pts.push((x, y));
        }
    }
    let errors = |f: &dyn PointClassifier| {
        pts.iter()
            .filter(|&&(x, y)| f.worst_case_error(x, y, epsilon, norm, dist.domain()))
            .count()
    };
    let bayes_errors = errors(&Threshold { t: 0.5 });
    let mut ts: Vec<f64> = (0..count).map(|k| k as f64 / (count - 1) as f64).collect();
    ts.push(0.5 - epsilon);
    let competitors = ts.into_iter().map(|t| (t, errors(&Threshold { t }))).collect();
    Ok(BayesDominanceOutcome {
        points: n,
        bayes_errors,
        competitors,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct StandardRiskOutcome {
    /// `(t, r)` for every family member.
    pub members: Vec<(f64, f64)>,
    pub sensible_risks: Vec<f64>,
    pub standard_risks_empirical: Vec<f64>,
    /// Full-distribution standard risk (Monte-Carlo, common random numbers).
    pub standard_risks_true: Vec<f64>,
    pub minimizers: Vec<usize>,
    pub bayes_set: Vec<usize>,
}

impl StandardRiskOutcome {
    pub fn worst_bayes_set_risk(&self) -> f64 {
        self.bayes_set
            .iter()
            .map(|&i| self.standard_risks_true[i])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Every sensible-risk minimizer is no worse than the worst empirical
    /// Bayes rule.
    pub fn holds(&self) -> bool {
        let bound = self.worst_bayes_set_risk();
        !self.minimizers.is_empty() && self.minimizers.iter().all(|&i| self.standard_risks_true[i] <= bound)
    }
}

/// Cheese holes: the family [`CheeseRule`] over thresholds `ts` and
/// neighbourhood radii `rs`, trained on `n` samples from the holes only.
#[allow(clippy::too_many_arguments)]
pub fn standard_risk_check(
    p: f64,
    epsilon: f64,
    norm: Norm,
    n: usize,
    ts: &[f64],
    rs: &[f64],
    res: usize,
    mc_n: usize,
    seed: u64,
) -> Result<StandardRiskOutcome> {
    let dist = SyntheticDist::cheese_holes(p);
    dist.validate()?;
    let alpha = match dist {
        SyntheticDist::CheeseHoles { alpha, .. } => alpha,
        _ => unreachable!(),
    };
    let pts = draw_points(&dist, n, seed);
    let sets = sensible_sets(&dist, &pts, epsilon, norm, res)?;
    let full = SyntheticDist::UniformHalves { p };

    let mut out = StandardRiskOutcome {
        members: Vec::new(),
        sensible_risks: Vec::new(),
        standard_risks_empirical: Vec::new(),
        standard_risks_true: Vec::new(),
        minimizers: Vec::new(),
        bayes_set: Vec::new(),
    };
    for &t in ts {
        for &r in rs {
            let f = CheeseRule { alpha, t, r };
            let sens = pts
                .iter()
                .zip(&sets)
                .filter(|((x, y), s)| sensible_zero_one(&dist, s, *x, *y, &f))
                .count();
            let std = pts.iter().filter(|&&(x, y)| f.classify(x) != y).count();
            out.members.push((t, r));
            out.sensible_risks.push(sens as f64 / n as f64);
            out.standard_risks_empirical.push(std as f64 / n as f64);
            out.standard_risks_true
                .push(mc_risk(&full, &f, None, mc_n, seed ^ 0x5eed)?.estimate);
        }
    }
    let min_of = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
    let best_sens = min_of(&out.sensible_risks);
    let best_std = min_of(&out.standard_risks_empirical);
    out.minimizers = (0..out.members.len())
        .filter(|&i| out.sensible_risks[i] == best_sens)
        .collect();
    out.bayes_set = (0..out.members.len())
        .filter(|&i| out.standard_risks_empirical[i] == best_std)
        .collect();
    Ok(out)
}
