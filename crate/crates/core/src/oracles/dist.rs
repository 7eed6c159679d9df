use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Class index used for the label `y = +1`; `y = −1` maps to 0.
pub const POSITIVE: usize = 1;
pub const NEGATIVE: usize = 0;

pub const DEFAULT_ALPHA: f64 = 1.0 / 6.0;

/// The three synthetic settings with closed-form risks.
///
/// `UniformHalves`: `Y ~ Bernoulli(p)`, `X | Y=0 ~ U((0,½)×(0,1))`,
/// `X | Y=1 ~ U((½,1)×(0,1))`.
///
/// `CheeseHoles`: the same law restricted to nine `α×α` holes centred at
/// `(α + 2α(i−1), α + 2α(j−1))`, `i, j ∈ {1,2,3}`.
///
/// `ThreeClusters`: uniform `y ∈ {−1,+1}`; `y=+1` draws from
/// `p·N((1,m), σ²I) + (1−p)·N((1,−m), σ²I)`, `y=−1` from `N((−1,0), σ²I)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "setting", rename_all = "snake_case")]
pub enum SyntheticDist {
    UniformHalves { p: f64 },
    CheeseHoles { p: f64, alpha: f64 },
    ThreeClusters { p: f64, sigma: f64, m: f64 },
}

impl SyntheticDist {
    pub fn cheese_holes(p: f64) -> Self {
        SyntheticDist::CheeseHoles {
            p,
            alpha: DEFAULT_ALPHA,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SyntheticDist::UniformHalves { .. } => "uniform_halves",
            SyntheticDist::CheeseHoles { .. } => "cheese_holes",
            SyntheticDist::ThreeClusters { .. } => "three_clusters",
        }
    }

    pub fn p(&self) -> f64 {
        match *self {
            SyntheticDist::UniformHalves { p }
            | SyntheticDist::CheeseHoles { p, .. }
            | SyntheticDist::ThreeClusters { p, .. } => p,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.p();
        if !(0.5..1.0).contains(&p) {
            return Err(Error::Spec(format!("p must lie in [0.5, 1), got {p}")));
        }
        match *self {
            SyntheticDist::CheeseHoles { alpha, .. } if !(alpha > 0.0 && alpha <= 1.0 / 6.0) => {
                Err(Error::Spec(format!("hole size α must lie in (0, 1/6], got {alpha}")))
            }
            SyntheticDist::ThreeClusters { sigma, m, .. } if !(sigma > 0.0 && m > 0.0) => {
                Err(Error::Spec(format!("σ and m must be positive, got σ={sigma}, m={m}")))
            }
            _ => Ok(()),
        }
    }

    /// Input-space domain, when bounded.
    pub fn domain(&self) -> Option<(f64, f64)> {
        match self {
            SyntheticDist::ThreeClusters { .. } => None,
            _ => Some((0.0, 1.0)),
        }
    }

    /// Draws one labeled point.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> ([f64; 2], usize) {
        match *self {
            SyntheticDist::UniformHalves { p } => {
                let y = usize::from(rng.random::<f64>() < p);
                (uniform_half(y, rng), y)
            }
            SyntheticDist::CheeseHoles { p, alpha } => {
                let y = usize::from(rng.random::<f64>() < p);
                loop {
                    let x = uniform_half(y, rng);
                    if in_holes(x, alpha) {
                        return (x, y);
                    }
                }
            }
            SyntheticDist::ThreeClusters { p, sigma, m } => {
                let noise = Normal::new(0.0, sigma).expect("σ > 0");
                let (y, mu) = if rng.random::<f64>() < 0.5 {
                    let top = rng.random::<f64>() < p;
                    (POSITIVE, [1.0, if top { m } else { -m }])
                } else {
                    (NEGATIVE, [-1.0, 0.0])
                };
                let x = [mu[0] + noise.sample(rng), mu[1] + noise.sample(rng)];
                (x, y)
            }
        }
    }

    /// Bayes rule on the full distribution. Boundary points go to class 0.
    pub fn bayes_classify(&self, x: [f64; 2]) -> usize {
        match *self {
            SyntheticDist::UniformHalves { .. } | SyntheticDist::CheeseHoles { .. } => usize::from(x[0] > 0.5),
            SyntheticDist::ThreeClusters { p, sigma, m } => {
                let s2 = 2.0 * sigma * sigma;
                let la = p.ln() - sq_dist(x, [1.0, m]) / s2;
                let lb = (1.0 - p).ln() - sq_dist(x, [1.0, -m]) / s2;
                let lc = -sq_dist(x, [-1.0, 0.0]) / s2;
                let hi = la.max(lb);
                let mix = hi + ((la - hi).exp() + (lb - hi).exp()).ln();
                usize::from(mix > lc)
            }
        }
    }

    /// Whether `x` lies in the support the training data is drawn from.
    pub fn in_support(&self, x: [f64; 2]) -> bool {
        match *self {
            SyntheticDist::UniformHalves { .. } => in_open_unit(x),
            SyntheticDist::CheeseHoles { alpha, .. } => in_holes(x, alpha),
            SyntheticDist::ThreeClusters { .. } => true,
        }
    }
}

fn sq_dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

fn in_open_unit(x: [f64; 2]) -> bool {
    x.iter().all(|&v| v > 0.0 && v < 1.0)
}

fn uniform_half<R: Rng + ?Sized>(y: usize, rng: &mut R) -> [f64; 2] {
    let x1 = 0.5 * rng.random::<f64>() + if y == 1 { 0.5 } else { 0.0 };
    [x1, rng.random::<f64>()]
}

/// Open intervals `(α/2 + 2αk, 3α/2 + 2αk)` for `k = 0, 1, 2`.
pub fn hole_intervals(alpha: f64) -> [(f64, f64); 3] {
    let iv = |k: f64| (alpha / 2.0 + 2.0 * alpha * k, 1.5 * alpha + 2.0 * alpha * k);
    [iv(0.0), iv(1.0), iv(2.0)]
}

/// Strict membership in the union of the nine holes.
pub fn in_holes(x: [f64; 2], alpha: f64) -> bool {
    let ivs = hole_intervals(alpha);
    let inside = |v: f64| ivs.iter().any(|&(lo, hi)| v > lo && v < hi);
    inside(x[0]) && inside(x[1])
}

/// Membership in the ℓ∞ `r`-neighbourhood of the holes (closed).
pub fn in_hole_neighbourhood(x: [f64; 2], alpha: f64, r: f64) -> bool {
    let ivs = hole_intervals(alpha);
    let near = |v: f64| ivs.iter().any(|&(lo, hi)| v >= lo - r && v <= hi + r);
    near(x[0]) && near(x[1])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bayes_examples() {
        let u = SyntheticDist::UniformHalves { p: 0.75 };
        assert_eq!(u.bayes_classify([0.3, 0.9]), 0);
        let t = SyntheticDist::ThreeClusters {
            p: 0.55,
            sigma: 0.2,
            m: 7.0,
        };
        assert_eq!(t.bayes_classify([-1.0, 0.0]), NEGATIVE);
        assert_eq!(t.bayes_classify([1.0, 7.0]), POSITIVE);
        assert_eq!(t.bayes_classify([1.0, -7.0]), POSITIVE);
    }

    #[test]
    fn holes_geometry() {
        let a = DEFAULT_ALPHA;
        assert!(in_holes([a, a], a));
        assert!(in_holes([0.5, 0.5], a));
        assert!(!in_holes([0.5 * a, a], a));
        assert!(!in_holes([2.0 * a, a], a));
        assert!(in_hole_neighbourhood([2.0 * a, a], a, a / 2.0));
    }

    #[test]
    fn validation() {
        assert!(SyntheticDist::UniformHalves { p: 1.0 }.validate().is_err());
        assert!(SyntheticDist::ThreeClusters {
            p: 0.6,
            sigma: 0.0,
            m: 1.0
        }
        .validate()
        .is_err());
        assert!(SyntheticDist::cheese_holes(0.7).validate().is_ok());
    }
}
