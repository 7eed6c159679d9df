use serde::Serialize;

use super::dist::DEFAULT_ALPHA;
use crate::error::{Error, Result};

/// Standard normal CDF, `½·erfc(−x/√2)`.
pub fn phi(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RiskEntry {
    pub metric: &'static str,
    pub closed_form: f64,
    /// The stated expression is not trusted; a Monte-Carlo estimate decides.
    pub flagged: bool,
}

/// Closed-form risks of one synthetic setting at one attack radius.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RiskReport {
    pub setting: &'static str,
    pub p: f64,
    pub sigma: Option<f64>,
    pub m: Option<f64>,
    pub epsilon: f64,
    pub entries: Vec<RiskEntry>,
}

impl RiskReport {
    pub fn get(&self, metric: &str) -> Option<f64> {
        self.entries.iter().find(|e| e.metric == metric).map(|e| e.closed_form)
    }

    fn push(&mut self, metric: &'static str, closed_form: f64) {
        self.entries.push(RiskEntry {
            metric,
            closed_form,
            flagged: false,
        });
    }
}

fn check_p(p: f64) -> Result<()> {
    if !(p > 0.5 && p < 1.0) {
        return Err(Error::Input(format!("p must lie in (0.5, 1), got {p}")));
    }
    Ok(())
}

/// Uniform halves: Bayes rule `sign(x₁−½)` against the robust rule
/// `sign(x₁−(½−ε))`. Valid for `0 < ε < ¼`.
pub fn ex1_risks(p: f64, epsilon: f64) -> Result<RiskReport> {
    check_p(p)?;
    if !(epsilon > 0.0 && epsilon < 0.25) {
        return Err(Error::Validity(format!(
            "uniform-halves risks need 0 < ε < 1/4, got {epsilon}"
        )));
    }
    let mut r = RiskReport {
        setting: "ex1",
        p,
        sigma: None,
        m: None,
        epsilon,
        entries: Vec::new(),
    };
    r.push("r_std_bayes", 0.0);
    r.push("r_rob_bayes", 2.0 * epsilon);
    r.push("r_std_frob", 2.0 * (1.0 - p) * epsilon);
    r.push("r_rob_frob", 4.0 * (1.0 - p) * epsilon);
    r.push("traded_robustness", epsilon * (4.0 * p - 2.0));
    Ok(r)
}

/// Standard risk of the worst classifier agreeing with the Bayes rule on
/// the ℓ∞ `ε`-neighbourhood of the nine holes: the area outside that
/// neighbourhood.
pub fn ex2_worst_sensible(epsilon: f64) -> f64 {
    (0.75 - 9.0 * (4.0 * epsilon * epsilon + (2.0 / 3.0) * epsilon)).max(0.0)
}

/// Cheese holes with `α = 1/6`. Reports the worst-case standard risks of
/// the naturally optimal, sensibly robust and (for `ε ≤ α/4`) robust
/// classifier classes.
///
/// The robust entry adds the class-0 strip `½−ε ≤ x₁ < ½` inside the three
/// middle-column neighbourhoods (area `3ε(α+2ε)`, density `2(1−p)`) to the
/// outside area. The printed expression
/// `3·min(α+2ε, 2α)·(1−p)·min(2ε, ½)/½` is reported as a flagged entry.
pub fn ex2_risks(p: f64, epsilon: f64) -> Result<RiskReport> {
    check_p(p)?;
    if !(epsilon >= 0.0) || !epsilon.is_finite() {
        return Err(Error::Input(format!("ε must be finite and ≥ 0, got {epsilon}")));
    }
    let a = DEFAULT_ALPHA;
    let mut r = RiskReport {
        setting: "ex2",
        p,
        sigma: None,
        m: None,
        epsilon,
        entries: Vec::new(),
    };
    r.push("r_std_worst_natural", 0.75);
    r.push("r_std_worst_sensible", ex2_worst_sensible(epsilon));
    if epsilon <= a / 4.0 {
        let strip = 6.0 * (1.0 - p) * epsilon * (a + 2.0 * epsilon);
        r.push("r_std_worst_robust", ex2_worst_sensible(epsilon) + strip);
        r.entries.push(RiskEntry {
            metric: "r_std_worst_robust_stated",
            closed_form: ex2_worst_sensible(epsilon)
                + 3.0 * (a + 2.0 * epsilon).min(2.0 * a) * (1.0 - p) * (2.0 * epsilon).min(0.5) / 0.5,
            flagged: true,
        });
    }
    Ok(r)
}

/// Three clusters under ℓ₂ attacks of radius `ε = γσ`, for the rule
/// `f_std(x) = sign(x₁)`: `R_std = Φ(−1/σ)`, `R_rob = Φ(γ − 1/σ)`.
pub fn three_clusters_risks(p: f64, sigma: f64, m: f64, gamma: f64) -> Result<RiskReport> {
    if !(sigma > 0.0) || !(gamma >= 0.0) || !(m > 0.0) {
        return Err(Error::Input(format!(
            "need σ > 0, m > 0, γ ≥ 0; got σ={sigma}, m={m}, γ={gamma}"
        )));
    }
    let mut r = RiskReport {
        setting: "three_clusters",
        p,
        sigma: Some(sigma),
        m: Some(m),
        epsilon: gamma * sigma,
        entries: Vec::new(),
    };
    r.push("r_std_fstd", phi(-1.0 / sigma));
    r.push("r_rob_fstd", phi(gamma - 1.0 / sigma));
    Ok(r)
}
