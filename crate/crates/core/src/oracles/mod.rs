//! Analytic oracles: closed-form risks of the synthetic settings and the
//! Monte-Carlo and lattice brute-force checks that verify them.

mod desk;
mod dist;
mod grid;
mod mc;
mod risks;

pub use desk::{
    bayes_dominance_check, sensible_minimizer_check, standard_risk_check, BayesDominanceOutcome,
    SensibleMinimizerOutcome, StandardRiskOutcome,
};
pub use dist::{hole_intervals, in_hole_neighbourhood, in_holes, SyntheticDist, DEFAULT_ALPHA, NEGATIVE, POSITIVE};
pub use grid::{grid_points, grid_search_ball, grid_worst_case, linear_worst_case};
pub use mc::{
    mc_for_metric, mc_risk, mc_setup, BayesRule, CheeseRule, LinearRule, McEstimate, McSetup, PointClassifier,
    Threshold,
};
pub use risks::{ex1_risks, ex2_risks, ex2_worst_sensible, phi, three_clusters_risks, RiskEntry, RiskReport};
