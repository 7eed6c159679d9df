use crate::attacks::Norm;
use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::nn::Model;

use super::mc::dual_norm;

/// Relative slack when testing lattice points against the ball radius.
const BALL_SLACK: f64 = 1e-12;

/// Points of the `res × res` lattice on `[x−ε, x+ε]²` that lie in the
/// `ε`-ball of `norm` and inside `domain`. The lattice includes the box
/// corners and, for odd `res`, the centre.
pub fn grid_points(
    center: &[f64],
    epsilon: f64,
    norm: Norm,
    res: usize,
    domain: Option<(f64, f64)>,
) -> Result<Vec<[f64; 2]>> {
    if center.len() != 2 {
        return Err(Error::Unsupported(format!(
            "grid search needs 2-D inputs, got dimension {}",
            center.len()
        )));
    }
    if res < 2 {
        return Err(Error::Input(format!("grid resolution must be ≥ 2, got {res}")));
    }
    let c = [center[0], center[1]];
    if epsilon == 0.0 {
        return Ok(vec![c]);
    }
    let step = |k: usize| -epsilon + 2.0 * epsilon * k as f64 / (res - 1) as f64;
    let offsets: Vec<f64> = (0..res).map(step).collect();
    let inside = |v: f64| domain.is_none_or(|(lo, hi)| v >= lo && v <= hi);
    let mut pts = Vec::with_capacity(res * res);
    for &du in &offsets {
        for &dv in &offsets {
            if norm.of(&[du, dv]) <= epsilon * (1.0 + BALL_SLACK) {
                let z = [c[0] + du, c[1] + dv];
                if inside(z[0]) && inside(z[1]) {
                    pts.push(z);
                }
            }
        }
    }
    Ok(pts)
}

/// Exhaustive maximization of `score` over the lattice of the ball. Scores
/// of `−∞` mark infeasible points. Ties keep the first point in lattice
/// order. Returns `None` when no point is feasible.
pub fn grid_search_ball<F>(
    center: &[f64],
    epsilon: f64,
    norm: Norm,
    res: usize,
    domain: Option<(f64, f64)>,
    score: F,
) -> Result<Option<([f64; 2], f64)>>
where
    F: FnOnce(&[[f64; 2]]) -> Result<Vec<f64>>,
{
    let pts = grid_points(center, epsilon, norm, res, domain)?;
    let scores = score(&pts)?;
    let mut best: Option<([f64; 2], f64)> = None;
    for (z, s) in pts.into_iter().zip(scores) {
        if s > f64::NEG_INFINITY && best.is_none_or(|(_, b)| s > b) {
            best = Some((z, s));
        }
    }
    Ok(best)
}

/// Brute-force inner maximizer of the cross-entropy for a 2-D model.
pub fn grid_worst_case(
    model: &Model,
    x: &[f64],
    y: usize,
    epsilon: f64,
    norm: Norm,
    res: usize,
    domain: Option<(f64, f64)>,
) -> Result<([f64; 2], f64)> {
    if model.input_len() != 2 || x.len() != 2 {
        return Err(Error::Unsupported(format!(
            "grid search needs a 2-D model, got input dimension {}",
            model.input_len()
        )));
    }
    let found = grid_search_ball(x, epsilon, norm, res, domain, |pts| {
        let flat: Vec<f64> = pts.iter().flatten().copied().collect();
        let batch = Tensor::new(vec![pts.len(), 2], flat)?;
        let labels = vec![y; pts.len()];
        Ok(model.evaluate(&batch, &labels)?.iter().map(|e| e.loss).collect())
    })?;
    found.ok_or_else(|| Error::Input("no lattice point lies in the domain".into()))
}

/// The point of the ball minimizing the signed margin `s·(w·x + b)`, where
/// `s = +1` for class 1 and `−1` for class 0. The bias shifts the margin but
/// not the minimizer.
pub fn linear_worst_case(w: &[f64], _b: f64, x: &[f64], y: usize, epsilon: f64, norm: Norm) -> Result<Vec<f64>> {
    if w.len() != x.len() {
        return Err(Error::Shape {
            op: "linear_worst_case",
            left: vec![w.len()],
            right: vec![x.len()],
        });
    }
    if w.iter().all(|&v| v == 0.0) {
        return Err(Error::Degenerate("weight vector is zero".into()));
    }
    let s = if y == 1 { 1.0 } else { -1.0 };
    let dir: Vec<f64> = match norm {
        Norm::Linf => w.iter().map(|&v| if v == 0.0 { 0.0 } else { v.signum() }).collect(),
        Norm::Lp(1.0) => {
            let k = (0..w.len()).max_by(|&a, &b| w[a].abs().total_cmp(&w[b].abs())).unwrap();
            (0..w.len()).map(|i| if i == k { w[k].signum() } else { 0.0 }).collect()
        }
        Norm::Lp(p) => {
            let q = p / (p - 1.0);
            let scale = dual_norm(norm, w).powf(q - 1.0);
            w.iter().map(|&v| v.signum() * v.abs().powf(q - 1.0) / scale).collect()
        }
    };
    Ok(x.iter().zip(&dir).map(|(xi, d)| xi - s * epsilon * d).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_worst_case_example() {
        let z = linear_worst_case(&[1.0, 0.0], 0.0, &[0.5, 3.0], 1, 0.2, Norm::Lp(2.0)).unwrap();
        assert!((z[0] - 0.3).abs() < 1e-15 && z[1] == 3.0);
        assert!(matches!(
            linear_worst_case(&[0.0, 0.0], 0.0, &[0.0, 0.0], 1, 0.1, Norm::Linf),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn l2_margin_drops_by_eps_norm() {
        let w = [0.3, -1.2];
        let x = [0.4, 0.1];
        let z = linear_worst_case(&w, 0.5, &x, 1, 0.7, Norm::Lp(2.0)).unwrap();
        let m = |v: &[f64]| w[0] * v[0] + w[1] * v[1] + 0.5;
        let wn = (w[0] * w[0] + w[1] * w[1]).sqrt();
        assert!((m(&z) - (m(&x) - 0.7 * wn)).abs() < 1e-14);
        assert!((Norm::Lp(2.0).distance(&z, &x) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn lattice_shape() {
        let p = grid_points(&[0.0, 0.0], 1.0, Norm::Linf, 11, None).unwrap();
        assert_eq!(p.len(), 121);
        assert!(p.contains(&[1.0, -1.0]));
        let d = grid_points(&[0.0, 0.0], 1.0, Norm::Lp(2.0), 11, None).unwrap();
        assert!(d.len() < 121 && d.contains(&[0.0, 1.0]));
        assert_eq!(
            grid_points(&[0.3, 0.2], 0.0, Norm::Linf, 11, None).unwrap(),
            vec![[0.3, 0.2]]
        );
        assert!(matches!(
            grid_points(&[0.0, 0.0, 0.0], 1.0, Norm::Linf, 11, None),
            Err(Error::Unsupported(_))
        ));
    }
}
