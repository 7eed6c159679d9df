use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct GradReport {
    pub max_rel_error: f64,
    pub worst_coordinate: usize,
    /// Coordinates whose `±h` probes changed the ReLU/max-pool pattern.
    /// Nonzero means the central difference straddled a kink.
    pub kink_crossings: usize,
    /// [`Tape::kink_margin`] at `point`.
    pub kink_margin: f64,
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
}

fn rel_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-8)
}

impl GradReport {
    pub fn is_smooth(&self) -> bool {
        self.kink_crossings == 0
    }

    /// Maximum relative error over coordinates whose analytic gradient has
    /// magnitude at least `floor`. Central differences carry an absolute
    /// rounding error near `ulp(f)/2h`, so coordinates far below that are
    /// dominated by noise.
    pub fn max_rel_error_above(&self, floor: f64) -> f64 {
        self.analytic
            .iter()
            .zip(&self.numeric)
            .filter(|(a, _)| a.abs() >= floor)
            .map(|(&a, &n)| rel_error(a, n))
            .fold(0.0, f64::max)
    }
}

/// Compares the reverse-mode gradient of a scalar function against central
/// differences `(f(x+h·eᵢ) − f(x−h·eᵢ)) / 2h`, coordinate by coordinate.
///
/// The relative error of each coordinate uses the denominator
/// `max(|analytic|, |numeric|, 1e-8)`.
pub fn grad_check<F>(f: F, point: &Tensor, h: f64) -> Result<GradReport>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::Input(format!("step h must be positive, got {h}")));
    }
    let mut tape = Tape::new();
    let x = tape.leaf(point.clone(), true)?;
    let loss = f(&mut tape, x)?;
    let base_sig = tape.kink_signature();
    let kink_margin = tape.kink_margin();
    let mut grads = tape.backward(loss)?;
    let analytic = grads.remove(x).unwrap_or_else(|| Tensor::zeros(point.shape()));

    let eval = |probe: Tensor| -> Result<(f64, u64)> {
        let mut t = Tape::new();
        let v = t.leaf(probe, false)?;
        let l = f(&mut t, v)?;
        Ok((t.value(l).item(), t.kink_signature()))
    };

    let mut report = GradReport {
        max_rel_error: 0.0,
        worst_coordinate: 0,
        kink_crossings: 0,
        kink_margin,
        analytic: analytic.data().to_vec(),
        numeric: Vec::with_capacity(point.len()),
    };
    let mut probe = point.clone();
    for i in 0..point.len() {
        let x0 = point.data()[i];
        probe.data_mut()[i] = x0 + h;
        let (fp, sp) = eval(probe.clone())?;
        probe.data_mut()[i] = x0 - h;
        let (fm, sm) = eval(probe.clone())?;
        probe.data_mut()[i] = x0;
        if sp != base_sig || sm != base_sig {
            report.kink_crossings += 1;
        }
        let numeric = (fp - fm) / (2.0 * h);
        let a = analytic.data()[i];
        let rel = rel_error(a, numeric);
        report.numeric.push(numeric);
        if rel > report.max_rel_error {
            report.max_rel_error = rel;
            report.worst_coordinate = i;
        }
    }
    Ok(report)
}
