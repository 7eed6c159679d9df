//! Browser demo. Three calls into the core crate, each returning JSON for
//! the static page in `www/`:
//!
//! - [`loss_curves`]: the sensible loss and its two truncated parts as `c`
//!   sweeps `[0, 1]` for one pair of confidences.
//! - [`trajectory`]: Three Clusters decision boundaries under sensible and
//!   regular adversarial training, iteration by iteration.
//! - [`risk_curves`]: closed-form risks of the uniform-halves and
//!   cheese-holes examples as functions of `ε`.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use sense_forge::attacks::AttackSpec;
use sense_forge::data::sample;
use sense_forge::nn::{Model, ModelSpec};
use sense_forge::oracles::{ex1_risks, ex2_risks, SyntheticDist, DEFAULT_ALPHA};
use sense_forge::sense::{
    loss_identity_check, partition_from_probs, train, trunc_nat_loss, trunc_rob_loss, Method, Partition, SenseSpec,
    TrainSpec,
};

#[derive(Serialize)]
struct LossPoint {
    c: f64,
    total: f64,
    natural: f64,
    robust: f64,
    group: &'static str,
}

fn group_name(g: Partition) -> &'static str {
    match g {
        Partition::A => "A",
        Partition::B => "B",
        Partition::C => "C",
    }
}

/// `steps + 1` evenly spaced values of `c` over `[0, 1]`.
pub fn loss_curves(p_nat: f64, p_adv: f64, steps: usize) -> Result<String, String> {
    let steps = steps.max(1);
    let points = (0..=steps)
        .map(|k| {
            let c = k as f64 / steps as f64;
            let id = loss_identity_check(p_nat, p_adv, c).map_err(|e| e.to_string())?;
            Ok(LossPoint {
                c,
                total: id.unified,
                natural: trunc_nat_loss(p_nat, c).map_err(|e| e.to_string())?,
                robust: trunc_rob_loss(p_adv, c).map_err(|e| e.to_string())?,
                group: group_name(partition_from_probs(p_nat, p_adv, c)),
            })
        })
        .collect::<Result<Vec<_>, String>>()?;
    Ok(serde_json::to_string(&points).expect("loss points serialize"))
}

#[derive(Serialize)]
struct Boundary {
    w: Vec<f64>,
    b: f64,
}

#[derive(Serialize)]
struct Trajectory {
    points: Vec<[f64; 3]>,
    sense: Vec<Boundary>,
    rat: Vec<Boundary>,
}

/// Full-batch training from a naturally trained start, one record per
/// iteration. Uses the ℓ₂ one-step attack of radius 1.6 on 300 points.
pub fn trajectory(c: f64, iterations: usize, seed: u64) -> Result<String, String> {
    let err = |e: sense_forge::Error| e.to_string();
    let n = 300;
    let set = sample(
        &SyntheticDist::ThreeClusters {
            p: 0.55,
            sigma: 0.2,
            m: 7.0,
        },
        n,
        seed,
    )
    .map_err(err)?;
    let model = Model::build(ModelSpec::linear(2, 2, seed)).map_err(err)?;
    let init = train(
        model,
        &set,
        &Method::Natural,
        &TrainSpec::new(200, n, 0.5, seed),
        None,
        &mut |_, _| {},
    )
    .map_err(err)?
    .0;
    let attack = AttackSpec::l2(1.6, 1.6, 1);
    let spec = TrainSpec::new(iterations.max(1), n, 0.01 * n as f64, seed);
    let run = |method: Method| -> Result<Vec<Boundary>, String> {
        let mut out = Vec::new();
        train(init.clone(), &set, &method, &spec, None, &mut |_, m| {
            let (w, b) = m.binary_boundary().expect("linear two-class model");
            out.push(Boundary { w, b });
        })
        .map_err(err)?;
        Ok(out)
    };
    let points = set
        .points()
        .map_err(err)?
        .into_iter()
        .zip(set.labels())
        .map(|(p, &y)| [p[0], p[1], y as f64])
        .collect();
    let t = Trajectory {
        points,
        sense: run(Method::Sensible(SenseSpec::new(c, attack)))?,
        rat: run(Method::Regular(attack))?,
    };
    Ok(serde_json::to_string(&t).expect("trajectory serializes"))
}

#[derive(Serialize)]
struct RiskPoint {
    epsilon: f64,
    metric: &'static str,
    setting: &'static str,
    value: f64,
}

/// Risks at `steps` radii strictly inside the range each closed form
/// covers.
pub fn risk_curves(p: f64, steps: usize) -> Result<String, String> {
    let steps = steps.max(1);
    let mut out = Vec::new();
    for (setting, max_eps) in [("ex1", 0.25), ("ex2", DEFAULT_ALPHA / 4.0)] {
        for k in 1..=steps {
            let epsilon = max_eps * k as f64 / (steps + 1) as f64;
            let report = match setting {
                "ex1" => ex1_risks(p, epsilon),
                _ => ex2_risks(p, epsilon),
            }
            .map_err(|e| e.to_string())?;
            out.extend(report.entries.iter().filter(|e| !e.flagged).map(|e| RiskPoint {
                epsilon,
                metric: e.metric,
                setting,
                value: e.closed_form,
            }));
        }
    }
    Ok(serde_json::to_string(&out).expect("risk points serialize"))
}

#[wasm_bindgen(js_name = lossCurves)]
pub fn loss_curves_js(p_nat: f64, p_adv: f64, steps: usize) -> Result<String, JsValue> {
    loss_curves(p_nat, p_adv, steps).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = trajectory)]
pub fn trajectory_js(c: f64, iterations: usize, seed: u32) -> Result<String, JsValue> {
    trajectory(c, iterations, u64::from(seed)).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = riskCurves)]
pub fn risk_curves_js(p: f64, steps: usize) -> Result<String, JsValue> {
    risk_curves(p, steps).map_err(|e| JsValue::from_str(&e))
}
