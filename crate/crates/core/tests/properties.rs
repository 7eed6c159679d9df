use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sense_forge::attacks::{pgd, project, AttackSpec, Norm};
use sense_forge::autodiff::{argmax, softmax_probs, Tensor};
use sense_forge::data::{sample, LabeledSet};
use sense_forge::harness::eval_accuracy;
use sense_forge::nn::{Model, ModelSpec};
use sense_forge::oracles::SyntheticDist;
use sense_forge::sense::{loss_identity_check, sensible_example, SenseSpec};

fn batch(rows: &[Vec<f64>]) -> Tensor {
    let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
    Tensor::stack_rows(&[rows[0].len()], &refs).unwrap()
}

fn norm_strategy() -> impl Strategy<Value = Norm> {
    prop_oneof![Just(Norm::Linf), Just(Norm::Lp(2.0)), (1.0f64..4.0).prop_map(Norm::Lp)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn softmax_sums_to_one(z in prop::collection::vec(-1e3f64..1e3, 2..12)) {
        let p = softmax_probs(&z).unwrap();
        let total: f64 = p.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12, "sum {total}");
        prop_assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    // Dyadic logits and integer shifts keep every addition exact, which is
    // the regime where max-subtraction makes the shift vanish bit for bit.
    #[test]
    fn softmax_shift_is_exact(
        raw in prop::collection::vec(-(1i64 << 30)..(1i64 << 30), 2..12),
        shift in -1000i64..1000,
    ) {
        let z: Vec<f64> = raw.iter().map(|&k| k as f64 / (1u64 << 20) as f64).collect();
        let shifted: Vec<f64> = z.iter().map(|v| v + shift as f64).collect();
        prop_assert_eq!(softmax_probs(&z).unwrap(), softmax_probs(&shifted).unwrap());
    }

    #[test]
    fn softmax_shift_is_close_for_any_reals(
        z in prop::collection::vec(-50f64..50.0, 2..12),
        shift in -100f64..100.0,
    ) {
        let shifted: Vec<f64> = z.iter().map(|v| v + shift).collect();
        let (a, b) = (softmax_probs(&z).unwrap(), softmax_probs(&shifted).unwrap());
        for (u, v) in a.iter().zip(&b) {
            prop_assert!((u - v).abs() <= 1e-12, "{u} vs {v}");
        }
    }

    #[test]
    fn argmax_ignores_positive_rescaling(z in prop::collection::vec(-10f64..10.0, 1..12), k in 1e-3f64..1e3) {
        let scaled: Vec<f64> = z.iter().map(|v| v * k).collect();
        prop_assert_eq!(argmax(&z), argmax(&scaled));
    }

    #[test]
    fn projection_lands_in_ball_and_is_idempotent(
        norm in norm_strategy(),
        center in prop::collection::vec(0.0f64..1.0, 1..10),
        offsets in prop::collection::vec(-3.0f64..3.0, 10),
        epsilon in 0.0f64..1.0,
        clipped in any::<bool>(),
    ) {
        let candidate: Vec<f64> = center.iter().zip(&offsets).map(|(c, o)| c + o).collect();
        let clip = clipped.then_some((0.0, 1.0));
        let once = project(norm, &candidate, &center, epsilon, clip);
        prop_assert!(norm.distance(&once, &center) <= epsilon + 1e-12);
        if clipped {
            prop_assert!(once.iter().all(|v| (0.0..=1.0).contains(v)));
        }
        let twice = project(norm, &once, &center, epsilon, clip);
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn sensible_loss_formulations_agree(a in 1e-12f64..=1.0, b in 1e-12f64..=1.0, c in 0.0f64..=1.0) {
        let (p_nat, p_adv) = if a >= b { (a, b) } else { (b, a) };
        let id = loss_identity_check(p_nat, p_adv, c).unwrap();
        prop_assert!((id.unified - id.decomposed).abs() <= 1e-9);
        prop_assert!((id.unified - id.piecewise).abs() <= 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn batch_forward_matches_rows(
        seed in any::<u64>(),
        rows in prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 5), 1..8),
    ) {
        let model = Model::build(ModelSpec::mlp(vec![5, 7, 4], seed)).unwrap();
        let x = batch(&rows);
        let whole = model.forward_logits(&x).unwrap();
        for (i, r) in rows.iter().enumerate() {
            let single = model.forward_logits(&batch(std::slice::from_ref(r))).unwrap();
            prop_assert_eq!(single.row(0), whole.row(i));
        }
    }

    #[test]
    fn sensible_examples_keep_confidence_or_revert(
        seed in any::<u64>(),
        c in 0.5f64..0.99,
        rows in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 4), 1..10),
        labels in prop::collection::vec(0usize..3, 10),
    ) {
        let model = Model::build(ModelSpec::mlp(vec![4, 8, 3], seed)).unwrap();
        let x = batch(&rows);
        let y = &labels[..rows.len()];
        let spec = SenseSpec::new(c, AttackSpec::linf(0.5, 0.1, 10));
        let xs = sensible_example(&model, &x, y, &spec, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let evals = model.evaluate(&xs, y).unwrap();
        for (i, e) in evals.iter().enumerate() {
            prop_assert!(
                xs.row(i) == x.row(i) || e.p_label >= c * (1.0 - 1e-12),
                "row {i}: p {} < c {c}", e.p_label
            );
            prop_assert!(Norm::Linf.distance(xs.row(i), x.row(i)) <= 0.5 + 1e-12);
        }
    }

    // A linear model has a constant ℓ∞ ascent direction, so the loss along
    // the PGD path is monotone and the sensible example sits between the
    // clean point and the full attack.
    #[test]
    fn sensible_loss_is_sandwiched_on_linear_models(
        seed in any::<u64>(),
        c in 0.0f64..=1.0,
        rows in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 2), 1..10),
        labels in prop::collection::vec(0usize..2, 10),
    ) {
        let model = Model::build(ModelSpec::linear(2, 2, seed)).unwrap();
        let x = batch(&rows);
        let y = &labels[..rows.len()];
        let attack = AttackSpec::linf(0.4, 0.04, 20);
        let xs = sensible_example(&model, &x, y, &SenseSpec::new(c, attack), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let xt = pgd(&model, &x, y, &attack, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let clean = model.evaluate(&x, y).unwrap();
        let sens = model.evaluate(&xs, y).unwrap();
        let full = model.evaluate(&xt, y).unwrap();
        for i in 0..rows.len() {
            if !clean[i].correct(y[i]) {
                continue;
            }
            prop_assert!(clean[i].loss <= sens[i].loss + 1e-12, "row {i}: {} > {}", clean[i].loss, sens[i].loss);
            prop_assert!(sens[i].loss <= full[i].loss + 1e-12, "row {i}: {} > {}", sens[i].loss, full[i].loss);
        }
    }

    #[test]
    fn evaluation_partitions_every_row(seed in any::<u64>(), c in 0.0f64..=1.0) {
        let set: LabeledSet = sample(&SyntheticDist::ThreeClusters { p: 0.55, sigma: 0.5, m: 3.0 }, 60, seed).unwrap();
        let model = Model::build(ModelSpec::linear(2, 2, seed)).unwrap();
        let attack = AttackSpec::l2(0.5, 0.1, 10);
        let report = eval_accuracy(&model, &set, Some(&attack), Some(c), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let [a, b, cc] = report.partition.unwrap();
        prop_assert_eq!(a + b + cc, set.len());
        let robust = report.robust_acc().unwrap();
        prop_assert!((0.0..=1.0).contains(&report.natural_acc));
        prop_assert!(robust <= report.natural_acc, "robust {robust} > natural {}", report.natural_acc);
        prop_assert!(report.worst_case_curve.windows(2).all(|w| w[1] <= w[0]));
    }
}
