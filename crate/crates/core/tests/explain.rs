use hgr_core::dsp::FEATURE_COUNT;
use hgr_core::explain::{
    characterize, compute_srv, expected_gradients, global_attribution, AttributionMatrix, Deviation, Diagnosis,
    GlobalAttribution, LinearSurrogate, WindowLogit,
};
use hgr_core::nn::GruNet;
use hgr_core::GestureClass;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn attribution(values: [f64; FEATURE_COUNT]) -> GlobalAttribution {
    GlobalAttribution { values, windows: vec![0] }
}

fn values_strategy() -> impl Strategy<Value = [f64; FEATURE_COUNT]> {
    prop::array::uniform5(0.0f64..2.0)
}

proptest! {
    #[test]
    fn srv_envelope_is_ordered_and_contains_its_corpus(corpus in prop::collection::vec(values_strategy(), 1..15)) {
        let n = corpus.len();
        let per: Vec<_> = corpus.iter().map(|v| (GestureClass::Push, attribution(*v))).collect();
        let srv = compute_srv(&per, &[GestureClass::Push], n).unwrap();
        let env = srv.class(GestureClass::Push).unwrap();
        for j in 0..FEATURE_COUNT {
            prop_assert!(env.min[j] <= env.median[j] && env.median[j] <= env.max[j]);
            prop_assert_eq!(env.median[j], (env.min[j] + env.max[j]) / 2.0);
        }
        for (_, g) in &per {
            let r = characterize(g, GestureClass::Push, &srv).unwrap();
            prop_assert!(r.deviations.iter().all(|d| *d == Deviation::InRange));
            prop_assert!(!r.has_deviation());
        }
    }

    #[test]
    fn a_diagnosis_always_rests_on_a_deviation(corpus in prop::collection::vec(values_strategy(), 3), probe in values_strategy()) {
        let per: Vec<_> = corpus.iter().map(|v| (GestureClass::SwipeUp, attribution(*v))).collect();
        let srv = compute_srv(&per, &[GestureClass::SwipeUp], 3).unwrap();
        let r = characterize(&attribution(probe), GestureClass::SwipeUp, &srv).unwrap();
        if r.diagnosis != Diagnosis::Inconclusive {
            prop_assert!(r.has_deviation());
        }
        prop_assert!(!r.message.is_empty());
    }

    #[test]
    fn global_importance_is_nonnegative(raw in prop::collection::vec(-5.0f64..5.0, FEATURE_COUNT..FEATURE_COUNT * 30)) {
        let rows = raw.len() / FEATURE_COUNT;
        let m = AttributionMatrix { window_id: 0, rows, values: raw[..rows * FEATURE_COUNT].to_vec(), base_value: 0.0, target: 1, output: 0.0 };
        let g = global_attribution(&[m.clone(), m]).unwrap();
        prop_assert!(g.values.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn linear_attributions_match_closed_form(seed in any::<u64>(), frames in 1usize..6, bg in 1usize..9) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = frames * FEATURE_COUNT;
        let w: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let model = LinearSurrogate { weights: vec![vec![0.0; n], w.clone()], bias: vec![0.0, 0.7] };
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let background: Vec<Vec<f64>> = (0..bg).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let m = expected_gradients(&model, &x, &background, 64 * bg, 1, &mut rng).unwrap();
        for i in 0..n {
            let mean = background.iter().map(|b| b[i]).sum::<f64>() / bg as f64;
            prop_assert!((m.values[i] - (x[i] - mean) * w[i]).abs() < 1e-9);
        }
        prop_assert!(m.completeness_error() < 1e-9 || m.output.abs() < 1e-9);
    }
}

#[test]
fn ignored_input_feature_gets_no_attribution() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut net = GruNet::init(&mut rng, FEATURE_COUNT, 16, 6);
    let h3 = 3 * net.hidden_dim();
    let d = 2;
    net.gru.w[d * h3..(d + 1) * h3].fill(0.0);
    let f = WindowLogit { net: &net, window_len: 22 };
    let n = 22 * FEATURE_COUNT;
    let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let background: Vec<Vec<f64>> = (0..8).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let m = expected_gradients(&f, &x, &background, 256, 3, &mut rng).unwrap();
    let g = global_attribution(&[m.clone()]).unwrap();
    assert!(g.values[d] < 1e-12, "{}", g.values[d]);
    assert!(g.values.iter().enumerate().filter(|(j, _)| *j != d).all(|(_, v)| *v > 0.0));
    assert!(m.completeness_error() < 0.05, "{}", m.completeness_error());
}
