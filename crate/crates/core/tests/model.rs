mod support;

use hgr_core::dataset::{fit_norm, plan_user, simulate_features, windows_of, Recording};
use hgr_core::dsp::{RadarConfig, FEATURE_COUNT};
use hgr_core::model::{
    accuracy, dynamic_gesture_accuracy, gesture_accuracy, train_baseline, window_dataset, MetricsReport, NoHooks, TrainConfig,
};
use hgr_core::sim::{KinematicsConfig, UserStyle};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn metrics_match_brute_force(seed in any::<u64>(), n in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (pred, truth): (Vec<_>, Vec<_>) = (0..n).map(|_| support::random_pair(&mut rng)).unzip();
        let acc = accuracy(&pred, &truth).unwrap();
        prop_assert_eq!(acc, support::oracle_acc(&pred, &truth));
        prop_assert_eq!(gesture_accuracy(&pred, &truth).ok(), support::oracle_gesture_acc(&pred, &truth));
        prop_assert_eq!(dynamic_gesture_accuracy(&pred, &truth).ok(), support::oracle_dg_acc(&pred, &truth));
        prop_assert!((0.0..=1.0).contains(&acc));
    }

    #[test]
    fn all_background_predictor(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (_, truth) = support::random_pair(&mut rng);
        let pred = vec![vec![0; truth.len()]];
        let truth = vec![truth];
        let bg = truth[0].iter().filter(|&&c| c == 0).count() as f64 / truth[0].len() as f64;
        prop_assert_eq!(accuracy(&pred, &truth).unwrap(), bg);
        if truth[0].iter().any(|&c| c != 0) {
            prop_assert_eq!(gesture_accuracy(&pred, &truth).unwrap(), 0.0);
            prop_assert_eq!(dynamic_gesture_accuracy(&pred, &truth).unwrap(), 0.0);
        }
    }

    #[test]
    fn window_labels_reconstruct_the_tail(t in 22usize..120, len in 1usize..22, seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labels: Vec<usize> = (0..t).map(|_| rng.gen_range(0..6)).collect();
        let frames: Vec<f64> = (0..t * FEATURE_COUNT).map(|i| i as f64).collect();
        let w = window_dataset(&frames, &labels, len, 1, 0).unwrap();
        prop_assert_eq!(w.count(), t - len + 1);
        prop_assert_eq!(&w.labels[..], &labels[len - 1..]);
        for i in 0..w.count() {
            prop_assert_eq!(w.window(i), &frames[i * FEATURE_COUNT..(i + len) * FEATURE_COUNT]);
        }
    }
}

fn small_corpus(seed: u64) -> Vec<Recording> {
    let kin = KinematicsConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let style = UserStyle::typical("A", &mut rng);
    simulate_features(&plan_user(&style, 3, true, &[], &kin, seed), &RadarConfig::default(), &kin).unwrap()
}

#[test]
fn training_is_deterministic_and_prediction_pure() {
    let recs = small_corpus(2);
    let refs: Vec<&Recording> = recs.iter().collect();
    let norm = fit_norm(&refs).unwrap();
    let cfg = TrainConfig { epochs: 2, seed: 5, ..TrainConfig::default() };
    let data = windows_of(&refs, &norm, cfg.window_len).unwrap();
    let (a, ha) = train_baseline(&data, None, norm.clone(), &cfg, &mut NoHooks).unwrap();
    let (b, hb) = train_baseline(&data, None, norm, &cfg, &mut NoHooks).unwrap();
    assert_eq!(ha, hb);
    assert_eq!(a.net, b.net);
    let seq = &recs[0].seq;
    assert_eq!(a.predict_frames(seq), a.predict_frames(seq));
    assert_eq!(a.predict_frames(seq).len(), seq.len());
    let seqs: Vec<_> = recs.iter().map(|r| r.seq.clone()).collect();
    let truth: Vec<_> = recs.iter().map(|r| r.label_ids()).collect();
    let m = MetricsReport::evaluate(&a.predict_many(&seqs), &truth).unwrap();
    assert!([m.acc, m.gesture_acc, m.dg_acc].iter().all(|v| (0.0..=1.0).contains(v)));
}
