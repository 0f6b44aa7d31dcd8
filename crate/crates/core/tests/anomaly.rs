use hgr_core::anomaly::{judge, nearest_rank, user_threshold, Category, ConditionFlag, IsolationForest, IsolationForestConfig, Lof};
use hgr_core::nn::loss::squared_error;
use hgr_core::nn::{Vae, VaeConfig};
use hgr_core::AnomalyKind;
use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn small_vae(seed: u64) -> Vae {
    let cfg = VaeConfig { input_dim: 10, hidden: vec![8, 6], latent: 3, dropout: 0.3, dropout_layers: vec![0] };
    Vae::new(cfg, &mut ChaCha8Rng::seed_from_u64(seed))
}

proptest! {
    #[test]
    fn squared_error_is_nonnegative_and_zero_only_on_equality(
        x in prop::collection::vec(0.0f64..1.0, 1..40),
        i in any::<prop::sample::Index>(),
        delta in 1e-6f64..1.0,
    ) {
        prop_assert_eq!(squared_error(&x, &x), 0.0);
        let mut y = x.clone();
        y[i.index(x.len())] += delta;
        prop_assert!(squared_error(&x, &y) > 0.0);
    }

    #[test]
    fn vae_errors_nonnegative_and_outputs_in_unit_box(seed in any::<u64>(), rows in 1usize..6) {
        let vae = small_vae(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let x = Array2::from_shape_fn((rows, 10), |_| rng.gen_range(0.0..1.0));
        let out = vae.reconstruct(&x).unwrap();
        prop_assert!(out.iter().all(|v| (0.0..=1.0).contains(v)));
        let e = vae.reconstruction_errors(&x).unwrap();
        for (r, err) in e.iter().enumerate() {
            let direct = squared_error(x.row(r).as_slice().unwrap(), out.row(r).as_slice().unwrap());
            prop_assert!(*err >= 0.0);
            prop_assert!((err - direct).abs() <= 1e-12 * direct.max(1.0));
        }
    }

    #[test]
    fn raising_the_percentile_never_flags_more(
        calib in prop::collection::vec(0.0f64..10.0, 1..60),
        errors in prop::collection::vec(0.0f64..12.0, 1..60),
        p in 0.0f64..100.0,
        q in 0.0f64..100.0,
    ) {
        let (lo, hi) = if p <= q { (p, q) } else { (q, p) };
        let t_lo = user_threshold("u", &calib, lo).unwrap();
        let t_hi = user_threshold("u", &calib, hi).unwrap();
        prop_assert!(t_hi.value >= t_lo.value && t_lo.value >= 0.0);
        for &e in &errors {
            prop_assert!(!t_hi.flags(e) || t_lo.flags(e));
        }
    }

    #[test]
    fn every_recording_lands_in_one_category(
        pred in prop::collection::vec(0usize..6, 30),
        start in 0usize..20,
        len in 0usize..10,
        e_rec in 0.0f64..2.0,
    ) {
        let mut truth = vec![0; 30];
        truth[start..start + len].fill(3);
        let th = user_threshold("u", &[0.5, 1.0, 1.5], 50.0).unwrap();
        let v = judge("r", "u", &pred, &truth, e_rec, &th, AnomalyKind::None).unwrap();
        let memberships = [
            v.category == Category::Nominal,
            v.category == Category::ConditionFlagged,
            v.category == Category::ExclusiveVaeFlagged,
            v.category == Category::Both,
        ];
        prop_assert_eq!(memberships.iter().filter(|&&m| m).count(), 1);
        prop_assert_eq!(v.category, Category::of(v.condition, v.vae_flagged));
        if v.category == Category::ExclusiveVaeFlagged {
            prop_assert!(v.vae_flagged && v.condition == ConditionFlag::None);
        }
        prop_assert_eq!(v.flagged(), v.vae_flagged || v.condition_flagged());
    }
}

#[test]
fn nearest_rank_picks_an_observed_value() {
    let v: Vec<f64> = (1..=20).map(f64::from).collect();
    assert_eq!(nearest_rank(&v, 90.0).unwrap(), 18.0);
    assert_eq!(nearest_rank(&v, 0.0).unwrap(), 1.0);
    assert_eq!(nearest_rank(&v, 100.0).unwrap(), 20.0);
}

fn gaussian_cloud(n: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()).collect()
}

/// Textbook LOF computed directly from pairwise distances.
fn lof_reference(data: &[Vec<f64>], k: usize) -> Vec<f64> {
    let n = data.len();
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let neighbors: Vec<Vec<(usize, f64)>> = (0..n)
        .map(|i| {
            let mut d: Vec<(usize, f64)> = (0..n).filter(|&j| j != i).map(|j| (j, dist(&data[i], &data[j]))).collect();
            d.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
            d.truncate(k);
            d
        })
        .collect();
    let kdist: Vec<f64> = neighbors.iter().map(|nb| nb[k - 1].1).collect();
    let lrd: Vec<f64> = neighbors
        .iter()
        .map(|nb| k as f64 / nb.iter().map(|&(j, d)| d.max(kdist[j])).sum::<f64>())
        .collect();
    (0..n).map(|i| neighbors[i].iter().map(|&(j, _)| lrd[j]).sum::<f64>() / (k as f64 * lrd[i])).collect()
}

#[test]
fn lof_matches_textbook_definition() {
    let data = gaussian_cloud(200, 4, 9);
    for k in [5, 35] {
        let lof = Lof::fit(&data, k, 1.5).unwrap();
        let expected = lof_reference(&data, k);
        for (a, b) in lof.train_scores().iter().zip(&expected) {
            assert!((a - b).abs() <= 1e-6 * b, "{a} vs {b}");
        }
    }
}

#[test]
fn lof_separates_a_far_point_from_its_cluster() {
    let data = gaussian_cloud(150, 3, 2);
    let lof = Lof::fit(&data, 20, 1.5).unwrap();
    assert!(lof.flags(&[8.0, 8.0, 8.0]).unwrap());
    assert!(!lof.flags(&[0.0, 0.1, -0.1]).unwrap());
    let mean = lof.train_scores().iter().sum::<f64>() / 150.0;
    assert!((mean - 1.0).abs() < 0.15, "{mean}");
}

#[test]
fn isolation_forest_scores_outliers_higher() {
    let data = gaussian_cloud(300, 5, 4);
    let forest = IsolationForest::fit(&data, &IsolationForestConfig::default()).unwrap();
    let outlier = forest.score(&[6.0; 5]).unwrap();
    let center = forest.score(&[0.0; 5]).unwrap();
    assert!(outlier > 0.6 && center < 0.5, "{outlier} {center}");
    assert!(forest.flags(&[6.0; 5]).unwrap());
    let flagged = data.iter().filter(|x| forest.flags(x).unwrap()).count();
    assert!(flagged <= 30, "{flagged} of 300 training points flagged");

    let dupes = vec![vec![1.0, 2.0]; 64];
    let forest = IsolationForest::fit(&dupes, &IsolationForestConfig::default()).unwrap();
    let s = forest.score(&[1.0, 2.0]).unwrap();
    assert!(s.is_finite());
    assert!(forest.score(&[5.0, -3.0]).unwrap() >= s);
}
