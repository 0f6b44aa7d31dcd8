use hgr_core::dataset::{plan_user, simulate_features};
use hgr_core::dsp::RadarConfig;
use hgr_core::sim::{gesture_trajectory, sample_spec, synthesize_recording, KinematicsConfig, UserStyle};
use hgr_core::{AnomalyKind, GestureClass};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy)]
struct Stats {
    max_speed: f64,
    span: usize,
    depth: f64,
}

fn stats(kind: AnomalyKind, class: GestureClass, style: &UserStyle, seed: u64) -> Stats {
    let cfg = RadarConfig::default();
    let kin = KinematicsConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = sample_spec(class, kind, style, &kin, &mut rng);
    let states: Vec<_> = gesture_trajectory(&spec, &cfg, &kin).unwrap().into_iter().flatten().collect();
    Stats {
        max_speed: states.iter().map(|s| s.radial_velocity.abs()).fold(0.0, f64::max),
        span: states.len(),
        depth: spec.base_range - states.iter().map(|s| s.range).fold(f64::INFINITY, f64::min),
    }
}

#[test]
fn anomalies_differ_from_nominal_per_class() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let users = [UserStyle::typical("A", &mut rng), UserStyle::shifted("S", &mut rng)];
    for style in &users {
        for class in GestureClass::GESTURES {
            let nominal: Vec<Stats> = (0..20).map(|s| stats(AnomalyKind::None, class, style, s)).collect();
            let min_span = nominal.iter().map(|s| s.span).min().unwrap();
            let max_span = nominal.iter().map(|s| s.span).max().unwrap();
            let min_depth = nominal.iter().map(|s| s.depth).fold(f64::INFINITY, f64::min);
            let mean_speed = nominal.iter().map(|s| s.max_speed).sum::<f64>() / nominal.len() as f64;
            for s in 0..20 {
                let fast = stats(AnomalyKind::Fast, class, style, 100 + s);
                assert!(fast.span < min_span, "{class} fast span {} vs {min_span}", fast.span);
                let slow = stats(AnomalyKind::Slow, class, style, 200 + s);
                assert!(slow.span > max_span && slow.max_speed < mean_speed, "{class} slow {slow:?}");
                let wrist = stats(AnomalyKind::Wrist, class, style, 300 + s);
                assert!(wrist.depth < min_depth, "{class} wrist depth {} vs {min_depth}", wrist.depth);
            }
        }
    }
}

#[test]
fn fixed_seed_reproduces_cubes_and_features() {
    let cfg = RadarConfig::default();
    let kin = KinematicsConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let style = UserStyle::typical("A", &mut rng);
    let plan = || plan_user(&style, 1, true, &[(AnomalyKind::Wrist, 2)], &kin, 33);
    assert_eq!(plan(), plan());
    let spec = &plan()[0];
    assert_eq!(synthesize_recording(spec, &cfg, &kin).unwrap(), synthesize_recording(spec, &cfg, &kin).unwrap());
    let a = simulate_features(&plan(), &cfg, &kin).unwrap();
    let b = simulate_features(&plan(), &cfg, &kin).unwrap();
    assert_eq!(a.len(), 8);
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.seq.matrix(), y.seq.matrix());
        assert_eq!(x.label_ids(), y.label_ids());
    }
    assert_ne!(plan_user(&style, 1, true, &[], &kin, 34), plan_user(&style, 1, true, &[], &kin, 33));
}
