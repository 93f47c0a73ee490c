use backscatter_auth::adversary::AttackKind;
use backscatter_auth::harness::export::{write_roc_csv, write_summary_csv};
use backscatter_auth::harness::metrics::calibrate_delta;
use backscatter_auth::harness::{
    compute_roc, run_monte_carlo, AuthMode, ExperimentConfig, PowerModeKind, SweepAxis, SweepValue,
};
use backscatter_auth::Error;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Standard normal CDF through the Abramowitz-Stegun erf approximation
/// (absolute error below 1.5e-7).
fn phi(x: f64) -> f64 {
    let z = x / std::f64::consts::SQRT_2;
    let t = 1.0 / (1.0 + 0.327_591_1 * z.abs());
    let poly = t * (0.254_829_592 + t * (-0.284_496_736 + t * (1.421_413_741 + t * (-1.453_152_027 + t * 1.061_405_429))));
    let erf = 1.0 - poly * (-z * z).exp();
    0.5 * (1.0 + erf.copysign(z))
}

fn draws(mean: f64, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let normal = Normal::new(mean, 1.0).unwrap();
    (0..n).map(|_| normal.sample(rng).max(0.0)).collect()
}

fn small(n_auth: usize) -> ExperimentConfig {
    ExperimentConfig {
        n_auth,
        ..Default::default()
    }
}

#[test]
fn gaussian_shift_auc_matches_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for shift in [0.25, 0.5, 1.0, 2.0] {
        // attackers sit further away, so AUC is P(attacker > genuine)
        let genuine = draws(6.0, 20_000, &mut rng);
        let attacker = draws(6.0 + shift, 20_000, &mut rng);
        let roc = compute_roc(&genuine, &attacker).unwrap();
        let expected = phi(shift / std::f64::consts::SQRT_2);
        assert!((roc.auc - expected).abs() < 0.01, "shift {shift}: {} vs {expected}", roc.auc);
    }
}

#[test]
fn identical_populations_sit_on_the_diagonal() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let a = draws(4.0, 20_000, &mut rng);
    let b = draws(4.0, 20_000, &mut rng);
    let roc = compute_roc(&a, &b).unwrap();
    assert!((roc.auc - 0.5).abs() < 0.01);
    let worst = roc.points.iter().map(|p| (p.tpr - p.fpr).abs()).fold(0.0, f64::max);
    // two-sample KS bound at 0.01
    assert!(worst < 1.628 * (2.0 / 20_000.0f64).sqrt());
}

#[test]
fn full_target_calibrates_to_the_largest_distance() {
    let genuine = [0.2, 0.9, 0.4];
    let attacker = [1.5, 3.0, 2.2];
    assert_eq!(calibrate_delta(&genuine, &attacker, 1.0).unwrap(), 3.0);
    let roc = compute_roc(&genuine, &attacker).unwrap();
    assert_eq!(roc.tpr_at_fpr(1.0), 1.0);
    assert_eq!(roc.tpr_at_fpr(0.0), 1.0);
    assert_eq!(roc.points[0].fpr, 0.0);
}

#[test]
fn empty_sweep_writes_only_a_header() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("summary.csv");
    write_summary_csv(&[], &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("sweep_axis,sweep_value,"));
}

#[test]
fn exported_roc_rows_increase_in_fpr() {
    let cfg = ExperimentConfig {
        snr_db: 5.0,
        ..small(200)
    };
    let reports = run_monte_carlo(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("roc.csv");
    write_roc_csv(&reports, &path).unwrap();
    let mut reader = csv::Reader::from_path(&path).unwrap();
    let fprs: Vec<f64> = reader
        .records()
        .map(|r| r.unwrap()[5].parse().unwrap())
        .collect();
    assert!(fprs.len() > 2);
    assert!(fprs.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn sweep_points_do_not_depend_on_their_order() {
    let values = [0.0, 10.0, 20.0].map(SweepValue::Number).to_vec();
    let forward = ExperimentConfig {
        sweep: SweepAxis::Snr,
        sweep_values: values.clone(),
        ..small(100)
    };
    let backward = ExperimentConfig {
        sweep_values: values.into_iter().rev().collect(),
        ..forward.clone()
    };
    let a = run_monte_carlo(&forward).unwrap();
    let mut b = run_monte_carlo(&backward).unwrap();
    b.reverse();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.sweep_value, y.sweep_value);
        assert_eq!(x.genuine, y.genuine);
        assert_eq!(x.attacker, y.attacker);
    }
}

#[test]
fn noiseless_runs_accept_every_genuine_session() {
    for auth in [AuthMode::OneWay, AuthMode::Mutual] {
        let cfg = ExperimentConfig {
            power_mode: PowerModeKind::Noiseless,
            auth,
            ..small(200)
        };
        let r = &run_monte_carlo(&cfg).unwrap()[0];
        assert!(r.genuine.iter().all(|d| *d < 1e-9));
        assert_eq!(r.tpr_at_delta, 1.0);
        assert!(r.fpr_at_delta <= cfg.target_fpr);
        assert_eq!(r.roc.tpr_at_fpr(0.0), 1.0);
    }
}

#[test]
fn invalid_config_names_each_field() {
    let cfg = ExperimentConfig {
        n_auth: 0,
        keylength: 40,
        d_rfs_m: -1.0,
        ..Default::default()
    };
    match run_monte_carlo(&cfg) {
        Err(Error::Validation(problems)) => {
            let all = problems.join("\n");
            for field in ["n_auth", "keylength", "d_rfs_m"] {
                assert!(all.contains(field), "{field} missing from {all}");
            }
        }
        other => panic!("expected a validation error, got {other:?}"),
    }
}

#[test]
fn attack_axis_reports_each_kind() {
    let cfg = ExperimentConfig {
        sweep: SweepAxis::Attack,
        sweep_values: vec![
            SweepValue::Name("impersonation".into()),
            SweepValue::Name("counterfeit".into()),
        ],
        ..small(50)
    };
    let attacks: Vec<String> = run_monte_carlo(&cfg).unwrap().into_iter().map(|r| r.attack).collect();
    assert_eq!(attacks, [AttackKind::Impersonation.name(), AttackKind::Counterfeit.name()]);
}

proptest! {
    #[test]
    fn roc_is_a_valid_curve(
        genuine in prop::collection::vec(0.0f64..10.0, 1..200),
        attacker in prop::collection::vec(0.0f64..10.0, 1..200),
    ) {
        let roc = compute_roc(&genuine, &attacker).unwrap();
        prop_assert!((0.0..=1.0).contains(&roc.auc));
        prop_assert!(roc.points.windows(2).all(|w| w[1].fpr > w[0].fpr && w[1].tpr >= w[0].tpr));
        prop_assert!(roc.points.windows(2).all(|w| w[1].delta > w[0].delta));
        prop_assert_eq!(roc.points[0].fpr, 0.0);
        let last = roc.points.last().unwrap();
        prop_assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
    }

    #[test]
    fn calibrated_threshold_meets_its_target(
        genuine in prop::collection::vec(0.0f64..10.0, 1..100),
        attacker in prop::collection::vec(0.0f64..10.0, 1..100),
        target in 0.0f64..=1.0,
    ) {
        let delta = calibrate_delta(&genuine, &attacker, target).unwrap();
        let fpr = attacker.iter().filter(|d| **d <= delta).count() as f64 / attacker.len() as f64;
        prop_assert!(fpr <= target);
    }
}
