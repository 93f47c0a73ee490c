use backscatter_auth::channel::{awgn_with_variance, cscg, dbm_to_watts, Tap};
use backscatter_auth::phy::{
    apply_multipath, backscatter_modulate, cp_subtract, gen_ofdm_frame, harvested_power, reading_values,
    transmit_bd_message, transmit_over_ambient, transmit_samples, BackscatterSymbol, FieldChannels, OfdmConfig,
    ReceiverParams,
};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn energy(x: &[Complex64]) -> f64 {
    x.iter().map(|s| s.norm_sqr()).sum()
}

/// Random taps whose largest delay stays inside `max_delay`.
fn random_taps(rng: &mut ChaCha8Rng, n: usize, max_delay: usize) -> Vec<Tap> {
    (0..n)
        .map(|_| Tap::new(rng.random_range(0..=max_delay), cscg(rng, 1.0)))
        .collect()
}

#[test]
fn frame_power_matches_configured_dbm() {
    let config = OfdmConfig {
        tx_power_dbm: 1.0,
        pilot_present: false,
        ..OfdmConfig::default()
    };
    let frame = gen_ofdm_frame(&config, 10_000, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let expected = dbm_to_watts(1.0);
    assert!((expected - 1.259e-3).abs() < 1e-6);
    assert!((frame.mean_power() / expected - 1.0).abs() < 0.01);
}

#[test]
fn two_tap_channel_matches_direct_convolution() {
    let config = OfdmConfig::default();
    let frame = gen_ofdm_frame(&config, 3, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
    let x = &frame.samples;
    let y = apply_multipath(x, &[Tap::new(0, c(1.0, 0.0)), Tap::new(2, c(0.5, 0.0))], &config).unwrap();
    assert_eq!(y.len(), x.len());
    for n in 0..x.len() {
        let mut acc = x[n];
        if n >= 2 {
            acc += x[n - 2] * 0.5;
        }
        assert!((y[n] - acc).norm() < 1e-15);
    }
}

#[test]
fn quarter_reflection_keeps_a_quarter_of_first_half_energy() {
    let config = OfdmConfig::default();
    let frame = gen_ofdm_frame(&config, 4, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    let out = backscatter_modulate(&frame.samples, &BackscatterSymbol::message(&[0.25, 0.25], 2), &config).unwrap();
    let n_t = config.symbol_len();
    let first_half: f64 = frame
        .samples
        .chunks(n_t)
        .map(|s| energy(&s[..n_t / 2]))
        .sum();
    assert!((energy(&out) - 0.25 * first_half).abs() < 1e-12 * first_half);
}

#[test]
fn pure_backscatter_survives_subtraction() {
    let config = OfdmConfig::default();
    let frame = gen_ofdm_frame(&config, 2, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
    let reflected = backscatter_modulate(&frame.samples, &BackscatterSymbol::message(&[1.0, 0.5], 1), &config).unwrap();
    let z = cp_subtract(&reflected, &config).unwrap();
    let n_t = config.symbol_len();
    let expected: Vec<Complex64> = reflected
        .chunks(n_t)
        .flat_map(|s| s[config.cp_guard..config.cp_len].to_vec())
        .collect();
    assert_eq!(z, expected);
    assert!(energy(&z) > 0.0);
}

#[test]
fn subtracted_noise_has_twice_the_variance() {
    let config = OfdmConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let frame = gen_ofdm_frame(&config, 10_000, &mut rng).unwrap();
    let sigma2 = 1e-6;
    let noise = awgn_with_variance(sigma2, frame.samples.len(), &mut rng);
    let y: Vec<Complex64> = frame.samples.iter().zip(&noise).map(|(s, w)| s + w).collect();
    let z = cp_subtract(&y, &config).unwrap();
    let power = energy(&z) / z.len() as f64;
    assert!((power / (2.0 * sigma2) - 1.0).abs() < 0.05, "{power}");
}

#[test]
fn harvested_power_of_gaussian_signal() {
    let x = awgn_with_variance(2e-3, 100_000, &mut ChaCha8Rng::seed_from_u64(6));
    let r = harvested_power(&x, 0.7).unwrap();
    assert!((r.value_w / 1.4e-3 - 1.0).abs() < 0.02);
    assert_eq!(harvested_power(&[c(0.0, 0.0); 8], 0.7).unwrap().value_w, 0.0);
    assert_eq!(harvested_power(&[c(0.0, 1.0); 8], 0.5).unwrap().value_w, 0.5);
}

#[test]
fn noiseless_flat_readings_follow_the_coefficients() {
    let config = OfdmConfig::default();
    let flat = [Tap::new(0, c(0.3, -0.2))];
    let channels = FieldChannels::fixed(&flat, &[Tap::new(0, c(0.1, 0.4))], &[Tap::new(0, c(0.7, 0.0))], 2);
    let params = ReceiverParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    // both symbols see the same ambient power only when the source repeats,
    // so read a one-symbol message twice on the same frame instead
    let ambient = gen_ofdm_frame(&config, 1, &mut rng).unwrap();
    let one = FieldChannels::fixed(&flat, &[Tap::new(0, c(0.1, 0.4))], &[Tap::new(0, c(0.7, 0.0))], 1);
    let a = transmit_over_ambient(&[0.2], &ambient, &one, &params, &mut rng).unwrap();
    let b = transmit_over_ambient(&[0.8], &ambient, &one, &params, &mut rng).unwrap();
    assert!((a[0].value_w / b[0].value_w - 0.25).abs() < 1e-12);

    let zeros = transmit_bd_message(&[0.0, 0.0], &channels, &config, &params, &mut rng).unwrap();
    assert!(reading_values(&zeros).iter().all(|v| v.abs() < 1e-30));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn downlink_cancels_for_any_channel_inside_the_prefix(seed in any::<u64>(), n_taps in 1usize..12) {
        let config = OfdmConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let frame = gen_ofdm_frame(&config, 4, &mut rng).unwrap();
        let taps = random_taps(&mut rng, n_taps, config.cp_len - 1);
        let guarded = OfdmConfig { cp_guard: taps.iter().map(|t| t.delay).max().unwrap(), ..config };
        let y = apply_multipath(&frame.samples, &taps, &guarded).unwrap();
        let z = cp_subtract(&y, &guarded).unwrap();
        let scale = y.iter().map(|s| s.norm()).fold(0.0, f64::max);
        prop_assert!(z.iter().all(|s| s.norm() <= 1e-12 * scale));
    }

    #[test]
    fn subtraction_is_linear(seed in any::<u64>(), a in -5.0f64..5.0, b in -5.0f64..5.0) {
        let config = OfdmConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = awgn_with_variance(1.0, 3 * config.symbol_len(), &mut rng);
        let y = awgn_with_variance(1.0, 3 * config.symbol_len(), &mut rng);
        let mix: Vec<Complex64> = x.iter().zip(&y).map(|(p, q)| p * a + q * b).collect();
        let lhs = cp_subtract(&mix, &config).unwrap();
        let zx = cp_subtract(&x, &config).unwrap();
        let zy = cp_subtract(&y, &config).unwrap();
        for ((l, p), q) in lhs.iter().zip(&zx).zip(&zy) {
            prop_assert!((l - (p * a + q * b)).norm() < 1e-12);
        }
    }

    #[test]
    fn transition_offset_keeps_downlink_cancelled(seed in any::<u64>(), offset in -15isize..=15) {
        let config = OfdmConfig::default();
        prop_assume!(offset.unsigned_abs() <= config.max_timing_offset());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let channels = FieldChannels::fixed(
            &[Tap::new(0, cscg(&mut rng, 1.0))],
            &[Tap::new(0, cscg(&mut rng, 1.0))],
            &[Tap::new(0, cscg(&mut rng, 1.0))],
            2,
        );
        let without_direct = FieldChannels { source_to_rx: vec![Vec::new(); 2], ..channels.clone() };
        let params = ReceiverParams { timing_offset: offset, ..ReceiverParams::default() };
        let ambient = gen_ofdm_frame(&config, 2, &mut rng).unwrap();
        let full = transmit_samples(&[0.6, 0.3], &ambient, &channels, &params, &mut rng).unwrap();
        let reflected_only = transmit_samples(&[0.6, 0.3], &ambient, &without_direct, &params, &mut rng).unwrap();
        let z_full = cp_subtract(&full, &config).unwrap();
        let z_ref = cp_subtract(&reflected_only, &config).unwrap();
        for (p, q) in z_full.iter().zip(&z_ref) {
            prop_assert!((p - q).norm() < 1e-12);
        }
    }

    #[test]
    fn readings_scale_with_the_coefficient(seed in any::<u64>(), b in 0.1f64..1.0) {
        let config = OfdmConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let channels = FieldChannels::fixed(
            &random_taps(&mut rng, 3, 3),
            &random_taps(&mut rng, 3, 3),
            &random_taps(&mut rng, 3, 3),
            1,
        );
        let config = OfdmConfig { cp_guard: 6, ..config };
        let params = ReceiverParams::default();
        let ambient = gen_ofdm_frame(&config, 1, &mut rng).unwrap();
        let full = transmit_over_ambient(&[1.0], &ambient, &channels, &params, &mut rng).unwrap();
        let part = transmit_over_ambient(&[b], &ambient, &channels, &params, &mut rng).unwrap();
        prop_assert!((part[0].value_w / full[0].value_w - b).abs() < 1e-9);
    }
}
