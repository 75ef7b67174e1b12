mod common;

use std::collections::HashSet;

use proptest::prelude::*;
use vcsel_rul::dataset::{self, NormalizationStats};
use vcsel_rul::llsf::{llsf_predict_rul, LlsfFit};
use vcsel_rul::metrics::{mae, rmse, score_s, ErrorHistogram, ScoreParams};
use vcsel_rul::model::{self, ModelSpec, Network, Variant};
use vcsel_rul::synth::{self, GeneratorConfig, DEFAULT_DROP_FRACTION};
use vcsel_rul::tensor::{LstmLayer, MaxPool1d, Tensor};

use common::{rng, small_generator, uniform_vec};

fn errors() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.0..5000.0f64, -2000.0..2000.0f64), 1..40)
}

fn split_pairs(pairs: &[(f64, f64)]) -> (Vec<f64>, Vec<f64>) {
    pairs.iter().map(|&(t, d)| (t, t + d)).unzip()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn late_costs_more_than_early(d in 1e-3..2000.0f64, t in 0.0..5000.0f64) {
        let p = ScoreParams::default();
        let late = score_s(&[t], &[t + d], &p).unwrap();
        let early = score_s(&[t], &[t - d], &p).unwrap();
        prop_assert!(late > early);
    }

    #[test]
    fn score_is_additive_over_concatenation(a in errors(), b in errors()) {
        let p = ScoreParams::default();
        let (ta, pa) = split_pairs(&a);
        let (tb, pb) = split_pairs(&b);
        let joined = score_s(&[ta.clone(), tb.clone()].concat(), &[pa.clone(), pb.clone()].concat(), &p).unwrap();
        let parts = score_s(&ta, &pa, &p).unwrap() + score_s(&tb, &pb, &p).unwrap();
        prop_assert!((joined - parts).abs() <= 1e-9 * parts.abs().max(1.0));
    }

    #[test]
    fn larger_errors_never_score_less(pairs in errors(), grow in 1.0..3.0f64) {
        let p = ScoreParams::default();
        let (t, pred) = split_pairs(&pairs);
        let wider: Vec<f64> = pairs.iter().map(|&(t, d)| t + d * grow).collect();
        prop_assert!(score_s(&t, &wider, &p).unwrap() >= score_s(&t, &pred, &p).unwrap());
        prop_assert!(rmse(&t, &wider).unwrap() >= rmse(&t, &pred).unwrap());
        prop_assert!(mae(&t, &wider).unwrap() >= mae(&t, &pred).unwrap());
    }

    #[test]
    fn rmse_bounds_mae(pairs in errors()) {
        let (t, pred) = split_pairs(&pairs);
        let r = rmse(&t, &pred).unwrap();
        let m = mae(&t, &pred).unwrap();
        prop_assert!(m >= 0.0);
        prop_assert!(r >= m - 1e-9 * m.max(1.0));
    }

    #[test]
    fn score_is_zero_only_for_exact_predictions(t in prop::collection::vec(0.0..5000.0f64, 1..20)) {
        prop_assert_eq!(score_s(&t, &t, &ScoreParams::default()).unwrap(), 0.0);
    }

    #[test]
    fn histogram_counts_every_error(pairs in errors(), bins in 1usize..60) {
        let errs: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let h = ErrorHistogram::build(&errs, bins).unwrap();
        prop_assert_eq!(h.counts.len(), bins);
        prop_assert_eq!(h.edges.len(), bins + 1);
        prop_assert_eq!(h.counts.iter().sum::<usize>(), errs.len());
        prop_assert!(h.edges.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn llsf_prediction_stays_in_range(
        points in prop::collection::vec((0.0..4000.0f64, 0.01..5.0f64), 2..30),
        now in 0.0..5000.0f64,
        threshold in 0.0..5.0f64,
    ) {
        let (mut times, powers): (Vec<f64>, Vec<f64>) = points.into_iter().unzip();
        // distinct abscissae so the fit is well posed
        for (i, t) in times.iter_mut().enumerate() {
            *t += i as f64 * 1e-3;
        }
        let rul = llsf_predict_rul(&times, &powers, now, threshold, 5000.0).unwrap();
        prop_assert!(rul.is_finite());
        prop_assert!((0.0..=5000.0).contains(&rul));
    }

    #[test]
    fn llsf_recovers_exact_lines(
        intercept in 0.5..5.0f64,
        slope in -1e-3..-1e-6f64,
        n in 2usize..40,
        step in 1.0..100.0f64,
    ) {
        let times: Vec<f64> = (0..n).map(|i| i as f64 * step).collect();
        let powers: Vec<f64> = times.iter().map(|t| intercept + slope * t).collect();
        let fit = LlsfFit::fit(&times, &powers).unwrap();
        prop_assert!((fit.slope - slope).abs() <= 1e-8 * slope.abs());
        prop_assert!((fit.intercept - intercept).abs() <= 1e-8 * intercept);
        prop_assert_eq!(fit.n_points, n);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn labels_match_failure_time(seed in 0u64..10_000, window in 1usize..6) {
        let fleet = synth::generate_fleet(&small_generator(20, seed)).unwrap();
        for device in dataset::filter_devices(&fleet) {
            let t_f = device.failure_time_h.unwrap();
            for s in dataset::window_series(&device, window) {
                prop_assert_eq!(s.window_power.len(), window);
                prop_assert!(s.window_end_time_h < t_f);
                prop_assert_eq!(s.rul_h, t_f - s.window_end_time_h);
                prop_assert!(s.rul_h > 0.0 && s.rul_h <= dataset::RUL_CAP_H);
                let end = device.times_h.iter().position(|&t| t == s.window_end_time_h).unwrap();
                prop_assert_eq!(&s.window_power[..], &device.power_mw[end + 1 - window..=end]);
            }
        }
    }

    #[test]
    fn split_keeps_devices_apart(seed in 0u64..10_000) {
        let samples = common::samples_from_fleet(40, seed);
        let split = dataset::split(&samples, seed, dataset::DEFAULT_TRAIN_FRACTION).unwrap();
        let train: HashSet<&str> = split.train.iter().map(|s| s.device_id.as_str()).collect();
        let test: HashSet<&str> = split.test.iter().map(|s| s.device_id.as_str()).collect();
        prop_assert!(train.is_disjoint(&test));
        prop_assert_eq!(split.train.len() + split.test.len(), samples.len());
        let f = split.train_fraction();
        prop_assert!((0.7..=0.9).contains(&f), "train fraction {}", f);
    }

    #[test]
    fn dataset_round_trips_through_disk(seed in 0u64..10_000) {
        let samples = common::samples_from_fleet(12, seed);
        let split = dataset::split(&samples, seed, 0.8).unwrap();
        let dir = tempfile::tempdir().unwrap();
        dataset::write_dataset(dir.path(), &samples, &split).unwrap();
        let (back, back_split) = dataset::read_dataset(dir.path()).unwrap();
        prop_assert_eq!(back, samples);
        prop_assert_eq!(back_split, split);
    }

    #[test]
    fn fleet_round_trips_through_disk(seed in 0u64..10_000) {
        let fleet = synth::generate_fleet(&small_generator(8, seed)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        synth::write_fleet(dir.path(), &fleet).unwrap();
        prop_assert_eq!(synth::read_fleet(dir.path()).unwrap(), fleet);
    }

    #[test]
    fn generation_is_deterministic_and_bounded(seed in 0u64..10_000) {
        let config = small_generator(15, seed);
        let a = synth::generate_fleet(&config).unwrap();
        prop_assert_eq!(&a, &synth::generate_fleet(&config).unwrap());
        for d in &a {
            prop_assert!(d.times_h.last().copied().unwrap() <= config.max_test_hours);
            prop_assert_eq!(d.censored, d.failure_time_h.is_none());
            if let Some(t_f) = d.failure_time_h {
                prop_assert!(t_f <= config.max_test_hours);
            }
        }
    }

    #[test]
    fn hotter_devices_fail_sooner(seed in 0u64..10_000, ambient in 60.0..140.0f64, extra in 1.0..40.0f64) {
        let at = |t: f64| GeneratorConfig {
            temperature_levels_c: vec![t],
            infant_mortality_fraction: 0.0,
            noise_std_relative: 0.0,
            master_seed: seed,
            ..GeneratorConfig::default()
        };
        let (cool, hot) = (at(ambient), at(ambient + extra));
        for i in 0..10 {
            let t_cool = synth::device_law(&cool, i).failure_time(DEFAULT_DROP_FRACTION);
            let t_hot = synth::device_law(&hot, i).failure_time(DEFAULT_DROP_FRACTION);
            prop_assert!(t_hot < t_cool, "device {}: {} vs {}", i, t_hot, t_cool);
        }
    }

    #[test]
    fn batch_loss_ignores_sample_order(seed in 0u64..10_000) {
        let samples = common::samples_from_fleet(6, seed);
        prop_assume!(samples.len() >= 2);
        let stats = NormalizationStats::fit(&samples).unwrap();
        let normalized = stats.apply_all(&samples);
        let mut reversed = normalized.clone();
        reversed.reverse();
        let net = Network::build(&ModelSpec { seed, ..ModelSpec::default() }).unwrap();
        let a = model::mse(&net, &normalized).unwrap();
        let b = model::mse(&net, &reversed).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1e-12));
    }

    #[test]
    fn each_variant_reads_exactly_its_inputs(seed in 0u64..10_000) {
        let mut r = rng(seed);
        let (w1, w2) = (uniform_vec(&mut r, 3, 0.0, 1.0), uniform_vec(&mut r, 3, 0.0, 1.0));
        let (c1, c2) = (uniform_vec(&mut r, 6, 0.0, 1.0), uniform_vec(&mut r, 6, 0.0, 1.0));
        for variant in Variant::ALL {
            let net = Network::build(&ModelSpec { variant, seed, ..ModelSpec::default() }).unwrap();
            let base = net.predict_one(&w1, &c1).unwrap();
            let window_moves = base != net.predict_one(&w2, &c1).unwrap();
            let conditions_move = base != net.predict_one(&w1, &c2).unwrap();
            prop_assert_eq!(window_moves, variant != Variant::CnnOnly, "{} window", variant);
            prop_assert_eq!(conditions_move, variant != Variant::LstmOnly, "{} conditions", variant);
        }
    }

    #[test]
    fn same_seed_builds_identical_networks(seed in 0u64..10_000) {
        let spec = ModelSpec { seed, ..ModelSpec::default() };
        prop_assert_eq!(
            Network::build(&spec).unwrap().flat_params(),
            Network::build(&spec).unwrap().flat_params()
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn lstm_hidden_states_are_bounded(seed in 0u64..10_000, steps in 1usize..12, scale in 0.1..50.0f64) {
        let mut r = rng(seed);
        let layer = LstmLayer::init(3, 4, &mut r);
        let x = Tensor::new(vec![steps, 3], uniform_vec(&mut r, steps * 3, -scale, scale)).unwrap();
        let (h, _) = layer.forward_sequence(&x).unwrap();
        prop_assert!(h.data().iter().all(|v| v.abs() < 1.0));
    }

    #[test]
    fn max_pool_routes_all_gradient(seed in 0u64..10_000, pool in 1usize..4, blocks in 1usize..6, ch in 1usize..4) {
        let mut r = rng(seed);
        let len = pool * blocks;
        let layer = MaxPool1d::new(pool).unwrap();
        let x = Tensor::new(vec![len, ch], uniform_vec(&mut r, len * ch, -1.0, 1.0)).unwrap();
        let (_, cache) = layer.forward(&x).unwrap();
        let g = uniform_vec(&mut r, blocks * ch, -1.0, 1.0);
        let gx = layer.backward(&cache, &Tensor::new(vec![blocks, ch], g.clone()).unwrap()).unwrap();
        let (sum_in, sum_out): (f64, f64) = (gx.data().iter().sum(), g.iter().sum());
        prop_assert!((sum_in - sum_out).abs() < 1e-12);
        prop_assert_eq!(gx.data().iter().filter(|v| **v != 0.0).count(), g.iter().filter(|v| **v != 0.0).count());
    }

    #[test]
    fn checkpoint_text_round_trips(seed in 0u64..10_000) {
        let samples = common::samples_from_fleet(4, seed % 50);
        prop_assume!(!samples.is_empty());
        let stats = NormalizationStats::fit(&samples).unwrap();
        let net = Network::build(&ModelSpec { seed, ..ModelSpec::default() }).unwrap();
        let trained = model::TrainedModel::new(net, stats, Default::default());
        let text = trained.to_checkpoint_string();
        let back = model::TrainedModel::from_checkpoint_str(&text).unwrap();
        prop_assert_eq!(back.network().flat_params(), trained.network().flat_params());
        prop_assert_eq!(back.stats(), trained.stats());
        prop_assert_eq!(back.to_checkpoint_string(), text);
    }
}
