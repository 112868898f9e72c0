mod common;

use cabin_ews::eval::{compare_models, evaluate, export_loss_curves, rmse, write_predictions, RmseUnits};
use cabin_ews::preprocess::{prepare, PreprocessConfig, Split, SplitWindows};
use cabin_ews::seq2seq::{train, Architecture, Forecaster, ModelConfig, Seq2SeqModel, TrainConfig};
use cabin_ews::telemetry::{generate_synthetic, SynthConfig};
use ndarray::{s, Array3};
use proptest::prelude::*;

fn tiny(bidirectional: bool) -> Architecture {
    Architecture {
        enc_hidden: 3,
        dec_hidden: 3,
        head_hidden: 0,
        bidirectional,
    }
}

#[test]
fn two_test_windows_export_one_row_per_step_and_channel() {
    let frames = generate_synthetic(&SynthConfig {
        seed: 2,
        duration_s: 3600,
        ..Default::default()
    })
    .unwrap();
    let cfg = PreprocessConfig {
        lookback_s: 300,
        horizon_s: 60,
        window_stride_s: 60,
        target_channels: vec![cabin_ews::telemetry::Channel::Pc0_3],
        ..Default::default()
    };
    let (mut ds, _) = prepare(&frames, &cfg).unwrap();
    let t = &ds.test;
    ds.test = SplitWindows {
        x: t.x.slice(s![..2, .., ..]).to_owned(),
        y: t.y.slice(s![..2, .., ..]).to_owned(),
        origins: t.origins[..2].to_vec(),
    };
    let model = Seq2SeqModel::new(ModelConfig::for_dataset(&ds, tiny(true), 0)).unwrap();
    let f = Forecaster::from_dataset(model, &ds, 0).unwrap();
    let mut buf = Vec::new();
    let rows = write_predictions(&f, &ds, Split::Test, &mut buf).unwrap();
    assert_eq!(rows, 120);
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 121);
    assert_eq!(lines[0], "timestamp_s,channel,true_value,predicted_value");
    let first_ts: i64 = lines[1].split(',').next().unwrap().parse().unwrap();
    assert_eq!(first_ts, ds.test.origins[0] + 300);
}

#[test]
fn loss_curve_has_one_row_per_epoch() {
    let zero: Vec<bool> = (0..16).map(|k| k % 2 == 0).collect();
    let ds = common::windowed_fixture(&zero, 4, 4, 1);
    let model = Seq2SeqModel::new(ModelConfig::for_dataset(&ds, tiny(true), 3)).unwrap();
    let tcfg = TrainConfig {
        epochs: 10,
        patience: 10,
        batch_size: 4,
        ..Default::default()
    };
    let (_, report) = train(&model, &ds, &tcfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("loss.csv");
    export_loss_curves(&report, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 11);
    assert!(text.lines().nth(10).unwrap().starts_with("10,"));
}

#[test]
fn swapping_architectures_swaps_the_columns() {
    let zero: Vec<bool> = (0..12).map(|k| k % 3 == 0).collect();
    let ds = common::windowed_fixture(&zero, 4, 5, 6);
    let tcfg = TrainConfig {
        epochs: 3,
        batch_size: 4,
        ..Default::default()
    };
    let a = compare_models(&ds, tiny(true), tiny(false), &tcfg, &[0, 1]).unwrap();
    let b = compare_models(&ds, tiny(false), tiny(true), &tcfg, &[0, 1]).unwrap();
    for (x, y) in a.rows.iter().zip(&b.rows) {
        assert_eq!(x.gru, y.bigru);
        assert_eq!(x.bigru, y.gru);
    }
    let (g, bi) = a.aggregate(RmseUnits::Normalized);
    assert_eq!(b.aggregate(RmseUnits::Normalized), (bi, g));
    let mut csv = Vec::new();
    a.write_csv(RmseUnits::Raw, &mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.lines().all(|l| l.split(',').count() == 3));
}

#[test]
fn raw_rmse_scales_with_the_target_range() {
    // fixture targets span [0, 10], so raw error is 10x normalized
    let ds = common::windowed_fixture(&[false; 8], 3, 6, 4);
    let model = Seq2SeqModel::new(ModelConfig::for_dataset(&ds, tiny(false), 1)).unwrap();
    let f = Forecaster::from_dataset(model, &ds, 0).unwrap();
    let r = evaluate(&f, &ds, Split::Test).unwrap();
    assert_eq!(r.windows, 6);
    // the count floor can only shrink raw error
    assert!(r.overall_raw <= 10.0 * r.overall_normalized * (1.0 + 1e-12));
    assert!(r.overall_raw > 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rmse_properties(seed in any::<u64>(), n in 1usize..6, t in 1usize..5, o in 1usize..4) {
        let mut rng = common::rng(seed);
        let a = common::random_tensor((n, t, o), &mut rng);
        let b = common::random_tensor((n, t, o), &mut rng);
        let ab = rmse(a.view(), b.view()).unwrap();
        let ba = rmse(b.view(), a.view()).unwrap();
        prop_assert_eq!(&ab, &ba);
        prop_assert_eq!(rmse(a.view(), a.view()).unwrap().overall, 0.0);
        let mse = (&a - &b).mapv(|e| e * e).mean().unwrap();
        prop_assert!((ab.overall.powi(2) - mse).abs() <= 1e-12 * mse.max(1.0));
        let lo = ab.per_channel.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = ab.per_channel.iter().cloned().fold(0.0, f64::max);
        prop_assert!(lo - 1e-12 <= ab.overall && ab.overall <= hi + 1e-12);
        let wrong = Array3::<f64>::zeros((n, t, o + 1));
        prop_assert!(rmse(a.view(), wrong.view()).is_err());
    }
}
