use bornlab::experiment::{
    estimate_rho_series, estimate_rho_series_with, run_experiment, EstimateOptions,
    ExperimentConfig,
};
use bornlab::measure::{sorkin, DEFAULT_GUARD};
use bornlab::optics::{MaskScheme, OpeningMask, SlitPlate};
use bornlab::systematics::{
    detector_rho_sweep, poisson_sigma, power_sigma, DetectorModel, PowerModel, RateScaling,
    SequenceOrder,
};

fn optics() -> (SlitPlate, OpeningMask) {
    let plate = SlitPlate::three_slit(30e-6, 100e-6, 2e-3, 0.0).unwrap();
    let mask = OpeningMask::for_plate(&plate, MaskScheme::Opening, 100e-6, 0.0).unwrap();
    (plate, mask)
}

fn config(u: f64, repetitions: usize, poisson: bool) -> ExperimentConfig {
    ExperimentConfig {
        position_u: u,
        repetitions,
        seed: 77,
        scaling: RateScaling::new(80_000.0, Some(100.0)).unwrap(),
        poisson,
        reference_rate: None,
    }
}

#[test]
fn poisson_spread_matches_counting_formula() {
    let (plate, mask) = optics();
    let detector = DetectorModel::ideal();
    let power = PowerModel::default();
    // off-center point where the pairs interfere with mixed signs
    let u = 6_000.0;
    let expected = run_experiment(&plate, &mask, &power, &detector, &config(u, 1, false)).unwrap();
    let counts = expected[0].counts().unwrap();
    let sigma = poisson_sigma(&counts, &sorkin(&counts, DEFAULT_GUARD)).unwrap();

    let records = run_experiment(&plate, &mask, &power, &detector, &config(u, 2000, true)).unwrap();
    let series = estimate_rho_series(&records, DEFAULT_GUARD).unwrap();
    assert_eq!(series.defined, 2000);
    assert!(
        (series.sample_std / sigma - 1.0).abs() < 0.08,
        "{} vs {sigma}",
        series.sample_std
    );
    assert!(series.mean.abs() < 4.0 * series.standard_error);
}

#[test]
fn power_fluctuation_spread_matches_propagation() {
    let (plate, mask) = optics();
    let detector = DetectorModel::ideal();
    let dp = 0.01;
    let power = PowerModel {
        relative_fluctuation: dp,
        ..PowerModel::default()
    };
    let u = 3_000.0;
    let records =
        run_experiment(&plate, &mask, &power, &detector, &config(u, 4000, false)).unwrap();
    let series = estimate_rho_series(&records, DEFAULT_GUARD).unwrap();

    let ideal = run_experiment(
        &plate,
        &mask,
        &PowerModel::default(),
        &detector,
        &config(u, 1, false),
    )
    .unwrap();
    let pv = ideal[0].counts().unwrap();
    let sigma = power_sigma(&pv, &sorkin(&pv, DEFAULT_GUARD), dp).unwrap();
    assert!(
        (series.sample_std / sigma - 1.0).abs() < 0.08,
        "{} vs {sigma}",
        series.sample_std
    );
}

#[test]
fn expected_counts_reproduce_detector_sweep() {
    let (plate, mask) = optics();
    let detector = DetectorModel {
        dead_time: 50e-9,
        nonlinearity_beta: 0.01,
        ..DetectorModel::ideal()
    };
    let scaling = RateScaling::new(80_000.0, Some(100.0)).unwrap();
    for u in [0.0, 2_500.0, 7_000.0] {
        let sweep =
            detector_rho_sweep(&plate, &mask, &detector, &scaling, &[u], DEFAULT_GUARD).unwrap();
        let records = run_experiment(
            &plate,
            &mask,
            &PowerModel::default(),
            &detector,
            &config(u, 3, false),
        )
        .unwrap();
        let series = estimate_rho_series(&records, DEFAULT_GUARD).unwrap();
        let want = sweep[0].result.rho.unwrap();
        assert!(
            (series.mean - want).abs() <= 1e-9 * want.abs(),
            "u = {u}: {} vs {want}",
            series.mean
        );
    }
}

#[test]
fn dead_time_correction_removes_the_bias() {
    let (plate, mask) = optics();
    let detector = DetectorModel {
        dead_time: 50e-9,
        ..DetectorModel::ideal()
    };
    let records = run_experiment(
        &plate,
        &mask,
        &PowerModel::default(),
        &detector,
        &config(0.0, 400, true),
    )
    .unwrap();
    let raw = estimate_rho_series(&records, DEFAULT_GUARD).unwrap();
    let corrected = estimate_rho_series_with(
        &records,
        &EstimateOptions {
            dead_time_correction: Some(50e-9),
            ..EstimateOptions::with_guard(DEFAULT_GUARD)
        },
    )
    .unwrap();
    assert!(raw.mean.abs() > 5.0 * raw.standard_error);
    assert!(corrected.mean.abs() < 3.0 * corrected.standard_error);
}

#[test]
fn randomized_order_suppresses_drift_bias() {
    let (plate, mask) = optics();
    let detector = DetectorModel::ideal();
    let run = |order| {
        let power = PowerModel {
            linear_drift_rate: 1e-3,
            order,
            ..PowerModel::default()
        };
        let records = run_experiment(
            &plate,
            &mask,
            &power,
            &detector,
            &config(4_000.0, 10_000, false),
        )
        .unwrap();
        estimate_rho_series(&records, DEFAULT_GUARD).unwrap().mean
    };
    let fixed = run(SequenceOrder::Fixed);
    let randomized = run(SequenceOrder::RandomizedPerRepetition);
    assert!(fixed.abs() > 1e-5);
    assert!(
        randomized.abs() * 5.0 < fixed.abs(),
        "{randomized} vs {fixed}"
    );
}

#[test]
fn dark_counts_cancel_for_a_linear_detector() {
    let (plate, mask) = optics();
    let clean = DetectorModel::ideal();
    let dark = DetectorModel {
        dark_rate: 500.0,
        ..DetectorModel::ideal()
    };
    let power = PowerModel::default();
    for u in [0.0, 5_000.0] {
        let a = run_experiment(&plate, &mask, &power, &clean, &config(u, 1, false)).unwrap();
        let b = run_experiment(&plate, &mask, &power, &dark, &config(u, 1, false)).unwrap();
        let ra = estimate_rho_series(&a, DEFAULT_GUARD).unwrap().mean;
        let rb = estimate_rho_series(&b, DEFAULT_GUARD).unwrap().mean;
        assert!((ra - rb).abs() < 1e-12, "u = {u}: {ra} vs {rb}");
    }
}

#[test]
fn reference_monitor_cancels_power_noise() {
    let (plate, mask) = optics();
    let detector = DetectorModel::ideal();
    let power = PowerModel {
        relative_fluctuation: 0.01,
        ..PowerModel::default()
    };
    let cfg = ExperimentConfig {
        reference_rate: Some(1e6),
        ..config(3_000.0, 500, false)
    };
    let records = run_experiment(&plate, &mask, &power, &detector, &cfg).unwrap();
    let normalized = estimate_rho_series(&records, DEFAULT_GUARD).unwrap();
    let raw = estimate_rho_series_with(
        &records,
        &EstimateOptions {
            normalize_by_reference: false,
            ..EstimateOptions::with_guard(DEFAULT_GUARD)
        },
    )
    .unwrap();
    assert!(raw.sample_std > 1e-3);
    assert!(normalized.sample_std < 1e-9 * raw.sample_std.max(1.0) + 1e-12);
}

#[test]
fn thread_count_does_not_change_records() {
    let (plate, mask) = optics();
    let detector = DetectorModel {
        dead_time: 50e-9,
        ..DetectorModel::ideal()
    };
    let power = PowerModel {
        relative_fluctuation: 0.002,
        linear_drift_rate: 1e-4,
        order: SequenceOrder::RandomizedPerRepetition,
        ..PowerModel::default()
    };
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                run_experiment(
                    &plate,
                    &mask,
                    &power,
                    &detector,
                    &config(1_000.0, 300, true),
                )
            })
            .unwrap()
    };
    let one = run(1);
    assert_eq!(one, run(3));
    assert_eq!(one, run(8));
}
