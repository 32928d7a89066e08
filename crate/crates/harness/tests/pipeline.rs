use banddet_harness::train::StopReason;
use banddet_harness::{
    evaluate_ber, train, ArchitectureChoice, DetectorKind, EvalConfig, NamedDetector, Precision, Scenario, StopRule,
    TrainingConfig,
};

// LMMSE bit errors for K=100, B=1, 13 dB, seed 1, 10048 frames; regenerate if
// the channel, noise or evaluation streams change.
const LMMSE_K100_13DB_ERRORS: u64 = 11482;

#[test]
fn tiny_run_lowers_loss() {
    let cfg = TrainingConfig {
        name: "tiny".into(),
        architecture: ArchitectureChoice::Cnn,
        k_train: 8,
        samples: 1000,
        validation_samples: 200,
        minibatch: 50,
        max_epochs: 2,
        validations_per_epoch: 2,
        depths: vec![16, 8],
        precision: Precision::F64,
        learning_rate: 3e-3,
        ..TrainingConfig::default()
    };
    let out = train(&cfg).unwrap();
    assert_eq!(out.steps, 40);
    assert_eq!(out.stop, StopReason::MaxEpochs);
    assert!(out.best_validation_loss < out.initial_validation_loss);
    // row 0 is the untrained network and has no training loss
    assert!(out.trace[0].train_loss.is_nan());
    let first = out.trace[1].train_loss;
    let last = out.trace.last().unwrap().train_loss;
    assert!(last < first, "train loss {first} -> {last}");
}

#[test]
fn coin_flip_ber_is_one_half() {
    let mut eval = EvalConfig::new(Scenario::banded(100, 1), vec![9.0], 5);
    eval.stop = StopRule::fixed_bits(1_000_000);
    let report = evaluate_ber(&[NamedDetector::new("coin", DetectorKind::CoinFlip)], &eval).unwrap();
    let row = report.row("coin", 9.0).unwrap();
    assert!(row.bits >= 1_000_000);
    // 6 standard deviations of a fair coin over 10^6 bits is 0.003
    assert!((0.49..=0.51).contains(&row.ber), "{}", row.ber);
}

#[test]
fn lmmse_fixture_at_13_db() {
    let mut eval = EvalConfig::new(Scenario::banded(100, 1), vec![13.0], 1);
    eval.stop = StopRule::fixed_bits(1_000_000);
    let report = evaluate_ber(&[NamedDetector::new("lmmse", DetectorKind::Lmmse)], &eval).unwrap();
    let row = report.row("lmmse", 13.0).unwrap();
    assert_eq!(row.bits, 1_004_800);
    assert_eq!(row.errors, LMMSE_K100_13DB_ERRORS, "ber {}", row.ber);
    assert!(row.ber > 0.0 && row.ber.is_finite());
    assert!(row.ci_lo < row.ber && row.ber < row.ci_hi);
}

#[test]
fn linear_baselines_order_on_shared_frames() {
    let mut eval = EvalConfig::new(Scenario::banded(10, 1), vec![9.0], 3);
    eval.stop = StopRule::fixed_bits(200_000);
    let dets = [
        NamedDetector::new("map", DetectorKind::Map),
        NamedDetector::new("lmmse", DetectorKind::Lmmse),
        NamedDetector::new("ls", DetectorKind::Ls),
    ];
    let report = evaluate_ber(&dets, &eval).unwrap();
    let ber = |d| report.row(d, 9.0).unwrap().ber;
    assert!(ber("map") < ber("lmmse") && ber("lmmse") < ber("ls"));
    assert!(report.paired_p("map", "lmmse", 9.0).unwrap() < 0.05);
    assert!(report.paired_p("lmmse", "ls", 9.0).unwrap() < 0.05);
}
