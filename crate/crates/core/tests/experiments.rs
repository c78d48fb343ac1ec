mod common;

use common::quiet_config;
use idtsim::analysis::AnalysisError;
use idtsim::experiments::{self, ExperimentError, ExperimentName, ExperimentSpec, Overrides};
use idtsim::workloads::BackgroundConfig;
use idtsim::SimConfig;

fn spec(name: ExperimentName, config: SimConfig) -> ExperimentSpec {
    ExperimentSpec::new(name, config, 77)
}

#[test]
fn zero_trials_is_a_usage_error() {
    let mut cfg = SimConfig::default();
    cfg.distinguish.trials = 0;
    assert!(matches!(
        experiments::run_distinguish(&spec(ExperimentName::Distinguish, cfg)),
        Err(ExperimentError::Usage(_))
    ));
}

#[test]
fn single_spacing_gives_one_row() {
    let mut cfg = SimConfig::default();
    cfg.curve.spacings = vec![40_000];
    cfg.curve.n_interrupts = 100;
    let r = experiments::run_curve(&spec(ExperimentName::Curve, cfg)).unwrap();
    let csv = String::from_utf8(r.to_csv()).unwrap();
    assert_eq!(csv, "spacing_cycles,missed_leakidt,missed_pp\n40000,0,0\n");
}

#[test]
fn ideal_compare_is_perfect_for_leakidt() {
    let mut cfg = quiet_config();
    cfg.compare.victim_accesses = 2_000;
    cfg.compare.background = BackgroundConfig::silent();
    let (r, files) = experiments::run_compare(&spec(ExperimentName::Compare, cfg)).unwrap();
    assert_eq!(r.leakidt.score.f_score, 1.0);
    assert_eq!(files.len(), 2);
}

#[test]
fn empty_victim_flags_undefined_recall() {
    let mut cfg = SimConfig::default();
    cfg.compare.victim_accesses = 0;
    let (r, _) = experiments::run_compare(&spec(ExperimentName::Compare, cfg)).unwrap();
    for m in [&r.leakidt, &r.prime_probe] {
        assert!(!m.score.recall_defined);
        assert_eq!(m.score.recall, 0.0);
    }
}

#[test]
fn one_profile_is_degenerate() {
    let cfg = SimConfig::default();
    let s = spec(ExperimentName::Fingerprint, cfg)
        .with_overrides(&Overrides { profiles: Some(1), ..Default::default() })
        .unwrap();
    let mut small = s.clone();
    small.config.fingerprint.traces_per_profile = 10;
    assert!(matches!(
        experiments::run_fingerprint(&small),
        Err(ExperimentError::Analysis(AnalysisError::DegenerateDataset(_)))
    ));
}

#[test]
fn fingerprint_files_are_square_and_labelled() {
    let mut cfg = SimConfig::default();
    cfg.fingerprint.profiles = 3;
    cfg.fingerprint.traces_per_profile = 10;
    cfg.fingerprint.n_trees = 10;
    let (r, files) = experiments::run_fingerprint(&spec(ExperimentName::Fingerprint, cfg)).unwrap();
    assert_eq!((r.n_train, r.n_test), (21, 9));
    let confusion = String::from_utf8(files.iter().find(|f| f.0 == "confusion.csv").unwrap().1.clone()).unwrap();
    let rows: Vec<&str> = confusion.lines().collect();
    assert_eq!(rows[0], "true\\predicted,site00,site01,site02");
    assert_eq!(rows.len(), 4);
    assert!(rows[1..].iter().all(|r| r.split(',').count() == 4));
}

#[test]
fn lab_without_noise_is_perfect() {
    let mut cfg = quiet_config();
    cfg.keystrokes.runs = 1;
    cfg.keystrokes.keys = 30;
    let (r, files) = experiments::run_keystrokes(&spec(ExperimentName::Keystrokes, cfg)).unwrap();
    assert_eq!(r.lab.mean_f_score, 1.0);
    // detection leads the stdin timestamp by the reader latency
    assert!(r.lab.mean_delay_median_us < 0.0);
    assert!(files.iter().any(|f| f.0 == "keystrokes_lab_run0_truth.csv"));
}

#[test]
fn mitigation_without_noise_sees_nothing() {
    let mut cfg = quiet_config();
    cfg.mitigate.n_interrupts = 1_000;
    let r = experiments::run_mitigate(&spec(ExperimentName::Mitigate, cfg)).unwrap();
    assert_eq!(r.mitigated_detections, 0);
    assert_eq!(r.control_matched, 1_000);
}
