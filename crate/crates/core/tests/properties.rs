mod common;

use proptest::prelude::*;

use common::RefCache;
use idtsim::analysis::{bin_trace, match_events, train_forest, Dataset, ForestParams, RandomForestModel};
use idtsim::cache::{CacheGeometry, L1dCache};
use idtsim::config::SimConfig;
use idtsim::core_sim::{Cycle, LogKind, SimLog, Subject};
use idtsim::mem_model::{PhysAddr, VirtAddr};
use idtsim::workloads::{gen_profile_library, read_profiles, write_profiles};

#[derive(Debug, Clone)]
enum Op {
    Access(u64),
    Flush(u64),
}

fn ops() -> impl Strategy<Value = Vec<Op>> {
    // 4 sets × 12 pages keeps sets contended
    let addr = (0u64..12, 0u64..4).prop_map(|(p, s)| 0x3000_0000 + p * 4096 + s * 64);
    prop::collection::vec(prop_oneof![4 => addr.clone().prop_map(Op::Access), 1 => addr.prop_map(Op::Flush)], 1..400)
}

proptest! {
    #[test]
    fn cache_matches_reference(ops in ops(), ways_log in 0u32..4) {
        let ways = 1 << ways_log;
        let mut sim = L1dCache::new(CacheGeometry::new(64, ways).unwrap(), 8);
        let mut reference = RefCache::new(64, ways);
        for op in ops {
            match op {
                Op::Access(a) => {
                    let got = sim.access(VirtAddr::new(a), PhysAddr::new(a));
                    let want = reference.access(a);
                    prop_assert_eq!(got.hit, want.hit);
                    prop_assert_eq!(got.evicted.map(|v| v.as_u64()), want.evicted);
                }
                Op::Flush(a) => {
                    sim.flush(VirtAddr::new(a));
                    reference.flush(a);
                }
            }
        }
        for set in 0..4 {
            let got: Vec<Option<u64>> = sim.set_contents(set).iter().map(|l| l.map(|v| v.as_u64())).collect();
            prop_assert_eq!(got, reference.sets[set].leaves());
        }
    }

    #[test]
    fn event_matching_is_one_to_one(
        mut det in prop::collection::vec(0u64..100_000, 0..200),
        mut truth in prop::collection::vec(0u64..100_000, 0..200),
        window in 0u64..5_000,
    ) {
        det.sort_unstable();
        truth.sort_unstable();
        truth.dedup();
        let to_cycles = |v: &[u64]| v.iter().copied().map(Cycle).collect::<Vec<_>>();
        let r = match_events(&to_cycles(&det), &to_cycles(&truth), Cycle(window), 1);
        prop_assert!(r.matched <= det.len().min(truth.len()) as u64);
        prop_assert_eq!(r.matched + r.false_positives, det.len() as u64);
        prop_assert_eq!(r.matched + r.false_negatives, truth.len() as u64);
        let f = if r.precision + r.recall > 0.0 { 2.0 * r.precision * r.recall / (r.precision + r.recall) } else { 0.0 };
        prop_assert!((r.f_score - f).abs() < 1e-12);
        prop_assert!(r.f_score <= r.precision.max(r.recall) + 1e-12);
    }

    #[test]
    fn binning_conserves_in_range_events(times in prop::collection::vec(0u64..1_000_000, 0..300), bins in 1usize..50) {
        let times: Vec<Cycle> = times.into_iter().map(Cycle).collect();
        let v = bin_trace(&times, Cycle(0), 1, 1_000, bins);
        let in_range = times.iter().filter(|t| t.0 < 1_000 * bins as u64).count();
        prop_assert_eq!(v.iter().map(|c| *c as usize).sum::<usize>(), in_range);
    }

    #[test]
    fn log_csv_round_trips(recs in prop::collection::vec((0u64..u64::MAX / 2, 0u8..3, any::<u8>(), "[a-z ,\"]{0,8}"), 0..40)) {
        let mut log = SimLog::default();
        for (t, k, v, d) in recs {
            let kind = [LogKind::Irq, LogKind::Detect, LogKind::Tick][k as usize];
            log.push(Cycle(t), kind, Subject::Vector(v), d);
        }
        let back = SimLog::read_csv(log.to_csv_string().as_bytes()).unwrap();
        prop_assert_eq!(back, log);
    }
}

#[test]
fn model_text_round_trips_with_identical_predictions() {
    let mut d = Dataset::new(vec!["a".into(), "b".into(), "c".into()]);
    for i in 0..90u32 {
        let class = (i % 3) as usize;
        d.push(class, vec![i % 7 + 3 * class as u32, (i * 13) % 11, class as u32 * 5 + i % 2]);
    }
    let model = train_forest(&d, &ForestParams { n_trees: 15, ..Default::default() }, 4).unwrap();
    let text = model.serialize();
    assert!(text.starts_with("RFMODEL v1\n"));
    let back = RandomForestModel::parse(&text).unwrap();
    assert_eq!(back.serialize(), text);
    for r in &d.rows {
        assert_eq!(back.predict_proba(r), model.predict_proba(r));
    }
    assert!(RandomForestModel::parse("RFMODEL v2\n").is_err());
}

#[test]
fn forest_is_seed_deterministic() {
    let mut d = Dataset::new(vec!["x".into(), "y".into()]);
    for i in 0..60u32 {
        d.push((i % 2) as usize, vec![i % 2 * 4 + i % 3, i % 5]);
    }
    let p = ForestParams { n_trees: 10, ..Default::default() };
    assert_eq!(train_forest(&d, &p, 9).unwrap().serialize(), train_forest(&d, &p, 9).unwrap().serialize());
}

#[test]
fn profile_library_round_trips() {
    let lib = gen_profile_library(4, 0.3, 0.25, 11);
    let mut buf = Vec::new();
    write_profiles(&lib, &mut buf).unwrap();
    let back = read_profiles(buf.as_slice()).unwrap();
    assert_eq!(back.len(), 4);
    for (a, b) in lib.iter().zip(&back) {
        assert_eq!(a.label, b.label);
        assert_eq!(a.dispersion, b.dispersion);
        // shortest-round-trip float formatting
        assert_eq!(a.bins, b.bins);
    }
}

#[test]
fn config_toml_round_trips() {
    let mut cfg = SimConfig { noise_p: 0.01, ..SimConfig::default() };
    cfg.fingerprint.profiles = 7;
    let back = SimConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
    assert_eq!(back, cfg);
    assert_eq!(SimConfig::from_toml_str("").unwrap(), SimConfig::default());
    assert!(SimConfig::from_toml_str("noise_p = 1.5").is_err());
    assert!(SimConfig::from_toml_str("no_such_key = 1").is_err());
}
