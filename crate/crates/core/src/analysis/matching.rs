use serde::Serialize;

use super::AnalysisError;
use crate::core_sim::Cycle;
use crate::workloads::KeystrokeScript;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchReport {
    /// Expected detections: ground-truth events (2 per key for keystrokes).
    pub expected: u64,
    pub detections: u64,
    pub matched: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
    pub recall: f64,
    pub precision: f64,
    pub f_score: f64,
    /// False when there was no ground truth; recall is then reported as 0.
    pub recall_defined: bool,
    /// Detection minus truth, in µs; negative means the detection came first.
    pub delay_median_us: f64,
    pub delay_std_us: f64,
}

impl MatchReport {
    fn new(expected: u64, detections: u64, matched: u64, delays_us: &mut [f64]) -> Self {
        let recall = if expected == 0 { 0.0 } else { matched as f64 / expected as f64 };
        let precision = if detections == 0 { 0.0 } else { matched as f64 / detections as f64 };
        Self {
            expected,
            detections,
            matched,
            false_positives: detections - matched,
            false_negatives: expected - matched,
            recall,
            precision,
            f_score: f_score(precision, recall),
            recall_defined: expected > 0,
            delay_median_us: median(delays_us),
            delay_std_us: std_dev(delays_us),
        }
    }
}

pub fn f_score(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Population standard deviation.
fn std_dev(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
}

/// Scores detections against typed keys.
///
/// Key `k` claims detections inside `[t_k - window, t_k + hold_max + window]`
/// (its key-down and key-up interrupts). A detection goes to the nearest
/// claiming key; one claimed equally by two keys, or by none, is a false
/// positive. Each key accepts at most two detections, later ones are false
/// positives. The delay is taken from each key's first matched detection.
pub fn match_keystrokes(
    detected: &[Cycle],
    truth: &KeystrokeScript,
    window: Cycle,
    cycles_per_us: u64,
) -> Result<MatchReport, AnalysisError> {
    let keys = &truth.key_times;
    if keys.is_empty() {
        return Err(AnalysisError::EmptyTruth);
    }
    let span_end = |t: Cycle| t + truth.hold_max + window;
    let mut per_key: Vec<Vec<Cycle>> = vec![Vec::new(); keys.len()];
    for &d in detected {
        // keys are sorted, so the claiming keys are contiguous around d
        let first = keys.partition_point(|t| span_end(*t) < d);
        let last = keys.partition_point(|t| t.saturating_sub(window) <= d);
        let mut best: Option<(u64, usize)> = None;
        let mut tie = false;
        for (k, &key) in keys.iter().enumerate().take(last).skip(first) {
            let dist = if d < key { key - d } else { d.0.saturating_sub((key + truth.hold_max).0) };
            match best {
                Some((bd, _)) if dist == bd => tie = true,
                Some((bd, _)) if dist > bd => {}
                _ => {
                    best = Some((dist, k));
                    tie = false;
                }
            }
        }
        if let (Some((_, k)), false) = (best, tie) {
            per_key[k].push(d);
        }
    }
    let mut matched = 0;
    let mut delays = Vec::new();
    for (k, ds) in per_key.iter().enumerate() {
        matched += ds.len().min(2) as u64;
        if let Some(first) = ds.first() {
            delays.push((first.0 as f64 - keys[k].0 as f64) / cycles_per_us as f64);
        }
    }
    Ok(MatchReport::new(2 * keys.len() as u64, detected.len() as u64, matched, &mut delays))
}

/// One-to-one scoring of detections against individual events: a detection
/// matches the latest event at or before it, within `window`, if that event
/// is still unmatched. Everything else is a false positive.
pub fn match_events(detected: &[Cycle], truth: &[Cycle], window: Cycle, cycles_per_us: u64) -> MatchReport {
    let mut taken = vec![false; truth.len()];
    let mut delays = Vec::new();
    for &d in detected {
        let i = truth.partition_point(|t| *t <= d);
        if i == 0 {
            continue;
        }
        let e = i - 1;
        if !taken[e] && d - truth[e] <= window.0 {
            taken[e] = true;
            delays.push((d - truth[e]) as f64 / cycles_per_us as f64);
        }
    }
    let matched = delays.len() as u64;
    MatchReport::new(truth.len() as u64, detected.len() as u64, matched, &mut delays)
}
