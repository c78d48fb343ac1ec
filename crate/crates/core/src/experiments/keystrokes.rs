use rayon::prelude::*;
use serde::Serialize;

use super::{ExperimentError, ExperimentSpec, OutputFiles as Files};
use crate::analysis::{match_keystrokes, MatchReport};
use crate::attacks::monitor;
use crate::config::KeystrokeScenario;
use crate::core_sim::{Cycle, EventQueue};
use crate::seed;
use crate::workloads::{gen_keystrokes, install_background, write_keystroke_truth, KeystrokeTiming};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioReport {
    pub runs: Vec<MatchReport>,
    pub mean_recall: f64,
    pub mean_precision: f64,
    pub mean_f_score: f64,
    pub mean_delay_median_us: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KeystrokeReport {
    pub keys: usize,
    pub lab: ScenarioReport,
    pub realistic: ScenarioReport,
}

fn scenario(
    spec: &ExperimentSpec,
    name: &str,
    sc: &KeystrokeScenario,
) -> Result<(ScenarioReport, Files), ExperimentError> {
    let p = &spec.config.keystrokes;
    let cpu = spec.config.cycles_per_us;
    let timing = KeystrokeTiming {
        stdin_latency_us: sc.stdin_latency_us,
        stdin_latency_sd_us: sc.stdin_latency_sd_us,
        ..p.timing.clone()
    };
    let runs = (0..p.runs)
        .into_par_iter()
        .map(|r| {
            let typed =
                gen_keystrokes(p.keys, &timing, cpu, seed::indexed_seed(spec.seed, &format!("typing-{name}"), r));
            let mut core = spec.core(seed::indexed_seed(spec.seed, &format!("keystrokes-core-{name}"), r))?;
            let last = *typed.interrupts.last().expect("at least one key");
            let end = last + Cycle::from_us(100_000.0, cpu);
            let mut queue = EventQueue::new();
            queue.push_interrupts(p.xhci_vector, typed.interrupts.iter().copied());
            let bg_seed = seed::indexed_seed(spec.seed, &format!("keystrokes-background-{name}"), r);
            install_background(&mut core, &mut queue, &sc.background, Cycle::ZERO, end, bg_seed)?;
            let trace = monitor(&mut core, &mut queue, p.xhci_vector, end)?;
            let window = Cycle::from_us(p.match_window_us, cpu);
            let report = match_keystrokes(&trace.times, &typed.script, window, cpu)?;

            let mut truth = Vec::new();
            write_keystroke_truth(&typed.script, &mut truth)?;
            let mut det = Vec::new();
            trace.write_csv(&mut det).expect("in-memory write");
            let files = vec![
                (format!("keystrokes_{name}_run{r}_truth.csv"), truth),
                (format!("keystrokes_{name}_run{r}_detections.csv"), det),
            ];
            Ok((report, files))
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    let n = runs.len().max(1) as f64;
    let mean = |f: fn(&MatchReport) -> f64| runs.iter().map(|(r, _)| f(r)).sum::<f64>() / n;
    let report = ScenarioReport {
        mean_recall: mean(|r| r.recall),
        mean_precision: mean(|r| r.precision),
        mean_f_score: mean(|r| r.f_score),
        mean_delay_median_us: mean(|r| r.delay_median_us),
        runs: runs.iter().map(|(r, _)| r.clone()).collect(),
    };
    Ok((report, runs.into_iter().flat_map(|(_, f)| f).collect()))
}

/// Keystroke timing recovered from xHCI interrupts, on a quiet machine and
/// on a loaded one.
pub fn run_keystrokes(spec: &ExperimentSpec) -> Result<(KeystrokeReport, Files), ExperimentError> {
    let p = &spec.config.keystrokes;
    if p.runs == 0 || p.keys == 0 {
        return Err(ExperimentError::Usage("keystrokes needs at least one run and one key".into()));
    }
    let (lab, mut files) = scenario(spec, "lab", &p.lab)?;
    let (realistic, more) = scenario(spec, "realistic", &p.realistic)?;
    files.extend(more);
    Ok((KeystrokeReport { keys: p.keys, lab, realistic }, files))
}
