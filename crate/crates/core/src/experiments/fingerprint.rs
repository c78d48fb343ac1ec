use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use super::{ExperimentError, ExperimentSpec, OutputFiles};
use crate::analysis::{bin_website_trace, confusion_and_pr, train_forest, ConfusionReport, Dataset, ForestParams};
use crate::attacks::monitor;
use crate::core_sim::{Cycle, EventQueue};
use crate::seed;
use crate::workloads::{
    gen_profile_library, gen_website_trace, install_background, read_profiles, WebsiteProfile, WEBSITE_BINS,
    WEBSITE_BIN_US,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FingerprintReport {
    pub profiles: usize,
    pub traces_per_profile: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub class_names: Vec<String>,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    /// Mean LeakIDT detections per trace.
    pub mean_detections: f64,
}

fn load_profiles(spec: &ExperimentSpec) -> Result<Vec<WebsiteProfile>, ExperimentError> {
    let p = &spec.config.fingerprint;
    match &p.profile_library {
        Some(path) => {
            let file = std::fs::File::open(path).map_err(|_| ExperimentError::ProfileLibraryMissing(path.clone()))?;
            let mut profiles = read_profiles(file)?;
            profiles.truncate(p.profiles);
            Ok(profiles)
        }
        None => Ok(gen_profile_library(
            p.profiles,
            p.separability,
            p.dispersion,
            seed::sub_seed(spec.seed, &["fingerprint", "profiles"]),
        )),
    }
}

/// Monitors the NIC vector while each profile loads, bins the detections
/// and trains a random forest to tell the profiles apart.
pub fn run_fingerprint(spec: &ExperimentSpec) -> Result<(FingerprintReport, OutputFiles), ExperimentError> {
    let p = &spec.config.fingerprint;
    let profiles = load_profiles(spec)?;
    if p.traces_per_profile < 2 {
        return Err(ExperimentError::Usage("need at least two traces per profile".into()));
    }
    let per_train = ((p.traces_per_profile as f64) * p.train_fraction).round() as usize;
    if per_train == 0 || per_train >= p.traces_per_profile {
        return Err(ExperimentError::Usage("train fraction leaves an empty train or test split".into()));
    }
    let cpu = spec.config.cycles_per_us;
    let lead = Cycle(10 * spec.config.costs.probe_cost);
    let span = Cycle(WEBSITE_BINS as u64 * WEBSITE_BIN_US * cpu);
    let n = p.traces_per_profile;

    let traces = (0..profiles.len() * n)
        .into_par_iter()
        .map(|i| {
            let idx = i as u64;
            let mut core = spec.core(seed::indexed_seed(spec.seed, "fingerprint-core", idx))?;
            let load =
                gen_website_trace(&profiles[i / n], cpu, seed::indexed_seed(spec.seed, "fingerprint-trace", idx));
            let mut queue = EventQueue::new();
            queue.push_interrupts(p.nic_vector, load.into_iter().map(|t| t + lead));
            let end = lead + span;
            let bg_seed = seed::indexed_seed(spec.seed, "fingerprint-background", idx);
            install_background(&mut core, &mut queue, &p.background, Cycle::ZERO, end, bg_seed)?;
            let trace = monitor(&mut core, &mut queue, p.nic_vector, end)?;
            Ok(bin_website_trace(&trace.times, lead, cpu))
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    let mean_detections = traces.iter().map(|t| t.iter().map(|&c| c as u64).sum::<u64>()).sum::<u64>() as f64
        / traces.len().max(1) as f64;

    let names: Vec<String> = profiles.iter().map(|p| p.label.clone()).collect();
    let mut all = Dataset::new(names.clone());
    let mut train = Dataset::new(names.clone());
    let mut test = Dataset::new(names.clone());
    let mut rng = seed::rng(seed::sub_seed(spec.seed, &["fingerprint", "split"]));
    for class in 0..profiles.len() {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        for (k, j) in order.into_iter().enumerate() {
            let row = traces[class * n + j].clone();
            all.push(class, row.clone());
            if k < per_train {
                train.push(class, row);
            } else {
                test.push(class, row);
            }
        }
    }
    let params = ForestParams { n_trees: p.n_trees, max_depth: p.max_depth, ..ForestParams::default() };
    let model = train_forest(&train, &params, seed::sub_seed(spec.seed, &["fingerprint", "forest"]))?;
    let predicted: Vec<usize> = test.rows.iter().map(|r| model.predict(r)).collect();
    let confusion: ConfusionReport = confusion_and_pr(&test.labels, &predicted, &names)?;

    let mut confusion_csv = Vec::new();
    confusion.write_csv(&mut confusion_csv)?;
    let mut dataset_csv = Vec::new();
    all.write_csv(&mut dataset_csv)?;
    let report = FingerprintReport {
        profiles: profiles.len(),
        traces_per_profile: n,
        n_train: train.len(),
        n_test: test.len(),
        accuracy: confusion.micro_precision,
        macro_precision: confusion.macro_precision,
        macro_recall: confusion.macro_recall,
        class_names: names,
        precision: confusion.precision,
        recall: confusion.recall,
        mean_detections,
    };
    Ok((report, vec![("confusion.csv".into(), confusion_csv), ("dataset.csv".into(), dataset_csv)]))
}
