//! Website fingerprinting from network-interrupt timing: synthetic page-load
//! profiles, LeakIDT traces, a random forest. Writes the confusion matrix,
//! the dataset and the trained model to `fingerprint-out/`.
//!
//! ```bash
//! cargo run --release --example fingerprint
//! ```

use std::fs;

use idtsim::analysis::{train_forest, Dataset, ForestParams};
use idtsim::experiments::{run_fingerprint, ExperimentName, ExperimentSpec};
use idtsim::SimConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut config = SimConfig::default();
    config.fingerprint.profiles = 8;
    config.fingerprint.traces_per_profile = 40;
    let (r, files) = run_fingerprint(&ExperimentSpec::new(ExperimentName::Fingerprint, config, 5))?;
    println!("macro precision {:.3}, accuracy {:.3} on {} held-out traces", r.macro_precision, r.accuracy, r.n_test);

    let out = std::path::Path::new("fingerprint-out");
    fs::create_dir_all(out)?;
    for (name, bytes) in &files {
        fs::write(out.join(name), bytes)?;
    }
    // the dataset file is enough to retrain offline
    let data = Dataset::read_csv(fs::File::open(out.join("dataset.csv"))?)?;
    let model = train_forest(&data, &ForestParams { n_trees: 20, ..Default::default() }, 5)?;
    fs::write(out.join("model.txt"), model.serialize())?;
    println!("wrote {} files to {}", files.len() + 1, out.display());
    Ok(())
}
