//! Turning detection traces into numbers: binning, a random-forest
//! classifier, confusion matrices, ground-truth matching and detection
//! curves.

mod curve;
mod forest;
mod matching;
mod metrics;

pub use curve::{detection_curve, CurvePoint};
pub use forest::{train_forest, DecisionTree, ForestParams, Node, RandomForestModel};
pub use matching::{match_events, match_keystrokes, MatchReport};
pub use metrics::{confusion_and_pr, ConfusionReport};

use std::io::{Read, Write};

use thiserror::Error;

use crate::core_sim::Cycle;
use crate::workloads::{WEBSITE_BINS, WEBSITE_BIN_US};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("degenerate dataset: {0}")]
    DegenerateDataset(String),
    #[error("length mismatch: {0} labels vs {1} predictions")]
    LengthMismatch(usize, usize),
    #[error("ground truth is empty")]
    EmptyTruth,
    #[error("model format: {0}")]
    ModelFormat(String),
    #[error("dataset format: {0}")]
    DatasetFormat(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Detections per 5 ms bin over the 2 s after `start`.
pub type FeatureVector = Vec<u32>;

/// Counts `times` into `n_bins` bins of `bin_us` starting at `start`;
/// events outside the span are dropped.
pub fn bin_trace(times: &[Cycle], start: Cycle, cycles_per_us: u64, bin_us: u64, n_bins: usize) -> FeatureVector {
    let width = bin_us * cycles_per_us;
    let mut bins = vec![0u32; n_bins];
    for t in times {
        if *t < start {
            continue;
        }
        let b = ((*t - start) / width) as usize;
        if b < n_bins {
            bins[b] += 1;
        }
    }
    bins
}

/// [`bin_trace`] with the website-fingerprinting layout (400 × 5 ms).
pub fn bin_website_trace(times: &[Cycle], start: Cycle, cycles_per_us: u64) -> FeatureVector {
    bin_trace(times, start, cycles_per_us, WEBSITE_BIN_US, WEBSITE_BINS)
}

/// Labelled feature vectors. Labels index into `class_names`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub class_names: Vec<String>,
    pub labels: Vec<usize>,
    pub rows: Vec<FeatureVector>,
}

impl Dataset {
    pub fn new(class_names: Vec<String>) -> Self {
        Self { class_names, labels: Vec::new(), rows: Vec::new() }
    }

    pub fn push(&mut self, label: usize, row: FeatureVector) {
        assert!(label < self.class_names.len(), "label out of range");
        self.labels.push(label);
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// CSV `label,bin0..binN` with class names as labels.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), AnalysisError> {
        let width = self.rows.first().map_or(WEBSITE_BINS, Vec::len);
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["label".to_string()];
        header.extend((0..width).map(|i| format!("bin{i}")));
        w.write_record(&header)?;
        for (label, row) in self.labels.iter().zip(&self.rows) {
            let mut rec = vec![self.class_names[*label].clone()];
            rec.extend(row.iter().map(u32::to_string));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a CSV written by [`Dataset::write_csv`]; classes are numbered
    /// in order of first appearance.
    pub fn read_csv<R: Read>(input: R) -> Result<Self, AnalysisError> {
        let mut rdr = csv::Reader::from_reader(input);
        let header = rdr.headers()?.clone();
        if header.get(0) != Some("label") || header.iter().skip(1).enumerate().any(|(i, h)| h != format!("bin{i}")) {
            return Err(AnalysisError::DatasetFormat("header must be label,bin0..binN".into()));
        }
        let mut data = Dataset::default();
        for rec in rdr.records() {
            let rec = rec?;
            let name = &rec[0];
            let label = match data.class_names.iter().position(|c| c == name) {
                Some(i) => i,
                None => {
                    data.class_names.push(name.to_string());
                    data.class_names.len() - 1
                }
            };
            let row = rec
                .iter()
                .skip(1)
                .map(|v| v.parse::<u32>().map_err(|e| AnalysisError::DatasetFormat(format!("{v:?}: {e}"))))
                .collect::<Result<Vec<_>, _>>()?;
            data.push(label, row);
        }
        Ok(data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binning_conserves_in_range_events() {
        let cpu = 3_000;
        let bin = WEBSITE_BIN_US * cpu;
        let times = [Cycle(10), Cycle(bin), Cycle(bin + 1), Cycle(399 * bin + 5), Cycle(400 * bin)];
        let v = bin_website_trace(&times, Cycle(0), cpu);
        assert_eq!(v.len(), 400);
        assert_eq!(v[0], 1);
        assert_eq!(v[1], 2);
        assert_eq!(v[399], 1);
        assert_eq!(v.iter().sum::<u32>(), 4);
    }

    #[test]
    fn empty_trace_is_all_zero() {
        assert!(bin_website_trace(&[], Cycle(0), 3_000).iter().all(|b| *b == 0));
    }

    #[test]
    fn dataset_csv_round_trip() {
        let mut d = Dataset::new(vec!["x".into(), "y".into()]);
        d.push(1, vec![1, 2, 3]);
        d.push(0, vec![0, 0, 9]);
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("label,bin0,bin1,bin2\ny,1,2,3\n"));
        let back = Dataset::read_csv(buf.as_slice()).unwrap();
        // classes renumbered by first appearance
        assert_eq!(back.class_names, vec!["y", "x"]);
        assert_eq!(back.rows, d.rows);
        assert_eq!(back.labels, vec![0, 1]);
    }
}
