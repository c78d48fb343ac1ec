use std::io::Write;

use serde::Serialize;

use super::AnalysisError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfusionReport {
    pub class_names: Vec<String>,
    /// `matrix[true][predicted]`.
    pub matrix: Vec<Vec<u64>>,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    /// Single-label micro averages; both equal accuracy.
    pub micro_precision: f64,
    pub micro_recall: f64,
}

/// Per-class precision and recall. A class never predicted has precision 0.
/// Macro averages run over every class.
pub fn confusion_and_pr(
    y_true: &[usize],
    y_pred: &[usize],
    class_names: &[String],
) -> Result<ConfusionReport, AnalysisError> {
    if y_true.len() != y_pred.len() {
        return Err(AnalysisError::LengthMismatch(y_true.len(), y_pred.len()));
    }
    let k = class_names.len();
    let mut matrix = vec![vec![0u64; k]; k];
    for (t, p) in y_true.iter().zip(y_pred) {
        matrix[*t][*p] += 1;
    }
    let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let precision: Vec<f64> = (0..k).map(|c| ratio(matrix[c][c], (0..k).map(|t| matrix[t][c]).sum())).collect();
    let recall: Vec<f64> = (0..k).map(|c| ratio(matrix[c][c], matrix[c].iter().sum())).collect();
    let mean = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
    let correct: u64 = (0..k).map(|c| matrix[c][c]).sum();
    let accuracy = ratio(correct, y_true.len() as u64);
    Ok(ConfusionReport {
        class_names: class_names.to_vec(),
        macro_precision: mean(&precision),
        macro_recall: mean(&recall),
        micro_precision: accuracy,
        micro_recall: accuracy,
        matrix,
        precision,
        recall,
    })
}

impl ConfusionReport {
    /// Square CSV: header `true\predicted,<classes>`, one row per true class.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), AnalysisError> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["true\\predicted".to_string()];
        header.extend(self.class_names.iter().cloned());
        w.write_record(&header)?;
        for (name, row) in self.class_names.iter().zip(&self.matrix) {
            let mut rec = vec![name.clone()];
            rec.extend(row.iter().map(u64::to_string));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}
