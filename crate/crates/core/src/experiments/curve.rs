use serde::Serialize;

use super::{ExperimentError, ExperimentSpec};
use crate::analysis::{detection_curve, CurvePoint};
use crate::core_sim::Core;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveReport {
    pub vector: u8,
    pub n_interrupts: u64,
    pub points: Vec<CurvePoint>,
    /// Smallest spacing from which LeakIDT misses at most 0.5 % at every
    /// larger spacing too.
    pub knee_spacing: Option<u64>,
}

impl CurveReport {
    /// `spacing_cycles,missed_leakidt,missed_pp`
    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["spacing_cycles", "missed_leakidt", "missed_pp"]).expect("in-memory write");
        for p in &self.points {
            w.serialize((p.spacing, p.missed_leakidt, p.missed_pp)).expect("in-memory write");
        }
        w.into_inner().expect("in-memory write")
    }
}

pub fn run_curve(spec: &ExperimentSpec) -> Result<CurveReport, ExperimentError> {
    let p = &spec.config.curve;
    if p.spacings.is_empty() {
        return Err(ExperimentError::Usage("curve needs at least one spacing".into()));
    }
    if p.spacings.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ExperimentError::Usage("curve spacings must be strictly ascending".into()));
    }
    let points = detection_curve(
        |spacing| {
            let mut core = Core::new(&spec.config, seed::indexed_seed(spec.seed, "curve-core", spacing))?;
            if spec.mitigate {
                core.install_uncachable_idt()?;
            }
            Ok(core)
        },
        &p.spacings,
        p.n_interrupts,
        p.vector,
    )?;
    let limit = p.n_interrupts as f64 * 0.005;
    let knee_spacing = points
        .iter()
        .rposition(|pt| pt.missed_leakidt as f64 > limit)
        .map_or(Some(0), |i| Some(i + 1))
        .and_then(|i| points.get(i).map(|pt| pt.spacing));
    Ok(CurveReport { vector: p.vector, n_interrupts: p.n_interrupts, points, knee_spacing })
}
