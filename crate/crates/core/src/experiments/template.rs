use rayon::prelude::*;
use serde::Serialize;

use super::{ExperimentError, ExperimentSpec};
use crate::attacks::{template_idt, AttackError, TemplateOutcome};
use crate::core_sim::Cycle;
use crate::mem_model::block_start;
use crate::seed;
use crate::workloads::InterruptSource;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TemplateRun {
    pub run: u64,
    /// `None` when no line reacted.
    pub block_start: Option<u8>,
    pub vector: Option<u8>,
    pub exact: bool,
    pub block_correct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TemplateReport {
    pub induced_vector: u8,
    pub runs: Vec<TemplateRun>,
    pub block_hits: u64,
    pub hit_rate: f64,
    /// Per-line counts of the first run, for plotting.
    pub first_run: Option<TemplateOutcome>,
}

pub fn run_template(spec: &ExperimentSpec) -> Result<TemplateReport, ExperimentError> {
    let p = &spec.config.template;
    if p.runs == 0 {
        return Err(ExperimentError::Usage("template needs at least one run".into()));
    }
    let window = Cycle(spec.config.us(p.window_us as f64));
    let induce = InterruptSource::poisson(p.induced_vector, p.induced_rate_hz);
    let outcomes = (0..p.runs)
        .into_par_iter()
        .map(|r| {
            let run_seed = seed::indexed_seed(spec.seed, "template-run", r);
            let mut core = spec.core(run_seed)?;
            match template_idt(&mut core, &p.background, &induce, window, run_seed) {
                Ok(o) => Ok(Some(o)),
                Err(AttackError::NoDistinctEntry) => Ok(None),
                Err(e) => Err(e.into()),
            }
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    let expected = block_start(p.induced_vector);
    let runs: Vec<TemplateRun> = outcomes
        .iter()
        .enumerate()
        .map(|(r, o)| TemplateRun {
            run: r as u64,
            block_start: o.as_ref().map(|o| o.block_start),
            vector: o.as_ref().map(|o| o.vector),
            exact: o.as_ref().is_some_and(|o| o.exact),
            block_correct: o.as_ref().is_some_and(|o| o.block_start == expected),
        })
        .collect();
    let block_hits = runs.iter().filter(|r| r.block_correct).count() as u64;
    Ok(TemplateReport {
        induced_vector: p.induced_vector,
        block_hits,
        hit_rate: block_hits as f64 / p.runs as f64,
        runs,
        first_run: outcomes.into_iter().next().flatten(),
    })
}
