//! End-to-end optimisation of one program.

use std::time::Instant;

use crate::analysis::{solve, DataflowResult};
use crate::frg::{build_frg, Frg};
use crate::ir::Program;
use crate::partition::{greedy_partition_with, GreedyOptions, PageAssignment, PartitionError};
use crate::psi::{insert_psi, naive_placement, CapacityError, OptimizedProgram};
use crate::report::{make_report, Report, Timings};

#[derive(Clone, Copy, Debug, Default)]
pub struct PipelineOptions {
    pub conservative_size: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error("{source}{hint}")]
    Capacity { source: CapacityError, hint: &'static str },
}

pub struct PipelineOutput {
    pub dataflow: DataflowResult,
    pub frg: Frg,
    /// Greedy page assignment (the free-space figures are the greedy's own).
    pub assignment: PageAssignment,
    pub optimized: OptimizedProgram,
    /// `None` when first-fit cannot place the naive program.
    pub naive: Option<OptimizedProgram>,
    pub report: Report,
}

fn ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Runs analysis, FRG construction, greedy partitioning and PSI insertion,
/// plus the naive baseline for comparison.
pub fn optimize(p: &Program, name: &str, opts: &PipelineOptions) -> Result<PipelineOutput, PipelineError> {
    let mut timings = Timings::default();

    let t = Instant::now();
    let dataflow = solve(p);
    timings.analysis = ms(t);

    let t = Instant::now();
    let frg = build_frg(p, &dataflow);
    timings.frg = ms(t);

    let t = Instant::now();
    let greedy_opts = GreedyOptions {
        conservative_size: opts.conservative_size,
    };
    let assignment = greedy_partition_with(&frg, p, greedy_opts, |_| {})?;
    timings.partition = ms(t);

    let t = Instant::now();
    let optimized = insert_psi(p, &assignment, &dataflow).map_err(|source| PipelineError::Capacity {
        source,
        hint: if opts.conservative_size {
            ""
        } else {
            " (the partitioner credited pages with PSIs that were not saved; retry with --conservative-size)"
        },
    })?;
    timings.psi = ms(t);

    let t = Instant::now();
    let naive = naive_placement(p).ok();
    timings.naive = ms(t);

    let report = make_report(name, naive.as_ref(), &optimized, &frg, &assignment, timings);
    Ok(PipelineOutput {
        dataflow,
        frg,
        assignment,
        optimized,
        naive,
        report,
    })
}
