//! Page selection instruction (PSI) minimisation for MCUs with paged program
//! memory.
//!
//! The pipeline has three steps followed by PSI insertion:
//!
//! 1. [`analysis`]: an interprocedural dataflow computing, at every program
//!    point, the set of functions whose page the PSR may currently encode.
//! 2. [`frg`]: a weighted function relation graph whose edge weights estimate
//!    the PSIs saved by placing two functions in the same page.
//! 3. [`partition`]: a greedy capacity-constrained partitioning of that graph
//!    into pages, with an exhaustive partitioner for small instances.
//! 4. [`psi`]: insertion of a PSI before each PNTI whose known page set
//!    differs from the required page, plus the naive one-PSI-per-PNTI baseline.
//!
//! [`vm`] executes laid-out images with PSR semantics to check the result,
//! [`report`] aggregates metrics and [`gen`] produces seeded random programs.

pub mod analysis;
pub mod frg;
pub mod gen;
pub mod ir;
pub mod partition;
pub mod pipeline;
pub mod psi;
pub mod report;
pub mod vm;
pub mod weight;

pub use analysis::{solve, DataflowResult, FuncSet};
pub use frg::{build_frg, Frg};
pub use ir::{parse_program, BlockId, Config, FuncId, Instr, Pos, Program};
pub use partition::{exhaustive_partition, greedy_partition, residual_cost, Objective, PageAssignment};
pub use pipeline::{optimize, PipelineOptions, PipelineOutput};
pub use psi::{insert_psi, naive_placement, OptimizedProgram};
pub use report::Report;
pub use weight::Weight;
