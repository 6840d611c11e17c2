//! `pagesel`: batch driver for page selection optimisation.
//!
//! Exit codes: 0 success, 1 usage or I/O error, 2 analysis or capacity
//! error, 3 verification failure.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "pagesel",
    version,
    about = "Minimise page selection instructions by function partitioning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Overrides for the program header.
#[derive(Args, Clone, Debug, Default)]
pub struct ConfigArgs {
    /// Number of program memory pages.
    #[arg(long)]
    pub pages: Option<u32>,
    /// Words per page.
    #[arg(long)]
    pub page_size: Option<u32>,
    /// Words per inserted PSI.
    #[arg(long)]
    pub psi_cost: Option<u32>,
    /// Weight credited per avoidable PSI site (decimal or n/d).
    #[arg(long)]
    pub prevalue: Option<String>,
    /// Accept `psi` instructions in the input.
    #[arg(long)]
    pub allow_psi: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ObjectiveArg {
    Residual,
    Psi,
}

#[derive(Subcommand)]
enum Command {
    /// Dump Gen/Kill/In/Out per block and the VOP before every instruction.
    Analyze {
        file: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Print the nonzero edges of the function relation graph.
    Frg {
        file: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Assign functions to pages and print the FuncPage table.
    Partition {
        file: PathBuf,
        /// Enumerate all assignments (at most 10 functions and 3 pages).
        #[arg(long)]
        exhaustive: bool,
        /// Objective for --exhaustive.
        #[arg(long, value_enum, default_value = "residual")]
        objective: ObjectiveArg,
        /// Charge every placement its full pessimistic size.
        #[arg(long)]
        conservative_size: bool,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Partition, insert PSIs, and write the optimised IR and a JSON report.
    Optimize {
        file: PathBuf,
        /// Output IR path (stdout when omitted).
        #[arg(short = 'o', long)]
        output: Option<PathBuf>,
        /// JSON report path.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        conservative_size: bool,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Run naive and optimised images over seeded decision streams and
    /// compare their traces.
    Verify {
        file: PathBuf,
        /// Number of decision streams.
        #[arg(long, default_value_t = 100)]
        seeds: u64,
        /// Step bound per run.
        #[arg(long, default_value_t = 100_000)]
        steps: u64,
        /// Base seed for the decision streams.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Treat the input as already optimised and lay it out with this
        /// FuncPage table (`name page` lines) instead of running the optimiser.
        #[arg(long)]
        assignment: Option<PathBuf>,
        #[arg(long)]
        conservative_size: bool,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Generate seeded random programs.
    ///
    /// Function i only calls functions j > i; functions are grouped into one
    /// cluster per page and calls stay in-cluster with probability --cluster.
    /// Defaults: --funcs 4-16 --blocks 2-6 --pages 2-4 --call-density 0.35
    /// --goto-density 0.5 --cluster 0.7.
    Gen {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Number of programs; more than one requires --out-dir.
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Function count range, `N` or `MIN-MAX`.
        #[arg(long, default_value = "4-16")]
        funcs: String,
        /// Blocks per function, `N` or `MIN-MAX`.
        #[arg(long, default_value = "2-6")]
        blocks: String,
        /// Page count range, `N` or `MIN-MAX`.
        #[arg(long, default_value = "2-4")]
        pages: String,
        /// Fixed page size (automatic when omitted).
        #[arg(long)]
        page_size: Option<u32>,
        #[arg(long, default_value_t = 1)]
        psi_cost: u32,
        /// Probability that an instruction slot is a call.
        #[arg(long, default_value_t = 0.35)]
        call_density: f64,
        /// Probability that a block ends in an explicit branch.
        #[arg(long, default_value_t = 0.5)]
        goto_density: f64,
        /// Probability that a call stays inside the caller's cluster.
        #[arg(long, default_value_t = 0.7)]
        cluster: f64,
        /// Only forward branches.
        #[arg(long)]
        acyclic: bool,
        /// Approximate total size in words.
        #[arg(long)]
        target_words: Option<u64>,
    },
    /// Merge per-program JSON reports into a corpus summary.
    Report {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        #[arg(short = 'o', long)]
        output: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Analyze { file, config } => commands::analyze(&file, &config),
        Command::Frg { file, config } => commands::frg(&file, &config),
        Command::Partition {
            file,
            exhaustive,
            objective,
            conservative_size,
            config,
        } => commands::partition(&file, &config, exhaustive, objective, conservative_size),
        Command::Optimize {
            file,
            output,
            report,
            conservative_size,
            config,
        } => commands::optimize(&file, &config, output.as_deref(), report.as_deref(), conservative_size),
        Command::Verify {
            file,
            seeds,
            steps,
            seed,
            assignment,
            conservative_size,
            config,
        } => commands::verify(
            &file,
            &config,
            seeds,
            steps,
            seed,
            assignment.as_deref(),
            conservative_size,
        ),
        Command::Gen {
            seed,
            count,
            out_dir,
            funcs,
            blocks,
            pages,
            page_size,
            psi_cost,
            call_density,
            goto_density,
            cluster,
            acyclic,
            target_words,
        } => commands::GenArgs {
            seed,
            count,
            out_dir,
            funcs,
            blocks,
            pages,
            page_size,
            psi_cost,
            call_density,
            goto_density,
            cluster,
            acyclic,
            target_words,
        }
        .run(),
        Command::Report { reports, output } => commands::report(&reports, output.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
