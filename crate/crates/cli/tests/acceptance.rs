//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use pagesel::analysis::{oracle_vop_paths, solve_observed};
use pagesel::gen::{generate_corpus, GenSpec};
use pagesel::partition::{greedy_partition_with, saved_weight, GreedyOptions};
use pagesel::pipeline::PipelineError;
use pagesel::psi::code_size;
use pagesel::vm::{layout, verify_streams};
use pagesel::{
    build_frg, exhaustive_partition, insert_psi, naive_placement, optimize, parse_program, residual_cost, solve,
    DataflowResult, Instr, Objective, PipelineOptions, PipelineOutput, Program,
};

const CORPUS_SEED: u64 = 42;
const CORPUS_SIZE: usize = 200;
const CORPUS_BUDGET: Duration = Duration::from_secs(30);
const ORACLE_INSTANCES: usize = 100;
const ORACLE_BUDGET: Duration = Duration::from_secs(10);
const PARTITION_INSTANCES: usize = 200;
const STREAMS: u64 = 100;
const MAX_STEPS: u64 = 100_000;
const SOUNDNESS_BUDGET: Duration = Duration::from_secs(60);
const GROWTH_LIMIT: f64 = 5.0;
const SCALE_WORDS: u64 = 50_000;
const SCALE_BUDGET: Duration = Duration::from_secs(5);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn corpus_spec() -> GenSpec {
    GenSpec {
        seed: CORPUS_SEED,
        funcs: 4..=16,
        pages: 2..=4,
        cluster_factor: 0.7,
        ..GenSpec::default()
    }
}

fn corpus() -> Vec<(String, Program)> {
    generate_corpus(&corpus_spec(), CORPUS_SIZE)
        .expect("corpus generates")
        .into_iter()
        .map(|(name, text)| (name, parse_program(&text).expect("corpus parses")))
        .collect()
}

/// Default pipeline, falling back to conservative sizing when the optimistic
/// credit overfills a page. Returns the output and whether it fell back.
fn optimize_with_fallback(p: &Program, name: &str) -> Option<(PipelineOutput, bool)> {
    match optimize(p, name, &PipelineOptions::default()) {
        Ok(out) => Some((out, false)),
        Err(PipelineError::Capacity { .. }) => optimize(
            p,
            name,
            &PipelineOptions {
                conservative_size: true,
            },
        )
        .ok()
        .map(|out| (out, true)),
        Err(_) => None,
    }
}

fn criterion_1(corpus: &[(String, Program)], outputs: &[Option<(PipelineOutput, bool)>], elapsed: Duration) -> Outcome {
    let mut feasible = 0;
    let mut violations = Vec::new();
    let mut fallbacks = 0;
    let mut ratios = Vec::new();
    for ((name, _), out) in corpus.iter().zip(outputs) {
        let Some((out, fell_back)) = out else { continue };
        let Some(s_naive) = out.report.s_naive else { continue };
        feasible += 1;
        fallbacks += *fell_back as usize;
        ratios.push(out.report.ratio.unwrap());
        if out.report.s_opt > s_naive {
            violations.push(name.clone());
        }
    }
    let mut fixture_failures = Vec::new();
    for name in ["fig2.ir", "chain.ir", "diamond.ir", "loop.ir", "recursion.ir"] {
        let text = std::fs::read_to_string(fixtures_dir().join(name)).unwrap();
        let p = parse_program(&text).unwrap();
        match optimize(&p, name, &PipelineOptions::default()) {
            Ok(out) if out.report.s_naive.is_some_and(|n| out.report.s_opt < n) => {
                if name == "fig2.ir" && !fig2_pair_clean(&p, &out) {
                    fixture_failures.push(format!("{name}: f/g pair not co-located without PSIs"));
                }
            }
            Ok(out) => fixture_failures.push(format!("{name}: {} vs {:?}", out.report.s_opt, out.report.s_naive)),
            Err(e) => fixture_failures.push(format!("{name}: {e}")),
        }
    }
    let mean = ratios.iter().sum::<f64>() / ratios.len().max(1) as f64;
    let pass = violations.is_empty() && fixture_failures.is_empty() && elapsed < CORPUS_BUDGET && feasible > 0;
    outcome(
        pass,
        format!(
            "{feasible}/{} feasible ({} via conservative sizing), S_opt <= S_naive on all but {:?}; fixtures strict: {}; mean ratio {mean:.4}; {:.2}s < {}s",
            corpus.len(),
            fallbacks,
            violations,
            if fixture_failures.is_empty() { "yes".to_string() } else { fixture_failures.join("; ") },
            elapsed.as_secs_f64(),
            CORPUS_BUDGET.as_secs()
        ),
    )
}

fn fig2_pair_clean(p: &Program, out: &PipelineOutput) -> bool {
    let f = p.func_by_name("f").unwrap();
    let g = p.func_by_name("g").unwrap();
    let same_page = out.assignment.page_of(f) == out.assignment.page_of(g);
    let psi_in_f = out.optimized.psi_sites.iter().filter(|s| s.func == f).count();
    let calls_g = p.function(f).instrs().any(|i| *i == Instr::Call(g));
    same_page && psi_in_f == 0 && calls_g
}

fn criterion_2() -> Outcome {
    let spec = GenSpec {
        seed: 7,
        funcs: 1..=10,
        blocks: 1..=8,
        pages: 2..=4,
        acyclic: true,
        ..GenSpec::default()
    };
    let start = Instant::now();
    let mut mismatches = Vec::new();
    let mut positions = 0usize;
    for (name, text) in generate_corpus(&spec, ORACLE_INSTANCES).unwrap() {
        let p = parse_program(&text).unwrap();
        let oracle = match oracle_vop_paths(&p) {
            Ok(o) => o,
            Err(e) => {
                mismatches.push(format!("{name}: {e}"));
                continue;
            }
        };
        let d = solve(&p);
        for f in p.func_ids() {
            for (b, block) in p.function(f).real_blocks() {
                let vops = d.block_vops(&p, f, b);
                for index in 0..block.instrs.len() {
                    let pos = pagesel::Pos {
                        func: f,
                        block: b,
                        index,
                    };
                    positions += 1;
                    if vops[index] != oracle.before[&pos] || vops[index + 1] != oracle.after[&pos] {
                        mismatches.push(format!("{name} at {pos}"));
                    }
                }
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        mismatches.is_empty() && elapsed < ORACLE_BUDGET,
        format!(
            "{ORACLE_INSTANCES} acyclic instances, {positions} positions, {} mismatches {:?}; {:.2}s < {}s",
            mismatches.len(),
            mismatches.iter().take(3).collect::<Vec<_>>(),
            elapsed.as_secs_f64(),
            ORACLE_BUDGET.as_secs()
        ),
    )
}

fn criterion_3(corpus: &[(String, Program)]) -> Outcome {
    let mut failures = Vec::new();
    let mut worst = 0.0f64;
    for (name, p) in corpus {
        let mut prev: Option<DataflowResult> = None;
        let mut monotone = true;
        let d = solve_observed(p, |_, state| {
            if let Some(prev) = &prev {
                let grew = |a: &Vec<Vec<pagesel::FuncSet>>, b: &Vec<Vec<pagesel::FuncSet>>| {
                    a.iter()
                        .zip(b)
                        .all(|(x, y)| x.iter().zip(y).all(|(s, t)| s.is_subset(t)))
                };
                monotone &= grew(&prev.in_, &state.in_) && grew(&prev.out, &state.out);
            }
            prev = Some(state.clone());
        });
        let mut identity = true;
        for f in p.func_ids() {
            for (b, block) in p.function(f).real_blocks() {
                if block.is_pntb() && d.out[f.index()][b.index()] != d.gen[f.index()][b.index()] {
                    identity = false;
                }
            }
        }
        let bound = DataflowResult::iteration_bound(p);
        worst = worst.max(d.iterations as f64 / bound as f64);
        if !monotone || !identity || d.iterations > bound {
            failures.push(format!(
                "{name}: monotone={monotone} identity={identity} passes={} bound={bound}",
                d.iterations
            ));
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "{} programs, {} failures {:?}; max passes/bound {:.3}",
            corpus.len(),
            failures.len(),
            failures.iter().take(3).collect::<Vec<_>>(),
            worst
        ),
    )
}

fn criterion_4() -> Outcome {
    let spec = GenSpec {
        seed: 4,
        funcs: 2..=7,
        blocks: 1..=4,
        pages: 2..=3,
        ..GenSpec::default()
    };
    let mut failures = Vec::new();
    let mut compared = 0;
    let mut skipped = 0;
    let mut strictly_better = 0;
    for (name, text) in generate_corpus(&spec, PARTITION_INSTANCES).unwrap() {
        let p = parse_program(&text).unwrap();
        let d = solve(&p);
        let frg = build_frg(&p, &d);
        let total = frg.total_weight();
        let naive_psi = code_size(&naive_placement(&p).unwrap()).psi_count;

        let ex_res = exhaustive_partition(&frg, &p, &d, Objective::ResidualWeight).unwrap();
        let ex_psi = exhaustive_partition(&frg, &p, &d, Objective::ActualPsiCount).unwrap();
        let ex_psi_count = insert_psi(&p, &ex_psi, &d).unwrap().psi_sites.len() as u64;

        let greedy = [false, true].into_iter().find_map(|conservative_size| {
            let a = greedy_partition_with(&frg, &p, GreedyOptions { conservative_size }, |_| {}).ok()?;
            let o = insert_psi(&p, &a, &d).ok()?;
            Some((a, o))
        });
        let Some((ga, go)) = greedy else {
            skipped += 1;
            continue;
        };
        compared += 1;
        let greedy_psi = go.psi_sites.len() as u64;
        let ex_r = residual_cost(&frg, &ex_res);
        let g_r = residual_cost(&frg, &ga);
        if ex_r < g_r {
            strictly_better += 1;
        }
        let conserved = [&ex_res, &ex_psi, &ga]
            .iter()
            .all(|a| residual_cost(&frg, a) + saved_weight(&frg, a) == total);
        if ex_r > g_r || ex_psi_count > greedy_psi || greedy_psi > naive_psi || !conserved {
            failures.push(format!(
                "{name}: residual {ex_r} vs {g_r}, psi {ex_psi_count} <= {greedy_psi} <= {naive_psi}, conserved={conserved}"
            ));
        }
    }
    outcome(
        failures.is_empty() && skipped == 0,
        format!(
            "{compared}/{PARTITION_INSTANCES} compared ({skipped} without a feasible greedy layout), {} failures {:?}; exhaustive strictly lower residual on {strictly_better}",
            failures.len(),
            failures.iter().take(3).collect::<Vec<_>>()
        ),
    )
}

fn criterion_5(corpus: &[(String, Program)], outputs: &[Option<(PipelineOutput, bool)>]) -> Outcome {
    let start = Instant::now();
    let mut runs = 0;
    let mut halted = 0;
    let mut problems = Vec::new();
    for ((name, _), out) in corpus.iter().zip(outputs) {
        let Some((out, _)) = out else { continue };
        let Some(naive) = &out.naive else { continue };
        let s = verify_streams(
            &layout(naive).unwrap(),
            &layout(&out.optimized).unwrap(),
            0,
            STREAMS,
            MAX_STEPS,
        );
        runs += s.runs;
        halted += s.halted;
        if !s.passed() {
            problems.push(format!(
                "{name}: {} faults, {} divergences",
                s.faults.len(),
                s.divergences.len()
            ));
        }
    }
    let elapsed = start.elapsed();
    outcome(
        problems.is_empty() && elapsed < SOUNDNESS_BUDGET && runs > 0,
        format!(
            "{runs} runs ({halted} halted before {MAX_STEPS} steps), {} failing programs {:?}; {:.2}s < {}s",
            problems.len(),
            problems.iter().take(3).collect::<Vec<_>>(),
            elapsed.as_secs_f64(),
            SOUNDNESS_BUDGET.as_secs()
        ),
    )
}

fn scaled_program(nof: usize) -> Program {
    let spec = GenSpec {
        seed: 6,
        funcs: nof..=nof,
        pages: 4..=4,
        target_words: Some(SCALE_WORDS),
        ..GenSpec::default()
    };
    let (_, text) = generate_corpus(&spec, 1).unwrap().remove(0);
    parse_program(&text).unwrap()
}

/// Median wall time of FRG construction plus greedy partitioning.
fn frg_partition_time(p: &Program, d: &DataflowResult) -> Duration {
    let mut samples: Vec<Duration> = (0..7)
        .map(|_| {
            let t = Instant::now();
            let frg = build_frg(p, d);
            let a = greedy_partition_with(
                &frg,
                p,
                GreedyOptions {
                    conservative_size: true,
                },
                |_| {},
            );
            std::hint::black_box((frg, a.ok()));
            t.elapsed()
        })
        .collect();
    samples.sort();
    samples[samples.len() / 2]
}

fn criterion_6() -> Outcome {
    let mut times = Vec::new();
    let mut sizes = Vec::new();
    let mut full64 = Duration::ZERO;
    for nof in [16, 32, 64] {
        let p = scaled_program(nof);
        sizes.push(p.base_size());
        let d = solve(&p);
        times.push(frg_partition_time(&p, &d));
        if nof == 64 {
            let t = Instant::now();
            let out = optimize(
                &p,
                "scale64",
                &PipelineOptions {
                    conservative_size: true,
                },
            );
            full64 = t.elapsed();
            std::hint::black_box(out.ok());
        }
    }
    let growth: Vec<f64> = times
        .windows(2)
        .map(|w| w[1].as_secs_f64() / w[0].as_secs_f64().max(1e-9))
        .collect();
    let pass = growth.iter().all(|&g| g <= GROWTH_LIMIT) && full64 < SCALE_BUDGET;
    outcome(
        pass,
        format!(
            "S = {:?} words; FRG+partition median {:?}; growth per doubling {:?} (<= {GROWTH_LIMIT}); NOF 64 full pipeline {:.3}s < {}s",
            sizes,
            times.iter().map(|t| format!("{:.3}ms", t.as_secs_f64() * 1e3)).collect::<Vec<_>>(),
            growth.iter().map(|g| format!("{g:.2}")).collect::<Vec<_>>(),
            full64.as_secs_f64(),
            SCALE_BUDGET.as_secs()
        ),
    )
}

fn run_cli(args: &[&std::ffi::OsStr]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_pagesel"))
        .args(args)
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

/// `optimize` then `report` into `dir`; returns the IR bytes and the report
/// documents with timings removed.
fn cli_round(dir: &Path, inputs: &[PathBuf]) -> Option<(Vec<Vec<u8>>, Vec<serde_json::Value>)> {
    let mut irs = Vec::new();
    let mut docs = Vec::new();
    let mut reports = Vec::new();
    for input in inputs {
        let stem = input.file_stem()?.to_string_lossy().into_owned();
        let ir = dir.join(format!("{stem}.opt.ir"));
        let rep = dir.join(format!("{stem}.json"));
        if !run_cli(&[
            "optimize".as_ref(),
            input.as_os_str(),
            "-o".as_ref(),
            ir.as_os_str(),
            "--report".as_ref(),
            rep.as_os_str(),
        ]) {
            return None;
        }
        irs.push(std::fs::read(&ir).ok()?);
        let mut doc: serde_json::Value = serde_json::from_slice(&std::fs::read(&rep).ok()?).ok()?;
        doc.as_object_mut()?.remove("timings_ms");
        docs.push(doc);
        reports.push(rep);
    }
    let summary = dir.join("summary.json");
    let mut args: Vec<&std::ffi::OsStr> = vec!["report".as_ref(), "-o".as_ref(), summary.as_os_str()];
    args.extend(reports.iter().map(|r| r.as_os_str()));
    if !run_cli(&args) {
        return None;
    }
    irs.push(std::fs::read(&summary).ok()?);
    Some((irs, docs))
}

fn criterion_7() -> Outcome {
    let work = tempfile::tempdir().unwrap();
    let gen_dir = work.path().join("gen");
    let ok = run_cli(&[
        "gen".as_ref(),
        "--seed".as_ref(),
        "42".as_ref(),
        "--count".as_ref(),
        "5".as_ref(),
        "--out-dir".as_ref(),
        gen_dir.as_os_str(),
    ]);
    if !ok {
        return outcome(false, "gen failed".into());
    }
    let mut inputs: Vec<PathBuf> = std::fs::read_dir(&gen_dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    inputs.sort();
    inputs.push(fixtures_dir().join("fig2.ir"));

    let rounds: Vec<_> = (0..2)
        .map(|i| {
            let dir = work.path().join(format!("run{i}"));
            std::fs::create_dir_all(&dir).unwrap();
            cli_round(&dir, &inputs)
        })
        .collect();
    match (&rounds[0], &rounds[1]) {
        (Some(a), Some(b)) => outcome(
            a == b,
            format!(
                "{} inputs optimized twice via the CLI; IR, reports (timings excluded) and summary {}",
                inputs.len(),
                if a == b { "byte-identical" } else { "differ" }
            ),
        ),
        _ => outcome(false, "a CLI invocation failed".into()),
    }
}

fn main() -> ExitCode {
    // Arguments such as `--nocapture` from cargo are ignored.
    let corpus = corpus();
    let start = Instant::now();
    let outputs: Vec<_> = corpus.iter().map(|(name, p)| optimize_with_fallback(p, name)).collect();
    let pipeline_time = start.elapsed();

    let results = [
        ("1 corpus size reduction", criterion_1(&corpus, &outputs, pipeline_time)),
        ("2 dataflow oracle equality", criterion_2()),
        ("3 PNTB identity, monotonicity, pass bound", criterion_3(&corpus)),
        ("4 partition oracle dominance", criterion_4()),
        ("5 soundness and trace equivalence", criterion_5(&corpus, &outputs)),
        ("6 complexity scaling", criterion_6()),
        ("7 CLI determinism", criterion_7()),
    ];
    let mut all = true;
    for (name, o) in &results {
        all &= o.pass;
        println!(
            "{} criterion {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
