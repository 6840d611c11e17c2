use std::fs;
use std::io::Write as _;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use pagesel::analysis::solve;
use pagesel::gen::{generate, generate_corpus, GenSpec};
use pagesel::ir::{parse_program_with, ParseOptions};
use pagesel::partition::{greedy_partition_with, saved_weight, GreedyOptions};
use pagesel::report::summarize;
use pagesel::vm::{layout, verify_streams};
use pagesel::{
    build_frg, exhaustive_partition, naive_placement, optimize as run_pipeline, residual_cost, Objective,
    OptimizedProgram, PageAssignment, PipelineOptions, Program, Report, Weight,
};

use crate::{ConfigArgs, ObjectiveArg};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Analysis(String),
    #[error("{0}")]
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Io { .. } => 1,
            CliError::Analysis(_) => 2,
            CliError::Verification(_) => 3,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn analysis(e: impl std::fmt::Display) -> CliError {
    CliError::Analysis(e.to_string())
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn emit(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|source| CliError::Io {
            path: PathBuf::from("<stdout>"),
            source,
        })
}

/// Parses `path` and applies the header overrides. Without an explicit
/// prevalue, a psi_cost override also moves a defaulted prevalue.
fn load(path: &Path, cfg: &ConfigArgs) -> Result<Program> {
    let text = read(path)?;
    let opts = ParseOptions {
        allow_psi: cfg.allow_psi,
    };
    let mut p = parse_program_with(&text, &opts).map_err(|e| analysis(format!("{}:{e}", path.display())))?;
    let has_prevalue = text.lines().any(|l| l.trim_start().starts_with("prevalue"));
    if let Some(n) = cfg.pages {
        p.config.page_count = n;
    }
    if let Some(n) = cfg.page_size {
        p.config.page_size = n;
    }
    if let Some(n) = cfg.psi_cost {
        p.config.psi_cost = n;
        if !has_prevalue {
            p.config.prevalue = Weight::from_integer(n as u64);
        }
    }
    if let Some(v) = &cfg.prevalue {
        p.config.prevalue = Weight::from_str(v).map_err(|e| CliError::Usage(format!("--prevalue: {e}")))?;
    }
    p.config.validate().map_err(CliError::Usage)?;
    Ok(p)
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "program".to_string())
}

pub fn analyze(file: &Path, cfg: &ConfigArgs) -> Result<()> {
    let p = load(file, cfg)?;
    let d = solve(&p);
    let mut out = String::new();
    for f in p.func_ids() {
        let func = p.function(f);
        out += &format!("func {}\n", func.name);
        for (b, block) in func.blocks.iter().enumerate() {
            let (fi, bi) = (f.index(), b);
            out += &format!(
                "  block {} gen={} kill={} in={} out={}\n",
                block.name,
                d.gen[fi][bi].display(&p),
                d.kill[fi][bi].display(&p),
                d.in_[fi][bi].display(&p),
                d.out[fi][bi].display(&p),
            );
            let vops = d.block_vops(&p, f, pagesel::BlockId(b as u32));
            for (k, instr) in block.instrs.iter().enumerate() {
                out += &format!("    {:<16} vop={}\n", p.instr_text(f, instr), vops[k].display(&p));
            }
        }
    }
    out += &format!("iterations {}\n", d.iterations);
    emit(&out)
}

pub fn frg(file: &Path, cfg: &ConfigArgs) -> Result<()> {
    let p = load(file, cfg)?;
    let d = solve(&p);
    let frg = build_frg(&p, &d);
    let mut lines: Vec<(String, String, String)> = frg
        .edges()
        .map(|(g, h, w)| {
            let (a, b) = (p.name(g).to_string(), p.name(h).to_string());
            let (a, b) = if a <= b { (a, b) } else { (b, a) };
            (a, b, w.to_string())
        })
        .collect();
    lines.sort();
    let mut out: String = lines.iter().map(|(a, b, w)| format!("{a} {b} {w}\n")).collect();
    out += &format!("total {}\n", frg.total_weight());
    emit(&out)
}

pub fn partition(
    file: &Path,
    cfg: &ConfigArgs,
    exhaustive: bool,
    objective: ObjectiveArg,
    conservative_size: bool,
) -> Result<()> {
    let p = load(file, cfg)?;
    let d = solve(&p);
    let frg = build_frg(&p, &d);
    let a: PageAssignment = if exhaustive {
        let objective = match objective {
            ObjectiveArg::Residual => Objective::ResidualWeight,
            ObjectiveArg::Psi => Objective::ActualPsiCount,
        };
        exhaustive_partition(&frg, &p, &d, objective).map_err(analysis)?
    } else {
        greedy_partition_with(&frg, &p, GreedyOptions { conservative_size }, |_| {}).map_err(analysis)?
    };
    let out = format!(
        "{}residual {}\nsaved {}\ntotal {}\n",
        a.display(&p),
        residual_cost(&frg, &a),
        saved_weight(&frg, &a),
        frg.total_weight()
    );
    emit(&out)
}

pub fn optimize(
    file: &Path,
    cfg: &ConfigArgs,
    output: Option<&Path>,
    report: Option<&Path>,
    conservative_size: bool,
) -> Result<()> {
    let p = load(file, cfg)?;
    let out = run_pipeline(&p, &stem(file), &PipelineOptions { conservative_size }).map_err(analysis)?;
    let text = out.optimized.program.to_string();
    match output {
        Some(path) => write(path, &text)?,
        None => emit(&text)?,
    }
    if let Some(path) = report {
        write(path, &out.report.to_json())?;
    }
    let r = &out.report;
    match (r.s_naive, r.ratio) {
        (Some(n), Some(ratio)) => eprintln!(
            "{}: {} -> {} words ({:.4}), {} -> {} PSIs",
            r.program,
            n,
            r.s_opt,
            ratio,
            r.psi_naive.unwrap_or(0),
            r.psi_opt
        ),
        _ => eprintln!(
            "{}: {} words, {} PSIs (naive placement infeasible)",
            r.program, r.s_opt, r.psi_opt
        ),
    }
    Ok(())
}

/// Reads `name page` lines; `#` starts a comment.
fn read_assignment(path: &Path, p: &Program) -> Result<PageAssignment> {
    let text = read(path)?;
    let mut pages: Vec<Option<u32>> = vec![None; p.func_count()];
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = |msg: &str| CliError::Usage(format!("{}:{}: {msg}", path.display(), n + 1));
        let mut parts = line.split_whitespace();
        let (Some(name), Some(page), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(bad("expected `name page`"));
        };
        let f = p.func_by_name(name).ok_or_else(|| bad("unknown function"))?;
        let page: u32 = page.parse().map_err(|_| bad("page is not a number"))?;
        if page >= p.config.page_count {
            return Err(bad("page out of range"));
        }
        pages[f.index()] = Some(page);
    }
    let func_page = pages
        .iter()
        .enumerate()
        .map(|(i, pg)| {
            pg.ok_or_else(|| CliError::Usage(format!("{}: no page for `{}`", path.display(), p.functions[i].name)))
        })
        .collect::<Result<Vec<u32>>>()?;
    Ok(PageAssignment::from_pages(p, func_page))
}

pub fn verify(
    file: &Path,
    cfg: &ConfigArgs,
    seeds: u64,
    steps: u64,
    seed: u64,
    assignment: Option<&Path>,
    conservative_size: bool,
) -> Result<()> {
    if steps == 0 {
        return Err(CliError::Usage("--steps must be positive".into()));
    }
    let (naive, opt) = match assignment {
        Some(path) => {
            let cfg = ConfigArgs {
                allow_psi: true,
                ..cfg.clone()
            };
            let given = load(file, &cfg)?;
            let a = read_assignment(path, &given)?;
            let exact_sizes = given.functions.iter().map(|f| f.size(given.config.psi_cost)).collect();
            let opt = OptimizedProgram {
                program: given.clone(),
                assignment: a,
                psi_sites: Vec::new(),
                exact_sizes,
            };
            let naive = naive_placement(&given.strip_psi()).map_err(analysis)?;
            (naive, opt)
        }
        None => {
            let p = load(file, cfg)?;
            let out = run_pipeline(&p, &stem(file), &PipelineOptions { conservative_size }).map_err(analysis)?;
            let naive = out
                .naive
                .ok_or_else(|| analysis("naive placement is infeasible; nothing to compare against"))?;
            (naive, out.optimized)
        }
    };
    let naive_img = layout(&naive).map_err(analysis)?;
    let opt_img = layout(&opt).map_err(analysis)?;
    let s = verify_streams(&naive_img, &opt_img, seed, seeds, steps);
    let psi: u64 = opt.program.functions.iter().map(|f| f.psi_count()).sum();
    let mut out = format!(
        "runs {} halted {} faults {} divergences {} psi {}\n",
        s.runs,
        s.halted,
        s.faults.len(),
        s.divergences.len(),
        psi
    );
    for (stream, image, e) in &s.faults {
        out += &format!("fault stream {stream} {image}: {e}\n");
    }
    for stream in &s.divergences {
        out += &format!("divergence stream {stream}\n");
    }
    emit(&out)?;
    if s.passed() {
        Ok(())
    } else {
        Err(CliError::Verification(format!(
            "{} faults, {} divergences over {} runs",
            s.faults.len(),
            s.divergences.len(),
            s.runs
        )))
    }
}

pub struct GenArgs {
    pub seed: u64,
    pub count: usize,
    pub out_dir: Option<PathBuf>,
    pub funcs: String,
    pub blocks: String,
    pub pages: String,
    pub page_size: Option<u32>,
    pub psi_cost: u32,
    pub call_density: f64,
    pub goto_density: f64,
    pub cluster: f64,
    pub acyclic: bool,
    pub target_words: Option<u64>,
}

fn range<T: FromStr + Copy>(flag: &str, s: &str) -> Result<RangeInclusive<T>> {
    let bad = || CliError::Usage(format!("--{flag}: expected N or MIN-MAX, got `{s}`"));
    let parse = |t: &str| t.trim().parse::<T>().map_err(|_| bad());
    match s.split_once('-') {
        Some((a, b)) => Ok(parse(a)?..=parse(b)?),
        None => {
            let n = parse(s)?;
            Ok(n..=n)
        }
    }
}

impl GenArgs {
    pub fn run(self) -> Result<()> {
        let spec = GenSpec {
            seed: self.seed,
            funcs: range("funcs", &self.funcs)?,
            blocks: range("blocks", &self.blocks)?,
            pages: range("pages", &self.pages)?,
            page_size: self.page_size,
            psi_cost: self.psi_cost,
            call_density: self.call_density,
            goto_density: self.goto_density,
            cluster_factor: self.cluster,
            acyclic: self.acyclic,
            target_words: self.target_words,
            ..GenSpec::default()
        };
        let usage = |e: pagesel::gen::GenError| CliError::Usage(e.to_string());
        match &self.out_dir {
            None if self.count == 1 => emit(&generate(&spec).map_err(usage)?),
            None => Err(CliError::Usage("--count above 1 requires --out-dir".into())),
            Some(dir) => {
                fs::create_dir_all(dir).map_err(|source| CliError::Io {
                    path: dir.clone(),
                    source,
                })?;
                for (name, text) in generate_corpus(&spec, self.count).map_err(usage)? {
                    write(&dir.join(format!("{name}.ir")), &text)?;
                }
                Ok(())
            }
        }
    }
}

pub fn report(paths: &[PathBuf], output: Option<&Path>) -> Result<()> {
    let reports = paths
        .iter()
        .map(|path| {
            serde_json::from_str::<Report>(&read(path)?)
                .map_err(|e| CliError::Usage(format!("{}: not a report: {e}", path.display())))
        })
        .collect::<Result<Vec<Report>>>()?;
    let text = summarize(&reports).to_json();
    match output {
        Some(path) => write(path, &text),
        None => emit(&text),
    }
}
