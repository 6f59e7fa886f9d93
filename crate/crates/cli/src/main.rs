//! `deltastar` command-line front end.
//!
//! Exit codes: 0 when every check passes, 1 on a verification failure, 2 on
//! a configuration error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use deltastar::synthesis::{
    export_grid, refine_quadrature, synthesize_basic_solution, synthesize_eigensolution, GridRow, Refinement,
};
use deltastar::transform::{compute_kernel_decomposition_with, kernel_elements, KernelDims, MatrixBasis};
use deltastar::verifier::{mutation_sweep, verify_field, CsvRow, MutationRow, DEFAULT_SAMPLES, DEFAULT_TOL};
use deltastar::{
    make_config, parse_float_grid, parse_int_grid, verify_full_basis, CoefficientProfile, Error, MomentumPair, Profile,
    QuadratureSpec, ResidualReport, StarConfig, Subspace, VerifyOptions,
};

#[derive(Parser)]
#[command(
    name = "deltastar",
    version,
    about = "Two-particle eigensolutions on a star graph with a delta interaction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check every basis element at one (n, c, k1).
    Verify(VerifyArgs),
    /// Kernel dimensions of the vertex-condition system for each n.
    Kernels(KernelArgs),
    /// Build a quadrature eigensolution or basic solution and check it.
    Synthesize(SynthArgs),
    /// Residual table over an (n, c, k1) grid.
    Sweep(SweepArgs),
    /// Perturb single amplitudes and report whether the checks notice.
    Mutate(MutateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct Common {
    /// Seed for every sample point.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Pass/fail tolerance on absolute residuals.
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    /// Sample points per check.
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    samples: usize,
    /// Report path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    n: String,
    #[arg(long, allow_hyphen_values = true)]
    c: String,
    #[arg(long)]
    k1: String,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct KernelArgs {
    #[arg(long, default_value = "3..8")]
    n: String,
    /// Include the orthonormal bases in JSON reports.
    #[arg(long)]
    bases: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    n: String,
    #[arg(long, allow_hyphen_values = true)]
    c: String,
    /// `element=profile` terms, e.g. `sym_diag(1)=gaussian:0.35,0.1`. With
    /// `--basic`, a single scalar profile such as `const:1`.
    #[arg(long)]
    profile: String,
    /// Kernel element `subspace:index` (subspaces ker_q_minus, ker_q_plus,
    /// k_minus, k_plus) for a basic solution.
    #[arg(long)]
    basic: Option<String>,
    #[arg(long, default_value_t = 64)]
    nodes: usize,
    /// Also re-synthesize with this many times the nodes.
    #[arg(long)]
    refine: Option<usize>,
    /// Grid coordinates for the exported values.
    #[arg(long, default_value = "0..10:11")]
    xs: String,
    #[arg(long, default_value = "0..10:11")]
    ys: String,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    n: String,
    #[arg(long, allow_hyphen_values = true)]
    c: String,
    #[arg(long)]
    k1: String,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct MutateArgs {
    #[arg(long)]
    n: String,
    #[arg(long, allow_hyphen_values = true)]
    c: String,
    #[arg(long)]
    k1: String,
    /// Relative size of each perturbation.
    #[arg(long, default_value_t = 1e-3)]
    rel: f64,
    /// A mutation counts as detected above this residual.
    #[arg(long, default_value_t = 1e-5)]
    threshold: f64,
    #[command(flatten)]
    common: Common,
}

enum Failure {
    Config(String),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Config(e.to_string())
    }
}

type CmdResult = Result<bool, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Verify(a) => cmd_verify(a),
        Command::Kernels(a) => cmd_kernels(a),
        Command::Synthesize(a) => cmd_synthesize(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Mutate(a) => cmd_mutate(a),
    };
    match res {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Config(msg) | Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn single<T: Copy>(grid: Vec<T>, flag: &str) -> Result<T, Failure> {
    match grid.as_slice() {
        [v] => Ok(*v),
        _ => Err(Failure::Config(format!(
            "--{flag} takes a single value here; use `sweep` for grids"
        ))),
    }
}

fn edge_grid(text: &str) -> Result<Vec<usize>, Failure> {
    let ns = parse_int_grid(text)?;
    if let Some(&n) = ns.iter().find(|&&n| n < 3) {
        return Err(Error::EdgeCountTooSmall(n).into());
    }
    Ok(ns)
}

fn check_common(c: &Common) -> Result<VerifyOptions, Failure> {
    if !(c.tol.is_finite() && c.tol > 0.0) {
        return Err(Failure::Config(format!("--tol must be positive, got {}", c.tol)));
    }
    if c.samples == 0 {
        return Err(Failure::Config("--samples must be positive".into()));
    }
    Ok(VerifyOptions {
        samples: c.samples,
        seed: c.seed,
        tol: c.tol,
    })
}

fn config(n: usize, c: f64) -> Result<StarConfig, Failure> {
    let cfg = make_config(n, c)?;
    if c == 0.0 {
        return Err(Error::ZeroCoupling.into());
    }
    Ok(cfg)
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Failure::Io(format!("writing {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_csv<T: Serialize>(rows: &[T]) -> Result<String, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Failure::Io(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Failure::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Failure::Io(e.to_string()))
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports serialize");
    s.push('\n');
    s
}

fn cmd_verify(a: VerifyArgs) -> CmdResult {
    let opts = check_common(&a.common)?;
    let n = single(edge_grid(&a.n)?, "n")?;
    let c = single(parse_float_grid(&a.c)?, "c")?;
    let k1 = single(parse_float_grid(&a.k1)?, "k1")?;
    let cfg = config(n, c)?;
    let report = verify_full_basis(&cfg, MomentumPair::from_k1(k1)?, &opts)?;
    let text = match a.common.format.unwrap_or(Format::Json) {
        Format::Json => to_json(&report),
        Format::Csv => to_csv(&report.csv_rows())?,
    };
    emit(a.common.out.as_deref(), &text)?;
    eprintln!(
        "verify n={n} c={c} k1={k1}: {}/{} elements pass, gram rank {} (expected {}) -> {}",
        report.passed,
        report.elements.len(),
        report.gram.rank,
        report.gram.expected_rank,
        if report.pass { "PASS" } else { "FAIL" }
    );
    Ok(report.pass)
}

#[derive(Serialize)]
struct KernelRow {
    n: usize,
    ker_q_minus: usize,
    ker_q_plus: usize,
    k_minus: usize,
    k_plus: usize,
    predicted_ker_q_minus: usize,
    predicted_ker_q_plus: usize,
    predicted_k_minus: usize,
    predicted_k_plus: usize,
    total: usize,
    status: &'static str,
}

fn kernel_row(n: usize, d: &KernelDims, p: &KernelDims, total: usize, pass: bool) -> KernelRow {
    KernelRow {
        n,
        ker_q_minus: d.ker_q_minus,
        ker_q_plus: d.ker_q_plus,
        k_minus: d.k_minus,
        k_plus: d.k_plus,
        predicted_ker_q_minus: p.ker_q_minus,
        predicted_ker_q_plus: p.ker_q_plus,
        predicted_k_minus: p.k_minus,
        predicted_k_plus: p.k_plus,
        total,
        status: if pass { "PASS" } else { "FAIL" },
    }
}

fn cmd_kernels(a: KernelArgs) -> CmdResult {
    let ns = edge_grid(&a.n)?;
    let reports = ns
        .par_iter()
        .map(|&n| compute_kernel_decomposition_with(n, MatrixBasis::F, a.bases))
        .collect::<Result<Vec<_>, Error>>()?;
    let text = match a.format.unwrap_or(Format::Json) {
        Format::Json => to_json(&reports),
        Format::Csv => to_csv(
            &reports
                .iter()
                .map(|r| kernel_row(r.n, &r.dims, &r.predicted, r.total, r.pass))
                .collect::<Vec<_>>(),
        )?,
    };
    emit(a.out.as_deref(), &text)?;
    for r in &reports {
        let d = &r.dims;
        eprintln!(
            "n={}: ker Q- {}, ker Q+ {}, K- {}, K+ {}, total {} -> {}",
            r.n,
            d.ker_q_minus,
            d.ker_q_plus,
            d.k_minus,
            d.k_plus,
            r.total,
            if r.pass { "PASS" } else { "FAIL" }
        );
        for f in &r.failures {
            eprintln!("  {f}");
        }
    }
    Ok(reports.iter().all(|r| r.pass))
}

#[derive(Serialize)]
struct SynthReport {
    schema: u32,
    n: usize,
    c: f64,
    nodes: usize,
    kind: String,
    report: ResidualReport,
    refinement: Option<Refinement>,
    grid: Vec<GridRow>,
}

fn parse_subspace(text: &str) -> Result<(Subspace, usize), Failure> {
    let (name, idx) = text
        .split_once(':')
        .ok_or_else(|| Failure::Config(format!("--basic expects subspace:index, got {text:?}")))?;
    let sub = Subspace::ALL
        .into_iter()
        .find(|s| s.label() == name.trim())
        .ok_or_else(|| Failure::Config(format!("unknown subspace {name:?}")))?;
    let idx = idx
        .trim()
        .parse::<usize>()
        .map_err(|_| Failure::Config(format!("bad index in {text:?}")))?;
    Ok((sub, idx))
}

fn cmd_synthesize(a: SynthArgs) -> CmdResult {
    let opts = check_common(&a.common)?;
    let n = single(edge_grid(&a.n)?, "n")?;
    let c = single(parse_float_grid(&a.c)?, "c")?;
    let xs = parse_float_grid(&a.xs)?;
    let ys = parse_float_grid(&a.ys)?;
    if xs.iter().chain(&ys).any(|&v| v < 0.0) {
        return Err(Failure::Config("grid coordinates must be non-negative".into()));
    }
    let spec = QuadratureSpec::with_nodes(a.nodes);
    let (solution, kind, basic) = match &a.basic {
        Some(sel) => {
            let cfg = make_config(n, c)?;
            let (sub, idx) = parse_subspace(sel)?;
            let elems = kernel_elements(n, sub)?;
            let e = elems.get(idx).ok_or_else(|| {
                Failure::Config(format!(
                    "{} has {} elements, index {idx} out of range",
                    sub.label(),
                    elems.len()
                ))
            })?;
            let profile: Profile = a.profile.parse()?;
            (
                synthesize_basic_solution(&cfg, e, &profile, &spec)?,
                format!("basic:{sel}"),
                true,
            )
        }
        None => {
            let cfg = config(n, c)?;
            let profile: CoefficientProfile = a.profile.parse()?;
            (
                synthesize_eigensolution(&cfg, &profile, &spec)?,
                "eigen".to_string(),
                false,
            )
        }
    };
    let report = verify_field(&solution, c, &kind, &opts);
    let refinement = a.refine.map(|f| refine_quadrature(&solution, f)).transpose()?;
    let grid = export_grid(&solution, &xs, &ys)?;
    // basic solutions only owe the vertex conditions
    let pass = if basic {
        report
            .checks
            .iter()
            .filter(|ch| ch.name.starts_with("vertex"))
            .all(|ch| ch.pass)
    } else {
        report.pass
    };
    let text = match a.common.format.unwrap_or(Format::Csv) {
        Format::Csv => to_csv(&grid)?,
        Format::Json => to_json(&SynthReport {
            schema: 1,
            n,
            c,
            nodes: a.nodes,
            kind: kind.clone(),
            report: report.clone(),
            refinement,
            grid,
        }),
    };
    emit(a.common.out.as_deref(), &text)?;
    for ch in &report.checks {
        eprintln!(
            "{kind} {}: {:.3e} ({})",
            ch.name,
            ch.max_abs_residual,
            if ch.pass { "pass" } else { "fail" }
        );
    }
    if let Some(r) = refinement {
        eprintln!(
            "refinement {} -> {} nodes: max change {:.3e}",
            r.base_nodes, r.refined_nodes, r.max_change
        );
    }
    Ok(pass)
}

fn skipped(n: usize, c: f64, k1: f64, why: &str) -> CsvRow {
    CsvRow {
        n,
        c,
        k1,
        element: "-".into(),
        check: "-".into(),
        max_abs_residual: 0.0,
        sample_count: 0,
        tolerance: 0.0,
        status: format!("SKIPPED({why})"),
    }
}

fn cmd_sweep(a: SweepArgs) -> CmdResult {
    let opts = check_common(&a.common)?;
    let ns = edge_grid(&a.n)?;
    let cs = parse_float_grid(&a.c)?;
    let ks = parse_float_grid(&a.k1)?;
    if let Some(&k) = ks.iter().find(|&&k| !(0.0..=1.0).contains(&k)) {
        return Err(Error::MomentumOutOfRange(k).into());
    }
    let mut cells = Vec::with_capacity(ns.len() * cs.len() * ks.len());
    for &n in &ns {
        for &c in &cs {
            for &k in &ks {
                cells.push((n, c, k));
            }
        }
    }
    let rows: Vec<Vec<CsvRow>> = cells
        .par_iter()
        .map(|&(n, c, k1)| {
            if c == 0.0 {
                return Ok(vec![skipped(n, c, k1, "zero-coupling")]);
            }
            let cfg = make_config(n, c)?;
            match verify_full_basis(&cfg, MomentumPair::from_k1(k1)?, &opts) {
                Ok(r) => Ok(r.csv_rows()),
                Err(Error::Singularity { .. }) => Ok(vec![skipped(n, c, k1, "singularity")]),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_, Error>>()?;
    let rows: Vec<CsvRow> = rows.into_iter().flatten().collect();
    let text = match a.common.format.unwrap_or(Format::Csv) {
        Format::Csv => to_csv(&rows)?,
        Format::Json => to_json(&rows),
    };
    emit(a.common.out.as_deref(), &text)?;
    let failed = rows.iter().filter(|r| r.status == "FAIL").count();
    let skipped = rows.iter().filter(|r| r.status.starts_with("SKIPPED")).count();
    eprintln!(
        "sweep: {} cells, {} rows, {failed} failed, {skipped} skipped",
        cells.len(),
        rows.len()
    );
    Ok(failed == 0)
}

fn cmd_mutate(a: MutateArgs) -> CmdResult {
    let opts = check_common(&a.common)?;
    let n = single(edge_grid(&a.n)?, "n")?;
    let c = single(parse_float_grid(&a.c)?, "c")?;
    let k1 = single(parse_float_grid(&a.k1)?, "k1")?;
    if !(a.rel.is_finite() && a.rel != 0.0) {
        return Err(Failure::Config("--rel must be finite and non-zero".into()));
    }
    let cfg = config(n, c)?;
    let rows: Vec<MutationRow> = mutation_sweep(&cfg, MomentumPair::from_k1(k1)?, a.rel, a.threshold, &opts)?;
    let text = match a.common.format.unwrap_or(Format::Csv) {
        Format::Csv => to_csv(&rows)?,
        Format::Json => to_json(&rows),
    };
    emit(a.common.out.as_deref(), &text)?;
    let missed = rows.iter().filter(|r| !r.detected).count();
    let weakest = rows.iter().map(|r| r.max_residual).fold(f64::INFINITY, f64::min);
    eprintln!(
        "mutate: {} mutations, {missed} undetected, smallest residual {weakest:.3e}",
        rows.len()
    );
    Ok(missed == 0)
}
