//! The `qweyl` command line.
//!
//! Every command writes `<out>/<command>.json` (a report envelope with the
//! resolved config, a `generated_at` timestamp and a `passed` flag) plus
//! `<out>/<command>.config.toml`. With `--format csv` the numeric tables are
//! also written as CSV next to it.
//!
//! Exit status: 0 when every check passes, 1 on a failed check, 2 on a
//! usage or configuration error.

use std::path::{Path, PathBuf};
use std::time::SystemTime;

use clap::{Args, Parser, Subcommand};
use log::info;
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{OutputFormat, RunConfig, OUT_ENV};
use crate::error::{Error, Result};
use crate::evolve::{self, Method, PropagateOptions};
use crate::fockspec::{
    self, FockBasis, HamiltonianModel, SplitHamiltonian, COUPLING_TOL, INTERIOR_MARGIN,
};
use crate::generator::Generator;
use crate::groundfx::{self, CPoly3};
use crate::qsym::{self, Relation};
use crate::realize::{self, ExpansionMode, MonomialVec, MultiIndex, SlopeFit, Theta};
use crate::scalar::fmt_gauss;

pub const RESIDUAL_TOL: f64 = 1e-12;
pub const CONFLUENCE_WORDS: usize = 500;
pub const CONFLUENCE_MAX_LEN: usize = 6;
pub const CONFLUENCE_SEED: u64 = 0x5157_4559;
pub const SLOPE_TARGET: f64 = 2.0;
pub const SLOPE_TOL: f64 = 0.1;
pub const NORM_FLOW_TOL: f64 = 1e-6;
pub const DECAY_TOL: f64 = 1e-8;
pub const PARITY_RATE_TOL: f64 = 1e-9;
pub const TRAJECTORY_STRIDE: usize = 10;
/// Rounding allowance on `diag(H₀) = n₁+n₂+n₃+3/2` built from ladder products.
pub const H0_TOL: f64 = 1e-12;

#[derive(Debug, Parser)]
#[command(
    name = "qweyl",
    version,
    about = "Quantum Weyl algebra A_q(3) and its deformed oscillator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Symbolic relation suite, confluence suite and numeric realization residuals.
    VerifyAlgebra {
        #[arg(long, hide = true)]
        corrupt_relations: bool,
    },
    /// Residual slope of the first-order generator expansion, both modes.
    ExpandScan,
    /// Effective potentials A, V_R, V_I and field B, compared with the printed forms.
    Effective,
    /// First-order level shifts of the truncated Hamiltonian by oscillator shell.
    Spectrum,
    /// Transition offsets of H₁ and the {-1,0,1}³ mixing comparison.
    Mixing,
    /// Propagate the ground state under the truncated non-Hermitian Hamiltonian.
    Evolve {
        /// Replace H by H₀ − iα·1 and check P(t) = exp(−2αt).
        #[arg(long)]
        alpha_oracle: bool,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::VerifyAlgebra { .. } => "verify-algebra",
            Command::ExpandScan => "expand-scan",
            Command::Effective => "effective",
            Command::Spectrum => "spectrum",
            Command::Mixing => "mixing",
            Command::Evolve { .. } => "evolve",
        }
    }
}

#[derive(Debug, Default, Args)]
pub struct Overrides {
    /// TOML config file; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub theta: Option<f64>,
    #[arg(long = "nmax", global = true)]
    pub n_max: Option<u32>,
    #[arg(long, global = true)]
    pub degree: Option<u32>,
    #[arg(long, global = true)]
    pub mode: Option<ExpansionMode>,
    #[arg(long = "T", global = true)]
    pub t_final: Option<f64>,
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    /// Output directory (default: $QWEYL_OUT, then the config file, then ./qweyl-out).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub format: Option<OutputFormat>,
    #[arg(long, global = true)]
    pub method: Option<Method>,
    #[arg(long, global = true, hide = true)]
    pub model: Option<HamiltonianModel>,
}

/// Defaults, then the config file, then `QWEYL_OUT`, then flags.
pub fn resolve_config(o: &Overrides, env_out: Option<PathBuf>) -> Result<RunConfig> {
    let mut c = match &o.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(dir) = env_out {
        c.out = dir;
    }
    macro_rules! set {
        ($($field:ident),*) => { $(if let Some(v) = o.$field.clone() { c.$field = v; })* };
    }
    set!(theta, n_max, degree, mode, t_final, dt, alpha, out, format, method, model);
    c.validate()?;
    Ok(c)
}

/// What a command produced.
#[derive(Debug)]
pub struct Outcome {
    pub command: &'static str,
    pub passed: bool,
    pub summary: String,
    pub files: Vec<PathBuf>,
}

struct CommandOutput {
    passed: bool,
    summary: String,
    result: Value,
    tables: Vec<(String, Vec<u8>)>,
}

#[derive(Serialize)]
struct Envelope<'a> {
    command: &'a str,
    version: &'a str,
    generated_at: String,
    config: &'a RunConfig,
    passed: bool,
    result: Value,
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    let env_out = std::env::var_os(OUT_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from);
    let config = resolve_config(&cli.overrides, env_out)?;
    run_command(&cli.command, &config)
}

pub fn run_command(command: &Command, config: &RunConfig) -> Result<Outcome> {
    let name = command.name();
    info!(
        "{name}: θ = {}, N_max = {}, mode = {}",
        config.theta, config.n_max, config.mode
    );
    let out = match command {
        Command::VerifyAlgebra { corrupt_relations } => verify_algebra(config, *corrupt_relations)?,
        Command::ExpandScan => expand_scan(config)?,
        Command::Effective => effective(config)?,
        Command::Spectrum => spectrum(config)?,
        Command::Mixing => mixing(config)?,
        Command::Evolve { alpha_oracle } => evolve_cmd(config, *alpha_oracle)?,
    };
    let dir = &config.out;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    let envelope = Envelope {
        command: name,
        version: env!("CARGO_PKG_VERSION"),
        generated_at: humantime::format_rfc3339_seconds(SystemTime::now()).to_string(),
        config,
        passed: out.passed,
        result: out.result,
    };
    let json_path = dir.join(format!("{name}.json"));
    write_file(&json_path, &serde_json::to_vec_pretty(&envelope)?)?;
    files.push(json_path);
    let cfg_path = dir.join(format!("{name}.config.toml"));
    write_file(&cfg_path, config.to_toml()?.as_bytes())?;
    files.push(cfg_path);
    if config.format == OutputFormat::Csv {
        for (stem, bytes) in out.tables {
            let p = dir.join(format!("{stem}.csv"));
            write_file(&p, &bytes)?;
            files.push(p);
        }
    }
    Ok(Outcome {
        command: name,
        passed: out.passed,
        summary: out.summary,
        files,
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Exit status for an error: 2 for bad input, 1 otherwise.
pub fn error_exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_)
        | Error::InvalidParameter(_)
        | Error::UnknownMode(_)
        | Error::Parse(_)
        | Error::StepSize { .. }
        | Error::NearCutoff { .. }
        | Error::Io { .. } => 2,
        _ => 1,
    }
}

/// Parses, runs and reports; returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(&cli) {
        Ok(o) => {
            println!("{}: {}", o.command, o.summary);
            for f in &o.files {
                println!("  wrote {}", f.display());
            }
            println!("{}", if o.passed { "PASS" } else { "FAIL" });
            if o.passed {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            error_exit_code(&e)
        }
    }
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.into_inner().map_err(|e| Error::Parse(e.to_string()))
}

fn provenance(c: &RunConfig) -> Vec<String> {
    vec![c.mode.to_string(), c.theta.to_string(), c.n_max.to_string()]
}

fn verify_algebra(c: &RunConfig, corrupt: bool) -> Result<CommandOutput> {
    let relations: Vec<Relation> = if corrupt {
        qsym::corrupted_defining_relations()
    } else {
        qsym::defining_relations()
    };
    let symbolic: Vec<Value> = relations
        .iter()
        .map(|r| {
            let rep = r.check();
            json!({ "name": r.name, "holds": rep.holds, "residual": rep.residual })
        })
        .collect();
    let symbolic_ok = symbolic.iter().filter(|v| v["holds"] == true).count();
    let confluence = qsym::confluence_suite(CONFLUENCE_WORDS, CONFLUENCE_MAX_LEN, CONFLUENCE_SEED);
    let numeric = realize::relation_residual_for(&relations, Theta(c.theta), c.degree)?;
    let numeric_ok = numeric.max_residual <= RESIDUAL_TOL;
    let failing: Vec<String> = numeric
        .per_relation
        .iter()
        .filter(|r| r.max_residual > RESIDUAL_TOL)
        .map(|r| format!("{} (residual {:.3e})", r.name, r.max_residual))
        .collect();
    for f in &failing {
        log::error!("relation fails numerically: {f}");
    }
    let passed = symbolic_ok == relations.len() && confluence.passed && numeric_ok;
    let summary = format!(
        "{symbolic_ok}/{} relations symbolic, confluence {}/{} words, max numeric residual {:.3e} (tol {RESIDUAL_TOL:e})",
        relations.len(),
        confluence.words - confluence.failures.len(),
        confluence.words,
        numeric.max_residual
    );
    let prov = provenance(c);
    let rows = relations
        .iter()
        .zip(&numeric.per_relation)
        .zip(&symbolic)
        .map(|((r, n), s)| {
            let mut row = prov.clone();
            row.extend([
                c.degree.to_string(),
                r.name.clone(),
                s["holds"].to_string(),
                n.max_residual.to_string(),
            ]);
            row
        });
    let table = csv_bytes(
        &[
            "mode",
            "theta",
            "n_max",
            "degree",
            "relation",
            "symbolic_holds",
            "numeric_residual",
        ],
        rows,
    )?;
    Ok(CommandOutput {
        passed,
        summary,
        result: json!({
            "tolerance": RESIDUAL_TOL,
            "symbolic": symbolic,
            "confluence": confluence,
            "numeric": numeric,
            "failing_relations": failing,
        }),
        tables: vec![("verify-algebra".into(), table)],
    })
}

/// Monomials for the expansion-order scan.
pub fn scan_monomials() -> Vec<MultiIndex> {
    [
        (2, 2, 2),
        (3, 2, 2),
        (2, 3, 2),
        (2, 2, 3),
        (3, 3, 2),
        (1, 1, 1),
        (0, 0, 0),
    ]
    .into_iter()
    .map(|(a, b, c)| MultiIndex::new(a, b, c))
    .collect()
}

pub fn scan_grid() -> Vec<f64> {
    realize::log_grid(1e-4, 1e-1, 13)
}

/// Rederived-mode acceptance of one fit: slope 2 ± 0.1, or an exact match
/// where `∂₃` acts on `n₃ = 1` (both sides are the same multiple of a single monomial).
pub fn rederived_fit_ok(g: Generator, n: &MultiIndex, fit: &SlopeFit) -> bool {
    match fit {
        SlopeFit::Slope { slope, .. } => (slope - SLOPE_TARGET).abs() <= SLOPE_TOL,
        SlopeFit::ExactMatch => g == Generator::D3 && n.0[2] == 1,
    }
}

fn expand_scan(c: &RunConfig) -> Result<CommandOutput> {
    let grid = scan_grid();
    let mut fits = Vec::new();
    let mut points = Vec::new();
    let mut rederived_ok = true;
    let mut worst: f64 = 0.0;
    for mode in ExpansionMode::BOTH {
        for n in scan_monomials() {
            // rederived acceptance is on the monomials with every n_j ≥ 1
            let scored = mode == ExpansionMode::Rederived && n.total() > 0;
            for g in Generator::ALL {
                let s = realize::expansion_order_scan(g, &MonomialVec::monomial(n), &grid, mode)?;
                let ok = rederived_fit_ok(g, &n, &s.fit);
                if scored {
                    rederived_ok &= ok;
                    if let SlopeFit::Slope { slope, .. } = s.fit {
                        worst = worst.max((slope - SLOPE_TARGET).abs());
                    }
                }
                let (kind, slope, intercept) = match s.fit {
                    SlopeFit::Slope { slope, intercept } => ("slope", slope, intercept),
                    SlopeFit::ExactMatch => ("exact_match", f64::NAN, f64::NAN),
                };
                for (t, r) in &s.points {
                    points.push(vec![
                        mode.to_string(),
                        g.to_string(),
                        n.0[0].to_string(),
                        n.0[1].to_string(),
                        n.0[2].to_string(),
                        t.to_string(),
                        r.to_string(),
                    ]);
                }
                fits.push((mode, g, n, kind, slope, intercept, scored.then_some(ok), s));
            }
        }
    }
    let fit_rows = fits
        .iter()
        .map(|(mode, g, n, kind, slope, intercept, ok, _)| {
            vec![
                mode.to_string(),
                g.to_string(),
                n.0[0].to_string(),
                n.0[1].to_string(),
                n.0[2].to_string(),
                kind.to_string(),
                slope.to_string(),
                intercept.to_string(),
                ok.map_or(String::new(), |b| b.to_string()),
            ]
        });
    let fit_table = csv_bytes(
        &[
            "mode",
            "generator",
            "n1",
            "n2",
            "n3",
            "fit",
            "slope",
            "intercept",
            "within_tolerance",
        ],
        fit_rows,
    )?;
    let point_table = csv_bytes(
        &["mode", "generator", "n1", "n2", "n3", "theta", "residual"],
        points,
    )?;
    let paper_empty: Vec<Value> = fits
        .iter()
        .filter(|f| f.0 == ExpansionMode::Paper && f.2.total() == 0)
        .map(|f| json!({ "generator": f.1.to_string(), "fit": f.7.fit }))
        .collect();
    let scans: Vec<Value> = fits
        .iter()
        .map(|f| json!({ "mode": f.0, "generator": f.1.to_string(), "monomial": f.2, "within_tolerance": f.6, "scan": {
            "points": f.7.points, "fit": f.7.fit } }))
        .collect();
    let summary = format!(
        "rederived slopes {} (max |slope − 2| = {worst:.3}); paper mode reported",
        if rederived_ok {
            "within 2 ± 0.1"
        } else {
            "OUT OF TOLERANCE"
        }
    );
    let _ = c;
    Ok(CommandOutput {
        passed: rederived_ok,
        summary,
        result: json!({
            "theta_grid": grid,
            "slope_target": SLOPE_TARGET,
            "slope_tolerance": SLOPE_TOL,
            "rederived_within_tolerance": rederived_ok,
            "paper_on_empty_mode": paper_empty,
            "scans": scans,
        }),
        tables: vec![
            ("expand-scan".into(), fit_table),
            ("expand-scan-points".into(), point_table),
        ],
    })
}

fn poly_text(p: &[CPoly3; 3]) -> [String; 3] {
    std::array::from_fn(|j| p[j].to_string())
}

fn effective(_c: &RunConfig) -> Result<CommandOutput> {
    let mut per_mode = Vec::new();
    let mut rows = Vec::new();
    let mut consistent = true;
    let effs: Vec<_> = ExpansionMode::BOTH
        .iter()
        .map(|&m| groundfx::assemble_effective(m))
        .collect();
    for eff in &effs {
        let rep = groundfx::compare_to_reference(eff);
        let b = groundfx::curl(&eff.a);
        let div_b = groundfx::divergence(&b);
        let rebuilt = eff.operator() == groundfx::replacement_operator(eff.mode);
        consistent &= rep.extraction_residual_zero && div_b.is_zero() && rebuilt;
        let honest = groundfx::ground_expectation(&groundfx::hamiltonian_operator(eff.mode));
        for (q, comps) in [
            ("A", eff.a.to_vec()),
            ("V_R", vec![eff.v_r.clone()]),
            ("V_I", vec![eff.v_i.clone()]),
            ("B", b.to_vec()),
        ] {
            for (k, p) in comps.iter().enumerate() {
                for (e, d, coeff) in p.terms() {
                    let z = crate::scalar::gauss_to_c64(coeff);
                    rows.push(vec![
                        eff.mode.to_string(),
                        "computed".into(),
                        q.into(),
                        k.to_string(),
                        e[0].to_string(),
                        e[1].to_string(),
                        e[2].to_string(),
                        d.to_string(),
                        z.re.to_string(),
                        z.im.to_string(),
                    ]);
                }
            }
        }
        per_mode.push(json!({
            "mode": eff.mode,
            "vector_potential": poly_text(&eff.a),
            "real_potential": eff.v_r.to_string(),
            "imaginary_potential": eff.v_i.to_string(),
            "magnetic_field": poly_text(&b),
            "divergence_of_field": div_b.to_string(),
            "operator_rebuilt": rebuilt,
            "ground_expectation_of_substituted_operator": {
                "order_0": fmt_gauss(&honest[0]),
                "order_theta": fmt_gauss(&honest[1]),
            },
            "ground_average_of_v_i": fmt_gauss(&eff.v_i.gaussian_moment()[1]),
            "discrepancies": rep,
        }));
    }
    let ref_a = groundfx::reference::vector_potential();
    let ref_b = groundfx::reference::magnetic_field();
    let ref_vi = groundfx::reference::imaginary_potential();
    for (q, comps) in [
        ("A", ref_a.to_vec()),
        ("V_I", vec![ref_vi.clone()]),
        ("B", ref_b.to_vec()),
    ] {
        for (k, p) in comps.iter().enumerate() {
            for (e, d, coeff) in p.terms() {
                let z = crate::scalar::gauss_to_c64(coeff);
                rows.push(vec![
                    "-".into(),
                    "printed".into(),
                    q.into(),
                    k.to_string(),
                    e[0].to_string(),
                    e[1].to_string(),
                    e[2].to_string(),
                    d.to_string(),
                    z.re.to_string(),
                    z.im.to_string(),
                ]);
            }
        }
    }
    let (p, d) = (&effs[0], &effs[1]);
    let shift = json!({
        "vector_potential": poly_text(&std::array::from_fn(|j| d.a[j].sub(&p.a[j]))),
        "real_potential": d.v_r.sub(&p.v_r).to_string(),
        "imaginary_potential": d.v_i.sub(&p.v_i).to_string(),
    });
    let paper = &per_mode[0]["discrepancies"];
    let matches = |v: &Value| v["matches"] == true;
    let a_matches = (0..3).all(|j| matches(&paper["vector_potential"][j]));
    let vi_matches = matches(&paper["imaginary_potential"]);
    let b_flags: Vec<bool> = (0..3)
        .map(|j| matches(&paper["field_of_reference_a"][j]))
        .collect();
    let summary = format!(
        "paper mode: A {} printed, V_I {} printed, curl of printed A vs printed B = {:?}; internal consistency {}",
        if a_matches { "matches" } else { "differs from" },
        if vi_matches { "matches" } else { "differs from" },
        b_flags,
        if consistent { "ok" } else { "FAILED" }
    );
    let table = csv_bytes(
        &[
            "mode",
            "source",
            "quantity",
            "component",
            "ex",
            "ey",
            "ez",
            "theta_order",
            "re",
            "im",
        ],
        rows,
    )?;
    Ok(CommandOutput {
        passed: consistent,
        summary,
        result: json!({
            "modes": per_mode,
            "printed": {
                "vector_potential": poly_text(&ref_a),
                "imaginary_potential": ref_vi.to_string(),
                "magnetic_field": poly_text(&ref_b),
            },
            "rederived_minus_paper": shift,
        }),
        tables: vec![("effective".into(), table)],
    })
}

fn spectrum(c: &RunConfig) -> Result<CommandOutput> {
    c.validate_spectrum()?;
    let split = SplitHamiltonian::build(c.n_max, c.mode, c.model)?;
    let basis = split.basis;
    let mut h0_deviation: f64 = 0.0;
    for i in 0..basis.dim() {
        for j in 0..basis.dim() {
            let want = if i == j {
                f64::from(basis.state(i).total()) + 1.5
            } else {
                0.0
            };
            h0_deviation = h0_deviation.max((split.h0[(i, j)] - want).norm());
        }
    }
    let h0_exact = h0_deviation <= H0_TOL;
    let shells = fockspec::shell_shifts(&split, c.theta, INTERIOR_MARGIN);
    let mut rows = Vec::new();
    let levels: Vec<Value> = shells
        .iter()
        .map(|s| {
            let lv: Vec<[f64; 2]> = s
                .shifts
                .iter()
                .map(|z| [s.unperturbed + z[0], z[1] + 0.0])
                .collect();
            for (k, l) in lv.iter().enumerate() {
                let mut row = provenance(c);
                row.extend([
                    c.model.to_string(),
                    s.quanta.to_string(),
                    s.degeneracy.to_string(),
                    k.to_string(),
                    l[0].to_string(),
                    l[1].to_string(),
                ]);
                rows.push(row);
            }
            let max_abs_shift = s
                .shifts
                .iter()
                .map(|z| z[0].hypot(z[1]))
                .fold(0.0, f64::max);
            json!({
                "quanta": s.quanta,
                "unperturbed": s.unperturbed,
                "degeneracy": s.degeneracy,
                "levels": lv,
                "max_abs_shift": max_abs_shift,
            })
        })
        .collect();
    let table = csv_bytes(
        &[
            "mode",
            "theta",
            "n_max",
            "model",
            "quanta",
            "degeneracy",
            "level",
            "re",
            "im",
        ],
        rows,
    )?;
    let summary = format!(
        "{} shells up to {} quanta; max |H₀ − diag(n+3/2)| = {h0_deviation:.1e}",
        shells.len(),
        shells.last().map_or(0, |s| s.quanta)
    );
    Ok(CommandOutput {
        passed: h0_exact,
        summary,
        result: json!({
            "model": c.model,
            "method": "first-order degenerate perturbation theory per shell",
            "interior_margin": INTERIOR_MARGIN,
            "h0_diagonal_exact": h0_exact,
            "h0_max_deviation": h0_deviation,
            "shells": levels,
        }),
        tables: vec![("spectrum".into(), table)],
    })
}

/// Cutoffs used for the stability check of the offset set.
pub fn stability_cutoffs(n_max: u32, model: HamiltonianModel) -> [u32; 3] {
    let floor = if model == HamiltonianModel::Substituted {
        6
    } else {
        8
    };
    let b = floor.max(n_max.saturating_sub(4));
    [b, b + 2, b + 4]
}

fn mixing(c: &RunConfig) -> Result<CommandOutput> {
    c.validate_spectrum()?;
    let split = SplitHamiltonian::build(c.n_max, c.mode, c.model)?;
    let pattern = fockspec::sparsity_pattern(&split.h1, split.basis, COUPLING_TOL, INTERIOR_MARGIN);
    let cutoffs = stability_cutoffs(c.n_max, c.model);
    let mut sets = Vec::new();
    for &n in &cutoffs {
        let s = SplitHamiltonian::build(n, c.mode, c.model)?;
        sets.push(fockspec::sparsity_pattern(
            &s.h1,
            s.basis,
            COUPLING_TOL,
            INTERIOR_MARGIN,
        ));
    }
    let stable = sets
        .windows(2)
        .all(|w| w[0].offset_set() == w[1].offset_set())
        && sets[0].offset_set() == pattern.offset_set();
    let parity =
        fockspec::parity_consistency(&split.operator, 1, &split.h1, split.basis, COUPLING_TOL);
    let probe = if c.n_max >= 6 {
        MultiIndex::new(2, 2, 2)
    } else {
        MultiIndex::new(0, 0, 0)
    };
    let amplitudes: Vec<Value> =
        fockspec::couplings_from(&split.h1, split.basis, &probe, COUPLING_TOL)
            .into_iter()
            .map(|(m, z)| json!({ "target": m, "amplitude": [z.re, z.im] }))
            .collect();
    let rows = pattern.offsets.iter().map(|o| {
        let mut row = provenance(c);
        row.extend([
            c.model.to_string(),
            o.offset[0].to_string(),
            o.offset[1].to_string(),
            o.offset[2].to_string(),
            o.count.to_string(),
            o.max_abs.to_string(),
            o.weight.to_string(),
            o.in_conjecture.to_string(),
        ]);
        row
    });
    let table = csv_bytes(
        &[
            "mode",
            "theta",
            "n_max",
            "model",
            "d1",
            "d2",
            "d3",
            "count",
            "max_abs",
            "weight",
            "in_conjecture",
        ],
        rows,
    )?;
    let v = &pattern.verdict;
    let summary = format!(
        "{} offsets; {{-1,0,1}}³ {}; outside weight fraction {:.6}; stable over {:?}: {stable}; parity consistent: {}",
        pattern.offsets.len(),
        if v.contained { "contains all couplings" } else { "violated" },
        v.outside_fraction,
        cutoffs,
        parity.consistent
    );
    Ok(CommandOutput {
        passed: stable && parity.consistent,
        summary,
        result: json!({
            "model": c.model,
            "pattern": pattern,
            "stability_cutoffs": cutoffs,
            "stable": stable,
            "offsets_per_cutoff": sets.iter().map(|s| s.offset_set()).collect::<Vec<_>>(),
            "parity": parity,
            "probe_state": probe,
            "probe_amplitudes": amplitudes,
        }),
        tables: vec![("mixing".into(), table)],
    })
}

/// States with at most two quanta, in basis order.
fn low_states(basis: FockBasis) -> Vec<MultiIndex> {
    basis.states().filter(|n| n.total() <= 2).collect()
}

fn evolve_cmd(c: &RunConfig, alpha_oracle: bool) -> Result<CommandOutput> {
    let (h, basis): (DMatrix<Complex64>, FockBasis) = if alpha_oracle {
        let h0 = fockspec::build_h_eff(c.n_max, 0.0, c.mode)?;
        let n = h0.matrix.nrows();
        (
            &h0.matrix - DMatrix::identity(n, n) * Complex64::new(0.0, c.alpha),
            h0.basis,
        )
    } else {
        let op = SplitHamiltonian::build(c.n_max, c.mode, c.model)?.at(c.theta);
        (op.matrix, op.basis)
    };
    let psi0 = evolve::basis_state(basis, &MultiIndex::new(0, 0, 0))?;
    let opts = PropagateOptions {
        t_final: c.t_final,
        dt: c.dt,
        method: c.method,
        stride: TRAJECTORY_STRIDE,
        ..PropagateOptions::default()
    };
    let traj = evolve::propagate(&h, basis, &psi0, &opts)?;
    let flow = evolve::norm_flow_check(&traj, &h)?;
    let rate0 = evolve::norm_rate(&h, &psi0);
    let states = low_states(basis);
    let map = evolve::gain_loss_map(&traj, &states, 1e-12)?;
    let mut checks = vec![
        json!({ "name": "norm_flow", "value": flow.max_deviation, "tolerance": NORM_FLOW_TOL,
                "passed": flow.max_deviation <= NORM_FLOW_TOL }),
        json!({ "name": "edge_occupation", "value": traj.aborted, "tolerance": evolve::EDGE_THRESHOLD,
                "passed": traj.aborted.is_none() }),
    ];
    let mut decay_rows = Vec::new();
    if alpha_oracle {
        let mut worst: f64 = 0.0;
        for s in &traj.samples {
            let p = traj.norms[s.step];
            let want = (-2.0 * c.alpha * s.time).exp();
            let rel = (p - want).abs() / want;
            worst = worst.max(rel);
            decay_rows.push(vec![
                c.alpha.to_string(),
                s.time.to_string(),
                p.to_string(),
                want.to_string(),
                rel.to_string(),
            ]);
        }
        checks.push(json!({ "name": "decay_law", "value": worst, "tolerance": DECAY_TOL, "passed": worst <= DECAY_TOL }));
    } else {
        checks.push(json!({ "name": "ground_state_initial_rate", "value": rate0, "tolerance": PARITY_RATE_TOL,
                            "passed": rate0.abs() <= PARITY_RATE_TOL }));
    }
    let passed = checks.iter().all(|v| v["passed"] == true);
    let h_i = fockspec::anti_hermitian_generator(&h);
    let samples: Vec<Value> = traj
        .samples
        .iter()
        .map(|s| {
            json!([
                s.time,
                traj.norms[s.step],
                evolve::expectation(&h_i, &s.state)
            ])
        })
        .collect();
    let trends: Vec<Value> = map
        .series
        .iter()
        .map(|s| json!({ "state": s.state, "final": s.occupations.last(), "net_change": s.net_change, "trend": s.trend }))
        .collect();
    let mut buf = Vec::new();
    let prov = [
        ("mode", c.mode.to_string()),
        (
            "model",
            if alpha_oracle {
                "alpha_oracle".to_string()
            } else {
                c.model.to_string()
            },
        ),
        ("theta", c.theta.to_string()),
        ("n_max", c.n_max.to_string()),
        ("method", c.method.to_string()),
    ];
    evolve::write_trajectory_csv(&mut buf, &traj, &h, &states, &prov)?;
    let mut tables = vec![("evolve".to_string(), buf)];
    if alpha_oracle {
        tables.push((
            "evolve-decay".into(),
            csv_bytes(
                &["alpha", "t", "P", "exp_minus_2_alpha_t", "relative_error"],
                decay_rows,
            )?,
        ));
    }
    let summary = format!(
        "P(T) = {:.12}, norm-flow deviation {:.3e}, dP/dt(0) = {:.3e}{}",
        traj.norms.last().copied().unwrap_or(f64::NAN),
        flow.max_deviation,
        rate0,
        if traj.aborted.is_some() {
            ", stopped at the truncation edge"
        } else {
            ""
        }
    );
    Ok(CommandOutput {
        passed,
        summary,
        result: json!({
            "metadata": {
                "theta": if alpha_oracle { 0.0 } else { c.theta },
                "alpha": alpha_oracle.then_some(c.alpha),
                "n_max": c.n_max,
                "dt": c.dt,
                "T": c.t_final,
                "method": c.method,
                "mode": c.mode,
                "model": if alpha_oracle { json!("alpha_oracle") } else { json!(c.model) },
                "initial_state": [0, 0, 0],
                "sample_stride": TRAJECTORY_STRIDE,
            },
            "checks": checks,
            "final_norm": traj.norms.last(),
            "initial_rate": rate0,
            "aborted": traj.aborted,
            "norm_flow_max_deviation": flow.max_deviation,
            "samples": { "columns": ["t", "P", "re_h_i"], "rows": samples },
            "occupations": trends,
        }),
        tables,
    })
}
