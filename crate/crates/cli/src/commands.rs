use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use loghartree::analysis::{emit_report, verify, OrderingSection, Subject, Tolerances, VerificationReport};
use loghartree::io::{load_coupled, load_field, load_scalar, save_coupled, save_scalar};
use loghartree::nehari::{beta_thresholds, h_curve, write_h_curve_csv, Thresholds};
use loghartree::scalar::{solve_scalar_with, ScalarGroundState};
use loghartree::solver::{scalar_references, solve_coupled_with, sweep_beta, write_sweep_csv, ScalarReferences, SweepRow};
use loghartree::{KernelTable, Quadrature, SystemParams};
use serde::Serialize;

use crate::config::RunConfig;
use crate::selftest;

/// Exit status of a command that ran to completion.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Pass,
    CheckFailed,
}

impl Status {
    pub fn code(self) -> i32 {
        match self {
            Status::Pass => 0,
            Status::CheckFailed => 1,
        }
    }

    fn from_pass(pass: bool) -> Self {
        if pass {
            Status::Pass
        } else {
            Status::CheckFailed
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Timing {
    pub phase: String,
    pub seconds: f64,
}

/// Per-command bookkeeping for the manifest.
pub struct Ctx {
    pub command: &'static str,
    pub out: PathBuf,
    pub threads: usize,
    pub timings: Vec<Timing>,
    started: Instant,
}

impl Ctx {
    pub fn new(command: &'static str, out: PathBuf, threads: usize) -> Self {
        Ctx {
            command,
            out,
            threads,
            timings: Vec::new(),
            started: Instant::now(),
        }
    }

    fn phase<T>(&mut self, name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let t = Instant::now();
        let r = f();
        self.timings.push(Timing {
            phase: name.into(),
            seconds: t.elapsed().as_secs_f64(),
        });
        r
    }

    pub fn total_seconds(&self) -> f64 {
        self.started.elapsed().as_secs_f64()
    }
}

#[derive(Serialize)]
struct Versions {
    loghartree: &'static str,
    target: String,
    debug_assertions: bool,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    args: Vec<String>,
    config: Option<RunConfig>,
    versions: Versions,
    threads: usize,
    timings: &'a [Timing],
    total_seconds: f64,
    exit_code: i32,
    error: Option<String>,
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

/// Writes `manifest.json` (and `failure.json` for a failed run) into the output directory.
pub fn write_manifest(ctx: &Ctx, config: Option<&RunConfig>, exit_code: i32, error: Option<String>) -> Result<()> {
    std::fs::create_dir_all(&ctx.out).with_context(|| format!("creating {}", ctx.out.display()))?;
    let config = config.map(|c| c.resolved().unwrap_or_else(|_| c.clone()));
    if let Some(e) = &error {
        write_json(
            &serde_json::json!({ "command": ctx.command, "pass": false, "error": e }),
            &ctx.out.join("failure.json"),
        )?;
    }
    let m = Manifest {
        command: ctx.command,
        args: std::env::args().collect(),
        config,
        versions: Versions {
            loghartree: env!("CARGO_PKG_VERSION"),
            target: format!("{}-{}", std::env::consts::ARCH, std::env::consts::OS),
            debug_assertions: cfg!(debug_assertions),
        },
        threads: ctx.threads,
        timings: &ctx.timings,
        total_seconds: ctx.total_seconds(),
        exit_code,
        error,
    };
    write_json(&m, &ctx.out.join("manifest.json"))
}

fn prepare(cfg: &RunConfig) -> Result<KernelTable> {
    std::fs::create_dir_all(&cfg.output).with_context(|| format!("creating {}", cfg.output.display()))?;
    Ok(KernelTable::new(cfg.spec()?, Quadrature::BandLimited))
}

fn print_report(report: &VerificationReport) {
    for c in &report.checks {
        println!(
            "{} {:<28} defect {:.3e}  tolerance {:.3e}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.defect,
            c.tolerance
        );
    }
}

pub fn cmd_scalar(cfg: &RunConfig, ctx: &mut Ctx) -> Result<Status> {
    let table = ctx.phase("kernel", || prepare(cfg))?;
    let p = cfg.params.uncoupled()?;
    let state = ctx.phase("solve", || Ok(solve_scalar_with(p.lambda1, p.mu1, &table, &cfg.solver)?))?;
    save_scalar(&state, &cfg.output, "u")?;
    let report = ctx.phase("verify", || Ok(verify(Subject::Scalar(&state), None, &table, &cfg.tolerances)?))?;
    emit_report(&report, &cfg.output.join("report.json"))?;
    println!(
        "J = {:.12e}  iters = {}  nehari defect = {:.3e}",
        state.energy, state.iters, state.nehari_defect
    );
    print_report(&report);
    Ok(Status::from_pass(report.pass))
}

#[derive(Serialize)]
struct Ingredients {
    grad: f64,
    mass: f64,
    /// `‖∇u‖² + λ₁‖u‖²`.
    b_lambda1: f64,
    /// `‖∇u‖² + λ₂‖u‖²`.
    b_lambda2: f64,
    energy: f64,
}

#[derive(Serialize)]
struct ThresholdsOut {
    beta1: f64,
    beta2: f64,
    u1: Ingredients,
    u2: Ingredients,
}

fn thresholds_out(t: &Thresholds, p: &SystemParams, e1: f64, e2: f64) -> ThresholdsOut {
    let ing = |g: f64, m: f64, energy: f64| Ingredients {
        grad: g,
        mass: m,
        b_lambda1: g + p.lambda1 * m,
        b_lambda2: g + p.lambda2 * m,
        energy,
    };
    ThresholdsOut {
        beta1: t.beta1,
        beta2: t.beta2,
        u1: ing(t.grad_u1, t.mass_u1, e1),
        u2: ing(t.grad_u2, t.mass_u2, e2),
    }
}

fn save_references(refs: &ScalarReferences, p: &SystemParams, out: &Path) -> Result<()> {
    save_scalar(&refs.u1, out, "u1")?;
    save_scalar(&refs.u2, out, "u2")?;
    write_json(
        &thresholds_out(&refs.thresholds, p, refs.j_u1(), refs.j_u2()),
        &out.join("thresholds.json"),
    )
}

pub fn cmd_thresholds(cfg: &RunConfig, ctx: &mut Ctx) -> Result<Status> {
    let table = ctx.phase("kernel", || prepare(cfg))?;
    let p = cfg.params.uncoupled()?;
    let refs = ctx.phase("scalar-solves", || Ok(scalar_references(&p, &table, &cfg.solver)?))?;
    save_references(&refs, &p, &cfg.output)?;
    let mut pass = true;
    for (name, s) in [("u1", &refs.u1), ("u2", &refs.u2)] {
        let report = verify(Subject::Scalar(s), None, &table, &cfg.tolerances)?;
        emit_report(&report, &cfg.output.join(format!("report_{name}.json")))?;
        println!("{name}: J = {:.12e}", s.energy);
        print_report(&report);
        pass &= report.pass;
    }
    let t = &refs.thresholds;
    println!("beta1 = {:.15e}", t.beta1);
    println!("beta2 = {:.15e}", t.beta2);
    println!(
        "b(u1): grad {:.12e} mass {:.12e}; b(u2): grad {:.12e} mass {:.12e}",
        t.grad_u1, t.mass_u1, t.grad_u2, t.mass_u2
    );
    Ok(Status::from_pass(pass))
}

const EXPLORATORY: &str = "beta does not exceed max(beta1, beta2): exploratory regime";

/// Verifies a coupled state; the energy ordering is only asserted above both thresholds.
fn verify_coupled(
    state: &loghartree::solver::CoupledGroundState,
    u1: &ScalarGroundState,
    u2: &ScalarGroundState,
    thresholds: &Thresholds,
    table: &KernelTable,
    tol: &Tolerances,
) -> Result<VerificationReport> {
    if state.params.beta > thresholds.max() {
        return Ok(verify(Subject::Coupled(state), Some((u1, u2)), table, tol)?);
    }
    let mut report = verify(Subject::Coupled(state), None, table, tol)?;
    report.ordering = OrderingSection::Skipped {
        reason: EXPLORATORY.into(),
    };
    Ok(report)
}

pub fn cmd_coupled(cfg: &RunConfig, ctx: &mut Ctx) -> Result<Status> {
    let beta_spec = cfg.params.beta()?;
    let table = ctx.phase("kernel", || prepare(cfg))?;
    let base = cfg.params.uncoupled()?;
    let refs = ctx.phase("scalar-solves", || Ok(scalar_references(&base, &table, &cfg.solver)?))?;
    let p = cfg.params.with_beta(beta_spec.resolve(&refs.thresholds))?;
    save_references(&refs, &p, &cfg.output)?;
    let state = ctx.phase("solve", || Ok(solve_coupled_with(&p, &table, &cfg.solver)?))?;
    save_coupled(&state, &cfg.output)?;
    ctx.phase("h-curve", || {
        // built on the lower semitrivial level
        let (u, hp) = if refs.j_u1() <= refs.j_u2() {
            (&refs.u1.u, p)
        } else {
            (&refs.u2.u, p.swapped())
        };
        let rhos: Vec<f64> = (0..=50).map(|k| 0.01 * k as f64).collect();
        Ok(write_h_curve_csv(&h_curve(u, &rhos, &hp, &table)?, &cfg.output.join("h_curve.csv"))?)
    })?;
    let report = ctx.phase("verify", || {
        verify_coupled(&state, &refs.u1, &refs.u2, &refs.thresholds, &table, &cfg.tolerances)
    })?;
    emit_report(&report, &cfg.output.join("report.json"))?;
    println!(
        "beta = {:.12e}  beta1 = {:.12e}  beta2 = {:.12e}",
        p.beta, refs.thresholds.beta1, refs.thresholds.beta2
    );
    println!(
        "c = {:.12e}  J(u1,0) = {:.12e}  J(0,u2) = {:.12e}  kind = {}  iters = {}",
        state.c_level,
        refs.j_u1(),
        refs.j_u2(),
        report.kind,
        state.iters
    );
    print_report(&report);
    Ok(Status::from_pass(report.pass))
}

#[derive(Serialize)]
struct SweepOut<'a> {
    thresholds: ThresholdsOut,
    rows: &'a [SweepRow],
    /// Reported only; `c` is expected but not required to decrease in `β`.
    c_nonincreasing: bool,
    /// Rows above both thresholds with `c < min{J(u₁,0), J(0,u₂)}` and both components present.
    ordering_holds_above_thresholds: bool,
}

pub fn cmd_sweep(cfg: &RunConfig, ctx: &mut Ctx) -> Result<Status> {
    let Some(sweep) = &cfg.sweep else {
        bail!("invalid argument: sweep.betas is required for this command");
    };
    let table = ctx.phase("kernel", || prepare(cfg))?;
    let base = cfg.params.uncoupled()?;
    let (refs, rows) = ctx.phase("sweep", || Ok(sweep_beta(&base, &sweep.betas, &table, &cfg.solver)?))?;
    write_sweep_csv(&rows, &cfg.output.join("sweep.csv"))?;

    let m = refs.j_u1().min(refs.j_u2());
    let above = |r: &&SweepRow| r.beta > refs.thresholds.max();
    let ordering = rows
        .iter()
        .filter(above)
        .all(|r| r.semitrivial_flag == Some(false) && r.c.is_some_and(|c| c < m));
    let cs: Vec<f64> = rows.iter().filter_map(|r| r.c).collect();
    let monotone = cs.windows(2).all(|w| w[1] <= w[0]);
    write_json(
        &SweepOut {
            thresholds: thresholds_out(&refs.thresholds, &base, refs.j_u1(), refs.j_u2()),
            rows: &rows,
            c_nonincreasing: monotone,
            ordering_holds_above_thresholds: ordering,
        },
        &cfg.output.join("sweep.json"),
    )?;
    for r in &rows {
        match (&r.error, r.c) {
            (Some(e), _) => println!("beta {:.6e}  FAILED: {e}", r.beta),
            (None, Some(c)) => println!(
                "beta {:.6e}  c {:.12e}  semitrivial {}  iters {}",
                r.beta,
                c,
                r.semitrivial_flag.unwrap_or(false),
                r.iters
            ),
            _ => {}
        }
    }
    println!(
        "{} ordering above thresholds; c non-increasing: {monotone}",
        if ordering { "PASS" } else { "FAIL" }
    );
    let errors = rows.iter().any(|r| r.error.is_some());
    Ok(Status::from_pass(ordering && !errors))
}

/// Verifies stored states: a coupled directory (`state.json`, `u`, `v`, and
/// optionally `u1`, `u2` references) or a scalar one (`u.state.json`).
pub fn cmd_verify(dir: &Path, tol: &Tolerances, ctx: &mut Ctx) -> Result<Status> {
    std::fs::create_dir_all(&ctx.out).with_context(|| format!("creating {}", ctx.out.display()))?;
    let spec = load_field(&dir.join("u"))?.spec();
    let table = KernelTable::new(spec, Quadrature::BandLimited);
    let report = if dir.join("state.json").exists() {
        let (state, _) = load_coupled(dir, &table)?;
        let has_refs = dir.join("u1.state.json").exists() && dir.join("u2.state.json").exists();
        if has_refs {
            let u1 = load_scalar(dir, "u1", &table)?;
            let u2 = load_scalar(dir, "u2", &table)?;
            let thresholds = beta_thresholds(&u1.u, &u2.u, &state.params)?;
            verify_coupled(&state, &u1, &u2, &thresholds, &table, tol)?
        } else {
            verify(Subject::Coupled(&state), None, &table, tol)?
        }
    } else if dir.join("u.state.json").exists() {
        let state = load_scalar(dir, "u", &table)?;
        verify(Subject::Scalar(&state), None, &table, tol)?
    } else {
        bail!("{}: no state.json or u.state.json", dir.display());
    };
    emit_report(&report, &ctx.out.join("report.json"))?;
    print_report(&report);
    Ok(Status::from_pass(report.pass))
}

pub fn cmd_selftest(seed: u64, ctx: &mut Ctx) -> Result<Status> {
    std::fs::create_dir_all(&ctx.out).with_context(|| format!("creating {}", ctx.out.display()))?;
    let checks = ctx.phase("oracles", || selftest::run_all(seed))?;
    for c in &checks {
        println!(
            "{} {:<16} cases {:>3}  worst {:.3e}  tolerance {:.1e}  {:.2} s",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.cases,
            c.worst,
            c.tolerance,
            c.seconds
        );
    }
    write_json(&checks, &ctx.out.join("selftest.json"))?;
    Ok(Status::from_pass(checks.iter().all(|c| c.pass)))
}
