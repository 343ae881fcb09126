//! Coupled ground states and β-sweeps.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::energy::{j_energy, EnergyBreakdown, FieldPair, Snapshot, SystemParams};
use crate::error::{Error, Result};
use crate::grid::{Field, GridSpec};
use crate::kernel::{KernelTable, Quadrature};
use crate::nehari::{beta_thresholds, FiberCoefficients, Thresholds};
use crate::optimize::{Component, Engine, Outcome};
use crate::scalar::{solve_scalar_with, ScalarGroundState};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    SteepestDescent,
    #[default]
    ConjugateGradient,
}

/// Gaussian `amplitude · e^{−|x−center|²/(2 width²)}`; a missing width means
/// `1/√λ` of the component.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: [f64; 2],
    #[serde(default)]
    pub width: Option<f64>,
    pub amplitude: f64,
}

impl Bump {
    pub fn centered(amplitude: f64) -> Self {
        Bump {
            center: [0.0, 0.0],
            width: None,
            amplitude,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitSpec {
    pub u: Vec<Bump>,
    pub v: Vec<Bump>,
}

/// Unequal amplitudes: with equal parameters, `u = v` is preserved by the
/// iteration and would pin it to the synchronized branch.
impl Default for InitSpec {
    fn default() -> Self {
        InitSpec {
            u: vec![Bump::centered(1.0)],
            v: vec![Bump::centered(0.5)],
        }
    }
}

impl InitSpec {
    pub fn swapped(&self) -> Self {
        InitSpec {
            u: self.v.clone(),
            v: self.u.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Stop once `‖r_u‖/‖u‖` and `‖r_v‖/‖v‖` are both below this.
    pub tol_grad: f64,
    /// Accept a final state only if `|N| ≤ tol_nehari · ‖(u,v)‖²_H`.
    pub tol_nehari: f64,
    pub shrink: f64,
    pub armijo: f64,
    pub max_step: f64,
    pub method: Method,
    pub init: InitSpec,
    pub seed: u64,
    /// Number of starts; starts after the first perturb `init` randomly.
    pub multistart: usize,
    /// Relative size of multistart perturbations.
    pub perturbation: f64,
    /// Recenter every this many iterations (0 disables).
    pub recenter_every: usize,
    /// Mass ratio below which the smaller component is dropped.
    pub semitrivial_ratio: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iters: 20_000,
            tol_grad: 1e-8,
            tol_nehari: 1e-8,
            shrink: 0.5,
            armijo: 1e-4,
            max_step: 4.0,
            method: Method::ConjugateGradient,
            init: InitSpec::default(),
            seed: 0,
            multistart: 1,
            perturbation: 0.2,
            recenter_every: 50,
            semitrivial_ratio: 1e-6,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if !(self.tol_grad > 0.0) {
            return bad("tol_grad must be positive");
        }
        if !(self.tol_nehari > 0.0) {
            return bad("tol_nehari must be positive");
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return bad("shrink must lie in (0, 1)");
        }
        if !(self.armijo > 0.0 && self.armijo < 1.0) {
            return bad("armijo must lie in (0, 1)");
        }
        if !(self.max_step > 0.0) {
            return bad("max_step must be positive");
        }
        if self.multistart == 0 {
            return bad("multistart must be at least 1");
        }
        if !(self.perturbation >= 0.0) {
            return bad("perturbation must be nonnegative");
        }
        if !(self.semitrivial_ratio > 0.0 && self.semitrivial_ratio < 1.0) {
            return bad("semitrivial_ratio must lie in (0, 1)");
        }
        for b in self.init.u.iter().chain(&self.init.v) {
            if !b.amplitude.is_finite() || !b.center.iter().all(|c| c.is_finite()) {
                return bad("init bumps must be finite");
            }
            if let Some(w) = b.width {
                if !(w > 0.0 && w.is_finite()) {
                    return bad("init bump widths must be positive");
                }
            }
        }
        Ok(())
    }
}

fn render(spec: GridSpec, bumps: &[Bump], lambda: f64) -> Field {
    let default_width = 1.0 / lambda.sqrt();
    Field::from_fn(spec, |x, y| {
        bumps
            .iter()
            .map(|b| {
                let w = b.width.unwrap_or(default_width);
                let d2 = (x - b.center[0]).powi(2) + (y - b.center[1]).powi(2);
                b.amplitude * (-d2 / (2.0 * w * w)).exp()
            })
            .sum()
    })
}

/// Builds the initial pair and scales it so that the log term dominates the
/// fiber map, which keeps the first projection close to `t = 1`.
pub(crate) fn initial_pair(spec: GridSpec, params: &SystemParams, init: &InitSpec, table: &KernelTable, scalar: bool) -> Result<FieldPair> {
    let u = render(spec, &init.u, params.lambda1);
    let v = if scalar {
        Field::zeros(spec)
    } else {
        render(spec, &init.v, params.lambda2)
    };
    let pair = FieldPair::new(u, v)?.abs();
    if pair.is_zero() {
        return Err(Error::InvalidArgument("initial guess is identically zero".into()));
    }
    let s = Snapshot::of_pair(&pair, table)?;
    let c = FiberCoefficients::from_snapshot(&s, params);
    if c.a0 < 0.0 {
        return Ok(pair);
    }
    let scale = (10.0 * 2.0 * std::f64::consts::PI * (c.kin + c.mass) / c.logmass).sqrt();
    Ok(pair.scaled(scale))
}

fn perturbed(init: &InitSpec, rng: &mut ChaCha8Rng, size: f64, lambdas: (f64, f64)) -> InitSpec {
    let mut jitter = |bumps: &[Bump], lambda: f64| -> Vec<Bump> {
        bumps
            .iter()
            .map(|b| {
                let w = b.width.unwrap_or(1.0 / lambda.sqrt());
                Bump {
                    center: [
                        b.center[0] + size * w * rng.gen_range(-1.0..1.0),
                        b.center[1] + size * w * rng.gen_range(-1.0..1.0),
                    ],
                    width: Some(w * (1.0 + size * rng.gen_range(-1.0..1.0))),
                    amplitude: b.amplitude * (1.0 + size * rng.gen_range(-1.0..1.0)),
                }
            })
            .collect()
    };
    InitSpec {
        u: jitter(&init.u, lambdas.0),
        v: jitter(&init.v, lambdas.1),
    }
}

/// The configured start followed by `multistart − 1` seeded perturbations.
pub(crate) fn starts(cfg: &SolverConfig, params: &SystemParams) -> Vec<InitSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = vec![cfg.init.clone()];
    for _ in 1..cfg.multistart {
        out.push(perturbed(&cfg.init, &mut rng, cfg.perturbation, (params.lambda1, params.lambda2)));
    }
    out
}

pub(crate) fn check_outcome(o: &Outcome, cfg: &SolverConfig) -> Result<()> {
    if !o.converged || o.nehari_rel > cfg.tol_nehari {
        return Err(Error::NonConvergence {
            iters: o.iters,
            residual_u: o.residual_u,
            residual_v: o.residual_v,
            nehari: o.nehari_rel,
        });
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StateKind {
    Nontrivial,
    /// `u` vanished; the state is `(0, v)`.
    SemitrivialV,
    /// `v` vanished; the state is `(u, 0)`.
    SemitrivialU,
}

impl StateKind {
    pub fn is_semitrivial(&self) -> bool {
        !matches!(self, StateKind::Nontrivial)
    }
}

#[derive(Clone, Debug)]
pub struct CoupledGroundState {
    pub pair: FieldPair,
    pub params: SystemParams,
    pub c_level: f64,
    pub breakdown: EnergyBreakdown,
    pub kind: StateKind,
    pub iters: usize,
    pub residual_u: f64,
    pub residual_v: f64,
    pub nehari_rel: f64,
    /// Smallest `‖(u,v)‖²_H` seen along accepted iterates.
    pub h_floor: f64,
    /// Index of the start that produced the state.
    pub start: usize,
}

/// Summary of a state without the fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateRecord {
    pub params: SystemParams,
    pub c_level: f64,
    pub breakdown: EnergyBreakdown,
    pub kind: StateKind,
    pub iters: usize,
    pub residual_u: f64,
    pub residual_v: f64,
    pub nehari_rel: f64,
    pub h_floor: f64,
    pub start: usize,
}

impl CoupledGroundState {
    pub fn record(&self) -> StateRecord {
        StateRecord {
            params: self.params,
            c_level: self.c_level,
            breakdown: self.breakdown,
            kind: self.kind,
            iters: self.iters,
            residual_u: self.residual_u,
            residual_v: self.residual_v,
            nehari_rel: self.nehari_rel,
            h_floor: self.h_floor,
            start: self.start,
        }
    }

    /// Rebuilds a state from stored fields, recomputing every diagnostic.
    pub fn from_pair(pair: FieldPair, params: SystemParams, table: &KernelTable) -> Result<Self> {
        let breakdown = j_energy(&pair, &params, table)?;
        let (ru, rv) = crate::energy::el_residual(&pair, &params, table)?;
        let rel = |r: &Field, x: &Field| {
            let nx = crate::grid::l2_norm_sq(x).sqrt();
            if nx == 0.0 {
                0.0
            } else {
                crate::grid::l2_norm_sq(r).sqrt() / nx
            }
        };
        let kind = match (breakdown.mass_u == 0.0, breakdown.mass_v == 0.0) {
            (false, false) => StateKind::Nontrivial,
            (true, _) => StateKind::SemitrivialV,
            (false, true) => StateKind::SemitrivialU,
        };
        Ok(CoupledGroundState {
            residual_u: rel(&ru, pair.u()),
            residual_v: rel(&rv, pair.v()),
            pair,
            params,
            c_level: breakdown.j,
            nehari_rel: breakdown.n.abs() / breakdown.h_norm_sq,
            h_floor: breakdown.h_norm_sq,
            breakdown,
            kind,
            iters: 0,
            start: 0,
        })
    }
}

fn finish(o: Outcome, params: SystemParams, table: &KernelTable, start: usize) -> Result<CoupledGroundState> {
    let breakdown = j_energy(&o.pair, &params, table)?;
    let kind = match o.dropped {
        None => StateKind::Nontrivial,
        Some(Component::U) => StateKind::SemitrivialV,
        Some(Component::V) => StateKind::SemitrivialU,
    };
    Ok(CoupledGroundState {
        pair: o.pair,
        params,
        c_level: breakdown.j,
        breakdown,
        kind,
        iters: o.iters,
        residual_u: o.residual_u,
        residual_v: o.residual_v,
        nehari_rel: o.nehari_rel,
        h_floor: o.h_floor,
        start,
    })
}

/// Minimizes `J` on `𝒩` from every configured start and keeps the lowest level.
pub fn solve_coupled_with(params: &SystemParams, table: &KernelTable, cfg: &SolverConfig) -> Result<CoupledGroundState> {
    params.validate()?;
    cfg.validate()?;
    let engine = Engine::new(*params, table, cfg, false);
    let mut best: Option<CoupledGroundState> = None;
    let mut last_err = None;
    for (k, init) in starts(cfg, params).iter().enumerate() {
        let pair = initial_pair(table.spec(), params, init, table, false)?;
        let outcome = engine.run(&pair)?;
        if let Err(e) = check_outcome(&outcome, cfg) {
            last_err = Some(e);
            continue;
        }
        let state = finish(outcome, *params, table, k)?;
        if best.as_ref().is_none_or(|b| state.c_level < b.c_level) {
            best = Some(state);
        }
    }
    best.ok_or_else(|| last_err.expect("at least one start"))
}

/// Builds the band-limited kernel table for `spec` and solves.
pub fn solve_coupled(params: &SystemParams, spec: GridSpec, cfg: &SolverConfig) -> Result<CoupledGroundState> {
    let table = KernelTable::new(spec, Quadrature::BandLimited);
    solve_coupled_with(params, &table, cfg)
}

/// Single start from a given pair (warm start).
pub fn solve_coupled_from(params: &SystemParams, start: &FieldPair, table: &KernelTable, cfg: &SolverConfig) -> Result<CoupledGroundState> {
    params.validate()?;
    cfg.validate()?;
    let engine = Engine::new(*params, table, cfg, false);
    let outcome = engine.run(start)?;
    check_outcome(&outcome, cfg)?;
    finish(outcome, *params, table, 0)
}

/// Scalar ground states for both equations and the thresholds built on them.
#[derive(Clone, Debug)]
pub struct ScalarReferences {
    pub u1: ScalarGroundState,
    pub u2: ScalarGroundState,
    pub thresholds: Thresholds,
}

impl ScalarReferences {
    /// `J(u₁, 0)`.
    pub fn j_u1(&self) -> f64 {
        self.u1.energy
    }

    /// `J(0, u₂)`.
    pub fn j_u2(&self) -> f64 {
        self.u2.energy
    }
}

/// Solves the two scalar problems; a single solve when they coincide.
pub fn scalar_references(params: &SystemParams, table: &KernelTable, cfg: &SolverConfig) -> Result<ScalarReferences> {
    let u1 = solve_scalar_with(params.lambda1, params.mu1, table, cfg)?;
    let u2 = if params.lambda1 == params.lambda2 && params.mu1 == params.mu2 {
        u1.clone()
    } else {
        solve_scalar_with(params.lambda2, params.mu2, table, cfg)?
    };
    let thresholds = beta_thresholds(&u1.u, &u2.u, params)?;
    Ok(ScalarReferences { u1, u2, thresholds })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub beta: f64,
    pub c: Option<f64>,
    pub j_semitrivial_u: f64,
    pub j_semitrivial_v: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub semitrivial_flag: Option<bool>,
    pub iters: usize,
    pub residual: Option<f64>,
    pub error: Option<String>,
}

/// Solves along increasing β, warm-starting each point from the previous
/// state. The first point and any point after a failure start cold.
pub fn sweep_beta(params_base: &SystemParams, beta_list: &[f64], table: &KernelTable, cfg: &SolverConfig) -> Result<(ScalarReferences, Vec<SweepRow>)> {
    if beta_list.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidArgument("beta list must be strictly increasing".into()));
    }
    let refs = scalar_references(params_base, table, cfg)?;
    let mut rows = Vec::with_capacity(beta_list.len());
    let mut warm: Option<FieldPair> = None;
    for &beta in beta_list {
        let mut row = SweepRow {
            beta,
            c: None,
            j_semitrivial_u: refs.j_u1(),
            j_semitrivial_v: refs.j_u2(),
            beta1: refs.thresholds.beta1,
            beta2: refs.thresholds.beta2,
            semitrivial_flag: None,
            iters: 0,
            residual: None,
            error: None,
        };
        let result = params_base.with_beta(beta).and_then(|p| {
            match warm.as_ref().filter(|w| !w.u().values().iter().all(|&x| x == 0.0) && !w.v().values().iter().all(|&x| x == 0.0)) {
                Some(w) => solve_coupled_from(&p, w, table, cfg),
                None => solve_coupled_with(&p, table, cfg),
            }
        });
        match result {
            Ok(state) => {
                row.c = Some(state.c_level);
                row.semitrivial_flag = Some(state.kind.is_semitrivial());
                row.iters = state.iters;
                row.residual = Some(state.residual_u.max(state.residual_v));
                warm = Some(state.pair);
            }
            Err(e) => {
                row.error = Some(e.to_string());
                warm = None;
            }
        }
        rows.push(row);
    }
    Ok((refs, rows))
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.17e}")).unwrap_or_default()
}

pub fn write_sweep_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    let mut s = String::from("beta,c,j_semitrivial_u,j_semitrivial_v,beta1,beta2,semitrivial_flag,iters,residual\n");
    for r in rows {
        s.push_str(&format!(
            "{:.17e},{},{:.17e},{:.17e},{:.17e},{:.17e},{},{},{}\n",
            r.beta,
            fmt_opt(r.c),
            r.j_semitrivial_u,
            r.j_semitrivial_v,
            r.beta1,
            r.beta2,
            r.semitrivial_flag.map(|f| f.to_string()).unwrap_or_default(),
            r.iters,
            fmt_opt(r.residual),
        ));
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    fn table() -> KernelTable {
        KernelTable::new(make_grid(8.0, 96).unwrap(), Quadrature::BandLimited)
    }

    fn offset_init() -> InitSpec {
        InitSpec {
            u: vec![Bump {
                center: [0.6, 0.0],
                width: Some(1.2),
                amplitude: 1.0,
            }],
            v: vec![Bump {
                center: [-0.3, 0.4],
                width: Some(0.9),
                amplitude: 0.7,
            }],
        }
    }

    #[test]
    fn coupled_state_identities() {
        let t = table();
        let p = SystemParams::new(1.0, 2.0, 1.0, 1.0, 2.0).unwrap();
        let s = solve_coupled_with(&p, &t, &SolverConfig::default()).unwrap();
        assert_eq!(s.kind, StateKind::Nontrivial);
        let b = &s.breakdown;
        assert!(b.n.abs() <= 1e-8 * b.h_norm_sq);
        assert!(((s.c_level - 0.25 * b.h_norm_sq) / s.c_level).abs() <= 1e-8);
        assert!(s.c_level > 0.0);
        assert!(s.residual_u <= 1e-8 && s.residual_v <= 1e-8);
        assert!(s.h_floor > 0.0 && s.h_floor <= b.h_norm_sq * (1.0 + 1e-12));
        let again = CoupledGroundState::from_pair(s.pair.clone(), p, &t).unwrap();
        assert_eq!(again.c_level, s.c_level);
    }

    #[test]
    fn swapping_components_and_inits_preserves_level() {
        let t = table();
        let p = SystemParams::new(1.0, 1.0, 1.0, 1.0, 1.5).unwrap();
        let cfg = SolverConfig {
            init: offset_init(),
            ..SolverConfig::default()
        };
        let a = solve_coupled_with(&p, &t, &cfg).unwrap();
        let swapped = SolverConfig {
            init: offset_init().swapped(),
            ..SolverConfig::default()
        };
        let b = solve_coupled_with(&p.swapped(), &t, &swapped).unwrap();
        assert!(((a.c_level - b.c_level) / a.c_level).abs() <= 1e-8);
    }

    #[test]
    fn weak_coupling_collapses_to_one_component() {
        let t = table();
        let p = SystemParams::new(1.0, 1.0, 1.0, 1.0, 0.5).unwrap();
        let cfg = SolverConfig {
            init: offset_init(),
            ..SolverConfig::default()
        };
        let s = solve_coupled_with(&p, &t, &cfg).unwrap();
        assert!(s.kind.is_semitrivial(), "{:?}", s.kind);
        let scalar = solve_scalar_with(1.0, 1.0, &t, &SolverConfig::default()).unwrap();
        assert!(((s.c_level - scalar.energy) / scalar.energy).abs() < 1e-8);
    }

    #[test]
    fn solves_are_deterministic() {
        let t = table();
        let p = SystemParams::new(1.0, 2.0, 1.0, 1.0, 2.0).unwrap();
        let cfg = SolverConfig {
            multistart: 2,
            seed: 7,
            ..SolverConfig::default()
        };
        let a = solve_coupled_with(&p, &t, &cfg).unwrap();
        let b = solve_coupled_with(&p, &t, &cfg).unwrap();
        assert_eq!(a.pair, b.pair);
        assert_eq!(a.record(), b.record());
    }

    #[test]
    fn sweep_rows_share_scalar_columns() {
        let t = table();
        let p = SystemParams::new(1.0, 2.0, 1.0, 1.0, 1.0).unwrap();
        let (refs, rows) = sweep_beta(&p, &[1.6, 1.8, 2.0], &t, &SolverConfig::default()).unwrap();
        assert_eq!(rows.len(), 3);
        for r in &rows {
            assert_eq!(r.j_semitrivial_u, refs.j_u1());
            assert_eq!(r.j_semitrivial_v, refs.j_u2());
            assert_eq!(r.beta1, refs.thresholds.beta1);
            assert_eq!(r.beta2, refs.thresholds.beta2);
            assert!(r.error.is_none(), "{:?}", r.error);
            assert_eq!(r.semitrivial_flag, Some(false));
        }
        for w in rows.windows(2) {
            assert!(w[1].c.unwrap() <= w[0].c.unwrap() * (1.0 + 1e-10));
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sweep.csv");
        write_sweep_csv(&rows, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "beta,c,j_semitrivial_u,j_semitrivial_v,beta1,beta2,semitrivial_flag,iters,residual"
        );
        assert_eq!(lines.count(), 3);
    }

    #[test]
    fn sweep_rejects_unsorted_betas() {
        let t = table();
        let p = SystemParams::new(1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        assert!(sweep_beta(&p, &[2.0, 1.0], &t, &SolverConfig::default()).is_err());
    }

    #[test]
    fn config_validation() {
        let ok: SolverConfig = serde_json::from_str(r#"{"max_iters": 10, "method": "steepest-descent"}"#).unwrap();
        assert_eq!(ok.max_iters, 10);
        assert_eq!(ok.method, Method::SteepestDescent);
        assert!(serde_json::from_str::<SolverConfig>(r#"{"tol": 1}"#).is_err());
        for bad in [
            SolverConfig { shrink: 1.0, ..SolverConfig::default() },
            SolverConfig { tol_grad: 0.0, ..SolverConfig::default() },
            SolverConfig { multistart: 0, ..SolverConfig::default() },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn multistart_perturbations_are_seeded() {
        let p = SystemParams::new(1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        let cfg = SolverConfig {
            multistart: 3,
            seed: 11,
            ..SolverConfig::default()
        };
        let a = starts(&cfg, &p);
        assert_eq!(a, starts(&cfg, &p));
        assert_eq!(a[0], cfg.init);
        assert_ne!(a[1], a[2]);
        let other = starts(&SolverConfig { seed: 12, ..cfg.clone() }, &p);
        assert_ne!(a[1], other[1]);
    }
}
