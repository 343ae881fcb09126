//! Minimization of `J` on the Nehari manifold.
//!
//! Iterates are kept on `𝒩` by the amplitude map `y ↦ s(y)y`, so the method
//! minimizes `φ(y) = J(s(y)y)`, whose gradient at a point of `𝒩` is the
//! Euler–Lagrange residual itself. Directions are preconditioned by
//! `(−Δ + λᵢ)⁻¹`, optionally combined by Polak–Ribière. The pointwise absolute
//! value is taken after every step.

use crate::energy::{FieldPair, Snapshot, SystemParams};
use crate::error::{Error, Result};
use crate::fft;
use crate::grid::{translate, Field, GridSpec};
use crate::kernel::KernelTable;
use crate::nehari::{amplitude_factor, dilation_project};
use crate::solver::{Method, SolverConfig};

const MAX_BACKTRACKS: usize = 40;
/// Energy changes below this many ulps of `J` are treated as noise.
const NOISE_ULPS: f64 = 64.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Component {
    U,
    V,
}

#[derive(Clone, Debug)]
pub(crate) struct Outcome {
    pub pair: FieldPair,
    pub iters: usize,
    pub converged: bool,
    pub residual_u: f64,
    pub residual_v: f64,
    pub nehari_rel: f64,
    /// Smallest `‖(u,v)‖²_H` over accepted iterates.
    pub h_floor: f64,
    /// Set when one component was dropped below the mass-ratio threshold.
    pub dropped: Option<Component>,
}

struct Point {
    u: Vec<f64>,
    v: Vec<f64>,
    snap: Snapshot,
    ru: Vec<f64>,
    rv: Vec<f64>,
    j: f64,
}

pub(crate) struct Engine<'a> {
    params: SystemParams,
    table: &'a KernelTable,
    spec: GridSpec,
    k2: Vec<f64>,
    cfg: &'a SolverConfig,
    /// Whether `v` is identically zero by construction (scalar problems).
    scalar: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn rel_residual(r: &[f64], x: &[f64]) -> f64 {
    let nx = norm(x);
    if nx == 0.0 {
        0.0
    } else {
        norm(r) / nx
    }
}

impl<'a> Engine<'a> {
    pub(crate) fn new(params: SystemParams, table: &'a KernelTable, cfg: &'a SolverConfig, scalar: bool) -> Self {
        let spec = table.spec();
        Engine {
            params,
            table,
            spec,
            k2: spec.wavenumber_sq(),
            cfg,
            scalar,
        }
    }

    fn evaluate(&self, u: Vec<f64>, v: Vec<f64>) -> Result<Point> {
        let snap = Snapshot::new(&u, &v, self.spec, self.table)?;
        let j = snap.j(&self.params);
        if !j.is_finite() {
            return Err(Error::NumericFailure("non-finite energy during minimization".into()));
        }
        let (ru, rv) = snap.residual(&u, &v, self.spec, &self.params);
        Ok(Point { u, v, snap, ru, rv, j })
    }

    /// Scales onto `𝒩`; needs `A₀ < 0`.
    fn normalize(&self, mut u: Vec<f64>, mut v: Vec<f64>) -> Result<Point> {
        let snap = Snapshot::new(&u, &v, self.spec, self.table)?;
        let s = amplitude_factor(snap.h_norm_sq(&self.params), snap.a0(&self.params))?;
        u.iter_mut().for_each(|x| *x *= s);
        v.iter_mut().for_each(|x| *x *= s);
        self.evaluate(u, v)
    }

    /// First projection: amplitude when `A₀ < 0`, otherwise dilation.
    pub(crate) fn project_initial(&self, pair: &FieldPair) -> Result<FieldPair> {
        if pair.is_zero() {
            return Err(Error::InvalidArgument("initial pair is zero".into()));
        }
        let pair = pair.abs();
        let snap = Snapshot::of_pair(&pair, self.table)?;
        if snap.a0(&self.params) < 0.0 {
            return Ok(pair);
        }
        let projected = dilation_project(&pair, &self.params, self.table)?.pair;
        if Snapshot::of_pair(&projected, self.table)?.a0(&self.params) >= 0.0 {
            return Err(Error::NumericFailure(format!(
                "dilation onto the Nehari manifold left A0 >= 0; the grid (N = {}, h = {:.3}) is too coarse for the initial guess",
                self.spec.n(),
                self.spec.spacing()
            )));
        }
        Ok(projected)
    }

    fn precondition(&self, ru: &[f64], rv: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (l1, l2) = (self.params.lambda1, self.params.lambda2);
        fft::apply_multipliers_pair(ru, rv, self.spec.n(), &self.k2, |q| 1.0 / (q + l1), |q| 1.0 / (q + l2))
    }

    fn residuals(&self, p: &Point) -> (f64, f64) {
        (rel_residual(&p.ru, &p.u), rel_residual(&p.rv, &p.v))
    }

    fn converged(&self, p: &Point) -> bool {
        let (a, b) = self.residuals(p);
        a.max(b) <= self.cfg.tol_grad
    }

    fn step(&self, p: &Point, du: &[f64], dv: &[f64], alpha: f64) -> Result<Point> {
        let u: Vec<f64> = p.u.iter().zip(du).map(|(x, d)| (x + alpha * d).abs()).collect();
        let v: Vec<f64> = if self.scalar {
            vec![0.0; p.v.len()]
        } else {
            p.v.iter().zip(dv).map(|(x, d)| (x + alpha * d).abs()).collect()
        };
        self.normalize(u, v)
    }

    /// Translates the pair so the centroid of `u² + v²` sits at the origin.
    fn recenter(&self, p: Point) -> Result<Point> {
        let n = self.spec.n();
        let (mut m, mut cx, mut cy) = (0.0, 0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                let k = i * n + j;
                let d = p.u[k] * p.u[k] + p.v[k] * p.v[k];
                let [x, y] = self.spec.node(i, j);
                m += d;
                cx += d * x;
                cy += d * y;
            }
        }
        if m == 0.0 {
            return Ok(p);
        }
        let shift = [-cx / m, -cy / m];
        if shift[0].hypot(shift[1]) < 1e-3 * self.spec.spacing() {
            return Ok(p);
        }
        let u = translate(&Field::from_values_unchecked(self.spec, p.u), shift).abs();
        let v = translate(&Field::from_values_unchecked(self.spec, p.v), shift).abs();
        self.normalize(u.into_values(), v.into_values())
    }

    fn maybe_drop(&self, p: Point, dropped: &mut Option<Component>) -> Result<Point> {
        if self.scalar || dropped.is_some() {
            return Ok(p);
        }
        let (mu, mv) = (p.snap.mass_u, p.snap.mass_v);
        let ratio = mu.min(mv) / mu.max(mv);
        if ratio >= self.cfg.semitrivial_ratio {
            return Ok(p);
        }
        let (u, v) = if mu < mv {
            *dropped = Some(Component::U);
            (vec![0.0; p.u.len()], p.v)
        } else {
            *dropped = Some(Component::V);
            (p.u, vec![0.0; p.v.len()])
        };
        self.normalize(u, v)
    }

    pub(crate) fn run(&self, init: &FieldPair) -> Result<Outcome> {
        let start = self.project_initial(init)?;
        let (u0, v0) = start.into_parts();
        let mut v0 = v0.into_values();
        if self.scalar {
            v0.iter_mut().for_each(|x| *x = 0.0);
        }
        let mut p = self.normalize(u0.into_values(), v0)?;
        let mut dropped = None;
        let mut h_floor = p.snap.h_norm_sq(&self.params);
        let mut alpha = 1.0;
        let mut prev: Option<(Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, f64)> = None; // d, r·z
        let mut iters = 0;
        let mut converged = self.converged(&p);

        while !converged && iters < self.cfg.max_iters {
            iters += 1;
            let (zu, zv) = self.precondition(&p.ru, &p.rv);
            let rz = dot(&p.ru, &zu) + dot(&p.rv, &zv);
            let mut du: Vec<f64> = zu.iter().map(|x| -x).collect();
            let mut dv: Vec<f64> = zv.iter().map(|x| -x).collect();
            if let (Method::ConjugateGradient, Some((pdu, pdv, pru, prv, prz))) = (self.cfg.method, &prev) {
                let num = rz - dot(pru, &zu) - dot(prv, &zv);
                let beta = (num / prz).max(0.0);
                du.iter_mut().zip(pdu).for_each(|(d, o)| *d += beta * o);
                dv.iter_mut().zip(pdv).for_each(|(d, o)| *d += beta * o);
                if dot(&p.ru, &du) + dot(&p.rv, &dv) >= 0.0 {
                    du = zu.iter().map(|x| -x).collect();
                    dv = zv.iter().map(|x| -x).collect();
                }
            }
            let slope = dot(&p.ru, &du) + dot(&p.rv, &dv);
            let res_now = norm(&p.ru).hypot(norm(&p.rv));

            let mut accepted = None;
            let mut a = alpha;
            for _ in 0..MAX_BACKTRACKS {
                let trial = match self.step(&p, &du, &dv, a) {
                    Ok(t) => t,
                    // the trial left the region A₀ < 0 where 𝒩 is reachable by scaling
                    Err(Error::NotApplicable(_)) => {
                        a *= self.cfg.shrink;
                        continue;
                    }
                    Err(e) => return Err(e),
                };
                let dj = trial.j - p.j;
                let ok = if dj.abs() <= NOISE_ULPS * f64::EPSILON * p.j.abs() {
                    norm(&trial.ru).hypot(norm(&trial.rv)) < res_now
                } else {
                    dj <= self.cfg.armijo * a * slope
                };
                if ok {
                    accepted = Some((trial, a));
                    break;
                }
                a *= self.cfg.shrink;
            }
            let Some((next, a)) = accepted else {
                if prev.is_some() {
                    // restart from the preconditioned gradient
                    prev = None;
                    alpha = 1.0;
                    continue;
                }
                break;
            };
            alpha = (a / self.cfg.shrink).min(self.cfg.max_step);
            prev = Some((du, dv, p.ru.clone(), p.rv.clone(), rz));
            p = next;

            if self.cfg.recenter_every > 0 && iters % self.cfg.recenter_every == 0 {
                p = self.recenter(p)?;
                prev = None;
            }
            let before = dropped;
            p = self.maybe_drop(p, &mut dropped)?;
            if before != dropped {
                prev = None;
            }
            h_floor = h_floor.min(p.snap.h_norm_sq(&self.params));
            converged = self.converged(&p);
        }

        if self.cfg.recenter_every > 0 {
            p = self.recenter(p)?;
            converged = self.converged(&p);
        }
        let (residual_u, residual_v) = self.residuals(&p);
        let h = p.snap.h_norm_sq(&self.params);
        let nehari_rel = p.snap.nehari(&self.params).abs() / h;
        Ok(Outcome {
            pair: FieldPair::new(
                Field::from_values_unchecked(self.spec, p.u),
                Field::from_values_unchecked(self.spec, p.v),
            )?,
            iters,
            converged,
            residual_u,
            residual_v,
            nehari_rel,
            h_floor: h_floor.min(h),
            dropped,
        })
    }
}
