//! Projections onto the Nehari manifold `𝒩 = {N(u,v) = 0, (u,v) ≠ 0}`.
//!
//! Under `u ↦ t²u(t·)` the Nehari functional becomes
//! `g(t) = t⁴·kin + t²·mass + t⁴·a0 − (t⁴ ln t / 2π)·logmass`.
//! For a nonzero pair `g(t)/t²` is positive up to `e^{2π(kin+a0)/logmass}`
//! and strictly decreasing beyond it, so the positive root is unique.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::energy::{FieldPair, Snapshot, SystemParams};
use crate::error::{Error, Result};
use crate::grid::{dilate, grad_norm_sq, l2_norm_sq, Field};
use crate::kernel::KernelTable;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiberCoefficients {
    pub kin: f64,
    pub mass: f64,
    pub a0: f64,
    pub logmass: f64,
}

impl FiberCoefficients {
    pub(crate) fn from_snapshot(s: &Snapshot, p: &SystemParams) -> Self {
        FiberCoefficients {
            kin: s.kinetic(),
            mass: s.mass(p),
            a0: s.a0(p),
            logmass: s.logmass(p),
        }
    }

    /// `g(t) / t²`, which has the same positive roots as `g`.
    fn reduced(&self, t: f64) -> f64 {
        t * t * (self.kin + self.a0 - t.ln() * self.logmass / (2.0 * PI)) + self.mass
    }
}

pub fn fiber_coeffs(pair: &FieldPair, params: &SystemParams, table: &KernelTable) -> Result<FiberCoefficients> {
    let s = Snapshot::of_pair(pair, table)?;
    Ok(FiberCoefficients::from_snapshot(&s, params))
}

pub fn fiber_value(c: &FiberCoefficients, t: f64) -> Result<f64> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("fiber parameter must be positive, got {t}")));
    }
    let t2 = t * t;
    let t4 = t2 * t2;
    Ok(t4 * c.kin + t2 * c.mass + t4 * c.a0 - t4 * t.ln() * c.logmass / (2.0 * PI))
}

pub const FIBER_T_MIN: f64 = 1e-6;
pub const FIBER_T_MAX: f64 = 1e6;
const SCAN_POINTS: usize = 1201;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiberRoot {
    pub t0: f64,
    /// Sign changes seen on the scan grid; more than one would trigger the
    /// largest-root rule.
    pub sign_changes: usize,
}

/// Largest positive root of `g` in `[FIBER_T_MIN, FIBER_T_MAX]`: scan on a log
/// grid, then bisect the last sign change to relative width `1e-12`.
pub fn fiber_root(c: &FiberCoefficients) -> Result<FiberRoot> {
    let lo = FIBER_T_MIN.ln();
    let hi = FIBER_T_MAX.ln();
    let ts: Vec<f64> = (0..SCAN_POINTS)
        .map(|i| (lo + (hi - lo) * i as f64 / (SCAN_POINTS - 1) as f64).exp())
        .collect();
    let vals: Vec<f64> = ts.iter().map(|&t| c.reduced(t)).collect();
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericFailure(format!("non-finite fiber map for {c:?}")));
    }
    let mut last = None;
    let mut sign_changes = 0;
    for k in 1..SCAN_POINTS {
        if vals[k] == 0.0 {
            sign_changes += 1;
            last = Some((ts[k], ts[k]));
        } else if vals[k - 1] * vals[k] < 0.0 {
            sign_changes += 1;
            last = Some((ts[k - 1], ts[k]));
        }
    }
    let Some((mut a, mut b)) = last else {
        return Err(Error::NumericFailure(format!(
            "no root of the fiber map in [{FIBER_T_MIN:e}, {FIBER_T_MAX:e}] for {c:?}"
        )));
    };
    let fa_positive = c.reduced(a) > 0.0;
    while b - a > 1e-12 * b {
        let m = 0.5 * (a + b);
        let fm = c.reduced(m);
        if fm == 0.0 {
            a = m;
            b = m;
            break;
        }
        if (fm > 0.0) == fa_positive {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(FiberRoot {
        t0: 0.5 * (a + b),
        sign_changes,
    })
}

#[derive(Clone, Debug)]
pub struct DilationProjection {
    pub pair: FieldPair,
    pub t0: f64,
    pub sign_changes: usize,
}

/// Moves a nonzero pair onto `𝒩` along `t ↦ (t²u(t·), t²v(t·))`.
pub fn dilation_project(pair: &FieldPair, params: &SystemParams, table: &KernelTable) -> Result<DilationProjection> {
    if pair.is_zero() {
        return Err(Error::InvalidArgument("cannot project the zero pair".into()));
    }
    let c = fiber_coeffs(pair, params, table)?;
    let root = fiber_root(&c)?;
    let projected = FieldPair::new(dilate(pair.u(), root.t0)?, dilate(pair.v(), root.t0)?)?;
    Ok(DilationProjection {
        pair: projected,
        t0: root.t0,
        sign_changes: root.sign_changes,
    })
}

/// `s₀ = sqrt(−‖(u,v)‖²_H / A₀)`, valid only when `A₀ < 0`.
pub(crate) fn amplitude_factor(h_norm_sq: f64, a0: f64) -> Result<f64> {
    if !(a0 < 0.0) {
        return Err(Error::NotApplicable(format!(
            "amplitude projection needs A0 < 0, got {a0:e}"
        )));
    }
    Ok((-h_norm_sq / a0).sqrt())
}

/// Rescales `(u,v)` to `(s₀u, s₀v) ∈ 𝒩`.
pub fn amplitude_project(pair: &FieldPair, params: &SystemParams, table: &KernelTable) -> Result<(FieldPair, f64)> {
    let s = Snapshot::of_pair(pair, table)?;
    let s0 = amplitude_factor(s.h_norm_sq(params), s.a0(params))?;
    Ok((pair.scaled(s0), s0))
}

/// Ingredients of the closed forms built on a scalar state `u₁`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarPieces {
    pub grad: f64,
    pub mass: f64,
    /// `I₀(u₁², u₁²)`.
    pub i0: f64,
    /// `b₁ = ‖∇u₁‖² + λ₁‖u₁‖²`, `b₂ = ‖∇u₁‖² + λ₂‖u₁‖²`.
    pub b1: f64,
    pub b2: f64,
}

pub fn scalar_pieces(u1: &Field, params: &SystemParams, table: &KernelTable) -> Result<ScalarPieces> {
    let s = Snapshot::of_pair(&FieldPair::first(u1.clone()), table)?;
    Ok(ScalarPieces {
        grad: s.grad_u,
        mass: s.mass_u,
        i0: s.i_uu,
        b1: s.grad_u + params.lambda1 * s.mass_u,
        b2: s.grad_u + params.lambda2 * s.mass_u,
    })
}

fn rho_weight(rho: f64, p: &SystemParams) -> f64 {
    p.mu1 + rho.powi(4) * p.mu2 + 2.0 * rho * rho * p.beta
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho >= 0.0 && rho.is_finite()) {
        return Err(Error::InvalidArgument(format!("rho must be nonnegative, got {rho}")));
    }
    Ok(())
}

fn t_rho_from(pieces: &ScalarPieces, rho: f64, p: &SystemParams) -> Result<f64> {
    check_rho(rho)?;
    if !(pieces.i0 < 0.0) {
        return Err(Error::InvalidState(format!(
            "closed form needs I0(u1^2, u1^2) < 0, got {:e}",
            pieces.i0
        )));
    }
    Ok(((pieces.b1 + rho * rho * pieces.b2) / (rho_weight(rho, p) * -pieces.i0)).sqrt())
}

fn h_rho_from(pieces: &ScalarPieces, rho: f64, p: &SystemParams) -> Result<f64> {
    check_rho(rho)?;
    if !(pieces.i0 < 0.0) {
        return Err(Error::InvalidState(format!(
            "closed form needs I0(u1^2, u1^2) < 0, got {:e}",
            pieces.i0
        )));
    }
    let b = pieces.b1 + rho * rho * pieces.b2;
    Ok(p.mu1 * b * b / (4.0 * rho_weight(rho, p) * pieces.b1))
}

/// Positive root of `t ↦ N(tu₁, tρu₁)`.
pub fn t_rho(u1: &Field, rho: f64, params: &SystemParams, table: &KernelTable) -> Result<f64> {
    t_rho_from(&scalar_pieces(u1, params, table)?, rho, params)
}

/// `h(ρ) = μ₁(b₁+ρ²b₂)² / (4(μ₁+ρ⁴μ₂+2ρ²β)b₁)`.
pub fn h_rho(u1: &Field, rho: f64, params: &SystemParams, table: &KernelTable) -> Result<f64> {
    h_rho_from(&scalar_pieces(u1, params, table)?, rho, params)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HPoint {
    pub rho: f64,
    pub t_rho: f64,
    pub h_rho: f64,
    /// `J(t_ρu₁, t_ρρu₁)` evaluated directly.
    pub j_direct: f64,
}

pub fn h_curve(u1: &Field, rho_grid: &[f64], params: &SystemParams, table: &KernelTable) -> Result<Vec<HPoint>> {
    let pieces = scalar_pieces(u1, params, table)?;
    rho_grid
        .iter()
        .map(|&rho| {
            let t = t_rho_from(&pieces, rho, params)?;
            let h = h_rho_from(&pieces, rho, params)?;
            let pair = FieldPair::new(u1.scaled(t), u1.scaled(t * rho))?;
            let j_direct = Snapshot::of_pair(&pair, table)?.j(params);
            Ok(HPoint {
                rho,
                t_rho: t,
                h_rho: h,
                j_direct,
            })
        })
        .collect()
}

/// Writes `points` as CSV with columns `rho,t_rho,h_rho,j_direct`.
pub fn write_h_curve_csv(points: &[HPoint], path: &Path) -> Result<()> {
    let mut s = String::from("rho,t_rho,h_rho,j_direct\n");
    for p in points {
        s.push_str(&format!("{:.17e},{:.17e},{:.17e},{:.17e}\n", p.rho, p.t_rho, p.h_rho, p.j_direct));
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub beta1: f64,
    pub beta2: f64,
    pub grad_u1: f64,
    pub mass_u1: f64,
    pub grad_u2: f64,
    pub mass_u2: f64,
}

impl Thresholds {
    pub fn max(&self) -> f64 {
        self.beta1.max(self.beta2)
    }
}

/// `β₁ = μ₁(‖∇u₁‖²+λ₂‖u₁‖²)/(‖∇u₁‖²+λ₁‖u₁‖²)` and `β₂` with the roles swapped.
pub fn beta_thresholds(u1: &Field, u2: &Field, params: &SystemParams) -> Result<Thresholds> {
    let (g1, m1) = (grad_norm_sq(u1), l2_norm_sq(u1));
    let (g2, m2) = (grad_norm_sq(u2), l2_norm_sq(u2));
    if m1 == 0.0 || m2 == 0.0 {
        return Err(Error::InvalidArgument("scalar states must be nonzero".into()));
    }
    Ok(Thresholds {
        beta1: params.mu1 * ((g1 + params.lambda2 * m1) / (g1 + params.lambda1 * m1)),
        beta2: params.mu2 * ((g2 + params.lambda1 * m2) / (g2 + params.lambda2 * m2)),
        grad_u1: g1,
        mass_u1: m1,
        grad_u2: g2,
        mass_u2: m2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::j_energy;
    use crate::grid::{make_grid, GridSpec};
    use crate::kernel::Quadrature;
    use crate::testing::{bumps, random_pair};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params() -> SystemParams {
        SystemParams::new(1.0, 2.0, 1.0, 0.7, 1.3).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
    }

    /// `t²·g(t·)` for a sum of Gaussian bumps, exactly.
    fn dilated_bumps(spec: GridSpec, terms: &[(f64, f64, f64, f64)], t: f64) -> Field {
        let scaled: Vec<_> = terms
            .iter()
            .map(|&(cx, cy, s, a)| (cx / t, cy / t, s / t, a * t * t))
            .collect();
        bumps(spec, &scaled)
    }

    #[test]
    fn fiber_at_one_is_nehari() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let spec = make_grid(6.0, 32).unwrap();
        let t = KernelTable::new(spec, Quadrature::BandLimited);
        let pair = random_pair(spec, &mut rng);
        let c = fiber_coeffs(&pair, &params(), &t).unwrap();
        let n = j_energy(&pair, &params(), &t).unwrap().n;
        assert!(rel(fiber_value(&c, 1.0).unwrap(), n) < 1e-14);
        assert!(rel(c.kin + c.mass + c.a0, n) < 1e-14);
        assert!(fiber_value(&c, 0.0).is_err());
        assert!(fiber_value(&c, -1.0).is_err());
    }

    #[test]
    fn fiber_expansion_matches_analytic_dilation() {
        let spec = make_grid(12.0, 256).unwrap();
        let table = KernelTable::new(spec, Quadrature::BandLimited);
        let tu = [(0.0, 0.0, 1.0, 1.0)];
        let tv = [(0.4, -0.3, 0.8, 0.6)];
        let pair = FieldPair::new(bumps(spec, &tu), bumps(spec, &tv)).unwrap();
        let c = fiber_coeffs(&pair, &params(), &table).unwrap();
        for t in [0.5, 0.8, 1.25, 2.0] {
            let d = FieldPair::new(dilated_bumps(spec, &tu, t), dilated_bumps(spec, &tv, t)).unwrap();
            let direct = j_energy(&d, &params(), &table).unwrap().n;
            let g = fiber_value(&c, t).unwrap();
            assert!((g - direct).abs() / (1.0 + g.abs()) < 1e-8, "t = {t}: {g} vs {direct}");
        }
    }

    #[test]
    fn fiber_signs_at_extremes() {
        let spec = make_grid(6.0, 64).unwrap();
        let t = KernelTable::new(spec, Quadrature::BandLimited);
        let pair = FieldPair::first(bumps(spec, &[(0.0, 0.0, 1.0, 1.0)]));
        let c = fiber_coeffs(&pair, &params(), &t).unwrap();
        assert!(fiber_value(&c, 1e-3).unwrap() > 0.0);
        assert!(fiber_value(&c, 1e3).unwrap() < 0.0);
    }

    #[test]
    fn root_matches_dense_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let spec = make_grid(6.0, 32).unwrap();
        let t = KernelTable::new(spec, Quadrature::BandLimited);
        for _ in 0..5 {
            // amplitude large enough that the root lies inside the bracket
            let pair = random_pair(spec, &mut rng).scaled(4.0);
            let c = fiber_coeffs(&pair, &params(), &t).unwrap();
            let root = fiber_root(&c).unwrap();
            assert_eq!(root.sign_changes, 1);
            // independent dense scan: 10⁵ points across the bracket
            let m = 100_000;
            let mut prev = (FIBER_T_MIN, fiber_value(&c, FIBER_T_MIN).unwrap());
            let mut found = Vec::new();
            for k in 1..=m {
                let tk = FIBER_T_MIN * (FIBER_T_MAX / FIBER_T_MIN).powf(k as f64 / m as f64);
                let g = fiber_value(&c, tk).unwrap();
                if prev.1 * g < 0.0 {
                    found.push((prev.0, tk));
                }
                prev = (tk, g);
            }
            assert_eq!(found.len(), 1);
            assert!(found[0].0 <= root.t0 && root.t0 <= found[0].1);
            assert!(fiber_value(&c, root.t0 * (1.0 - 1e-9)).unwrap() > 0.0);
            assert!(fiber_value(&c, root.t0 * (1.0 + 1e-9)).unwrap() < 0.0);
        }
    }

    #[test]
    fn dilation_projection_lands_on_manifold() {
        let spec = make_grid(12.0, 128).unwrap();
        let t = KernelTable::new(spec, Quadrature::BandLimited);
        for (sigma, amp) in [(1.0, 4.0), (2.0, 2.0), (1.5, 3.0)] {
            let pair = FieldPair::new(
                bumps(spec, &[(0.0, 0.0, sigma, amp)]),
                bumps(spec, &[(0.3, 0.0, sigma, 0.5 * amp)]),
            )
            .unwrap();
            let proj = dilation_project(&pair, &params(), &t).unwrap();
            assert!(proj.t0 > 0.0);
            let e = j_energy(&proj.pair, &params(), &t).unwrap();
            assert!(e.n.abs() <= 1e-6 * e.h_norm_sq, "σ = {sigma}: {}", e.n / e.h_norm_sq);
        }
        assert!(dilation_project(&FieldPair::zeros(spec), &params(), &t).is_err());
    }

    #[test]
    fn dilation_projection_fixed_point() {
        let spec = make_grid(8.0, 64).unwrap();
        let t = KernelTable::new(spec, Quadrature::BandLimited);
        let pair = FieldPair::first(bumps(spec, &[(0.0, 0.0, 0.5, 1.0)]));
        let (on, _) = amplitude_project(&pair, &params(), &t).unwrap();
        let proj = dilation_project(&on, &params(), &t).unwrap();
        assert!((proj.t0 - 1.0).abs() < 1e-10, "{}", proj.t0);
    }

    #[test]
    fn amplitude_projection() {
        let spec = make_grid(8.0, 64).unwrap();
        let t = KernelTable::new(spec, Quadrature::BandLimited);
        let p = params();
        let pair = FieldPair::new(
            bumps(spec, &[(0.0, 0.0, 0.5, 1.0)]),
            bumps(spec, &[(0.2, 0.1, 0.4, 0.8)]),
        )
        .unwrap();
        let (on, s0) = amplitude_project(&pair, &p, &t).unwrap();
        let e = j_energy(&on, &p, &t).unwrap();
        assert!(e.n.abs() <= 1e-12 * e.h_norm_sq);

        // bisection on s ↦ N(su, sv) as the oracle
        let n_of = |s: f64| j_energy(&pair.scaled(s), &p, &t).unwrap().n;
        let (mut a, mut b): (f64, f64) = (1e-3, 1e3);
        for _ in 0..200 {
            let m = (a * b).sqrt();
            if n_of(m) > 0.0 {
                a = m;
            } else {
                b = m;
            }
        }
        assert!(rel(s0, a) < 1e-12);

        let (again, s1) = amplitude_project(&on, &p, &t).unwrap();
        assert!((s1 - 1.0).abs() < 1e-12);
        assert!(again.axpy(-1.0, &on).u().max_abs() < 1e-12);

        let wide = FieldPair::first(bumps(spec, &[(0.0, 0.0, 2.0, 1.0)]));
        assert!(matches!(
            amplitude_project(&wide, &p, &t),
            Err(Error::NotApplicable(_))
        ));
    }

    fn nehari_scalar_state(spec: GridSpec, t: &KernelTable, p: &SystemParams) -> Field {
        let u = bumps(spec, &[(0.0, 0.0, 0.7, 1.0)]);
        let scalar = SystemParams::scalar(p.lambda1, p.mu1).unwrap();
        let (on, _) = amplitude_project(&FieldPair::first(u), &scalar, t).unwrap();
        on.into_parts().0
    }

    #[test]
    fn t_rho_is_root_and_matches_amplitude_path() {
        let spec = make_grid(8.0, 64).unwrap();
        let t = KernelTable::new(spec, Quadrature::BandLimited);
        let p = params();
        let u1 = nehari_scalar_state(spec, &t, &p);
        for rho in [0.0, 0.1, 1.0] {
            let tr = t_rho(&u1, rho, &p, &t).unwrap();
            let e = j_energy(&FieldPair::new(u1.scaled(tr), u1.scaled(tr * rho)).unwrap(), &p, &t).unwrap();
            assert!(e.n.abs() <= 1e-10 * e.h_norm_sq);
            let pair = FieldPair::new(u1.clone(), u1.scaled(rho)).unwrap();
            let (_, s0) = amplitude_project(&pair, &p, &t).unwrap();
            assert!(rel(tr, s0) < 1e-10);
        }
        assert!((t_rho(&u1, 0.0, &p, &t).unwrap() - 1.0).abs() < 1e-12);
        assert!(t_rho(&u1, -1.0, &p, &t).is_err());
        let wide = bumps(spec, &[(0.0, 0.0, 2.0, 1.0)]);
        assert!(matches!(t_rho(&wide, 0.5, &p, &t), Err(Error::InvalidState(_))));
    }

    #[test]
    fn h_curve_matches_direct_energy() {
        let spec = make_grid(8.0, 64).unwrap();
        let t = KernelTable::new(spec, Quadrature::BandLimited);
        let p = params();
        let u1 = nehari_scalar_state(spec, &t, &p);
        let pieces = scalar_pieces(&u1, &p, &t).unwrap();
        let grid: Vec<f64> = (0..=20).map(|k| 0.05 * k as f64).collect();
        let curve = h_curve(&u1, &grid, &p, &t).unwrap();
        assert!(rel(curve[0].h_rho, 0.25 * pieces.b1) < 1e-14);
        for pt in &curve {
            assert!(rel(pt.h_rho, pt.j_direct) < 1e-9, "{pt:?}");
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.csv");
        write_h_curve_csv(&curve, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("rho,t_rho,h_rho,j_direct"));
        let last: Vec<f64> = lines.last().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(last, [curve[20].rho, curve[20].t_rho, curve[20].h_rho, curve[20].j_direct]);
    }

    #[test]
    fn h_dips_below_h0_above_threshold() {
        let spec = make_grid(8.0, 64).unwrap();
        let t = KernelTable::new(spec, Quadrature::BandLimited);
        let base = params();
        let u1 = nehari_scalar_state(spec, &t, &base);
        let pieces = scalar_pieces(&u1, &base, &t).unwrap();
        let beta1 = base.mu1 * pieces.b2 / pieces.b1;
        let grid: Vec<f64> = (1..=50).map(|k| 0.01 * k as f64).collect();
        let above = base.with_beta(1.2 * beta1).unwrap();
        let h0 = h_rho(&u1, 0.0, &above, &t).unwrap();
        let curve = h_curve(&u1, &grid, &above, &t).unwrap();
        assert!(curve.iter().any(|pt| pt.h_rho < h0));
        let below = base.with_beta(0.8 * beta1).unwrap();
        let curve = h_curve(&u1, &grid, &below, &t).unwrap();
        assert!(curve.iter().all(|pt| pt.h_rho > h0));
    }

    #[test]
    fn thresholds_collapse_for_equal_lambdas() {
        let spec = make_grid(6.0, 32).unwrap();
        let u1 = bumps(spec, &[(0.0, 0.0, 0.9, 1.2)]);
        let u2 = bumps(spec, &[(0.0, 0.0, 0.7, 0.4)]);
        let p = SystemParams::new(1.7, 1.7, 0.9, 1.3, 2.0).unwrap();
        let th = beta_thresholds(&u1, &u2, &p).unwrap();
        assert_eq!(th.beta1, p.mu1);
        assert_eq!(th.beta2, p.mu2);
        let q = SystemParams::new(1.0, 2.0, 0.9, 1.3, 2.0).unwrap();
        let th = beta_thresholds(&u1, &u2, &q).unwrap();
        assert!(th.beta1 > q.mu1 && th.beta2 > 0.0 && th.beta2 < q.mu2);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn root_unique_for_any_nonzero_coefficients(
            kin in 0.0f64..10.0, mass in 1e-3f64..10.0, a0 in -10.0f64..10.0, logmass in 1e-3f64..10.0,
        ) {
            let c = FiberCoefficients { kin, mass, a0, logmass };
            match fiber_root(&c) {
                Ok(root) => {
                    prop_assert_eq!(root.sign_changes, 1);
                    prop_assert!(fiber_value(&c, root.t0).unwrap().abs() <= 1e-9 * root.t0.powi(4) * (kin + mass + a0.abs() + logmass));
                }
                // the unique root may sit beyond the scanned bracket
                Err(Error::NumericFailure(_)) => {
                    prop_assert!(c.reduced(FIBER_T_MAX) > 0.0);
                }
                Err(e) => prop_assert!(false, "{e}"),
            }
        }

        #[test]
        fn thresholds_positive(l1 in 0.1f64..5.0, l2 in 0.1f64..5.0, s in 0.3f64..2.0) {
            let spec = make_grid(6.0, 16).unwrap();
            let u = bumps(spec, &[(0.0, 0.0, s, 1.0)]);
            let p = SystemParams::new(l1, l2, 1.0, 1.0, 1.0).unwrap();
            let th = beta_thresholds(&u, &u, &p).unwrap();
            prop_assert!(th.beta1 > 0.0 && th.beta2 > 0.0);
        }
    }
}
