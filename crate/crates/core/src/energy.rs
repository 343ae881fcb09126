//! Energy `J(u,v) = ½‖(u,v)‖²_H + ¼A₀(u,v)`, the Nehari functional
//! `N(u,v) = ‖(u,v)‖²_H + A₀(u,v)` and the Euler–Lagrange residual.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft;
use crate::grid::{l2_norm_sq, xlog_norm_sq, Field, GridSpec};
use crate::kernel::{KernelTable, Part};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub lambda1: f64,
    pub lambda2: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub beta: f64,
}

impl SystemParams {
    pub fn new(lambda1: f64, lambda2: f64, mu1: f64, mu2: f64, beta: f64) -> Result<Self> {
        let p = SystemParams {
            lambda1,
            lambda2,
            mu1,
            mu2,
            beta,
        };
        p.validate()?;
        Ok(p)
    }

    /// Errors name the first offending field.
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("mu1", self.mu1),
            ("mu2", self.mu2),
            ("beta", self.beta),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be positive and finite, got {value}"
                )));
            }
        }
        Ok(())
    }

    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        Self::new(self.lambda1, self.lambda2, self.mu1, self.mu2, beta)
    }

    /// Parameters whose first equation is the scalar problem `(λ, μ)`.
    pub fn scalar(lambda: f64, mu: f64) -> Result<Self> {
        Self::new(lambda, lambda, mu, mu, mu)
    }

    /// `(u, v) → (v, u)` counterpart.
    pub fn swapped(&self) -> Self {
        SystemParams {
            lambda1: self.lambda2,
            lambda2: self.lambda1,
            mu1: self.mu2,
            mu2: self.mu1,
            beta: self.beta,
        }
    }

    pub fn lambda_min(&self) -> f64 {
        self.lambda1.min(self.lambda2)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FieldPair {
    u: Field,
    v: Field,
}

impl FieldPair {
    pub fn new(u: Field, v: Field) -> Result<Self> {
        if u.spec() != v.spec() {
            return Err(Error::InvalidArgument(
                "pair components live on different grids".into(),
            ));
        }
        Ok(FieldPair { u, v })
    }

    /// `(u, 0)`.
    pub fn first(u: Field) -> Self {
        let v = Field::zeros(u.spec());
        FieldPair { u, v }
    }

    /// `(0, v)`.
    pub fn second(v: Field) -> Self {
        let u = Field::zeros(v.spec());
        FieldPair { u, v }
    }

    pub fn zeros(spec: GridSpec) -> Self {
        FieldPair {
            u: Field::zeros(spec),
            v: Field::zeros(spec),
        }
    }

    pub fn spec(&self) -> GridSpec {
        self.u.spec()
    }

    pub fn u(&self) -> &Field {
        &self.u
    }

    pub fn v(&self) -> &Field {
        &self.v
    }

    pub fn into_parts(self) -> (Field, Field) {
        (self.u, self.v)
    }

    pub fn scaled(&self, s: f64) -> Self {
        FieldPair {
            u: self.u.scaled(s),
            v: self.v.scaled(s),
        }
    }

    pub fn swapped(&self) -> Self {
        FieldPair {
            u: self.v.clone(),
            v: self.u.clone(),
        }
    }

    /// `self + s·other`.
    pub fn axpy(&self, s: f64, other: &FieldPair) -> Self {
        FieldPair {
            u: self.u.axpy(s, &other.u),
            v: self.v.axpy(s, &other.v),
        }
    }

    pub fn abs(&self) -> Self {
        FieldPair {
            u: self.u.abs(),
            v: self.v.abs(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.u.max_abs() == 0.0 && self.v.max_abs() == 0.0
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }

    /// `⟨(f₁,f₂), (g₁,g₂)⟩_{L²}`.
    pub fn inner(&self, other: &FieldPair) -> f64 {
        self.u.inner(&other.u) + self.v.inner(&other.v)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub grad_u: f64,
    pub grad_v: f64,
    pub mass_u: f64,
    pub mass_v: f64,
    pub xlog_u: f64,
    pub xlog_v: f64,
    /// `I₀(u²,u²)`, `I₀(v²,v²)`, `I₀(u²,v²)`.
    pub i0_uu: f64,
    pub i0_vv: f64,
    pub i0_uv: f64,
    pub a0: f64,
    /// Present when the kernel table carries the split.
    pub a1: Option<f64>,
    pub a2: Option<f64>,
    pub j: f64,
    pub n: f64,
    pub h_norm_sq: f64,
    pub x_norm_sq: f64,
}

/// Everything the optimizer needs at one point: norm pieces, the three
/// interaction integrals, and the potentials `h²(k ∗ u²)`, `h²(k ∗ v²)`.
#[derive(Clone, Debug)]
pub(crate) struct Snapshot {
    pub grad_u: f64,
    pub grad_v: f64,
    pub mass_u: f64,
    pub mass_v: f64,
    pub i_uu: f64,
    pub i_vv: f64,
    pub i_uv: f64,
    pub conv_u: Vec<f64>,
    pub conv_v: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Snapshot {
    pub(crate) fn new(u: &[f64], v: &[f64], spec: GridSpec, table: &KernelTable) -> Result<Self> {
        if table.spec() != spec {
            return Err(Error::InvalidArgument(
                "pair and kernel table live on different grids".into(),
            ));
        }
        let n = spec.n();
        let area = spec.cell_area();
        let z = fft::forward_pair(u, v, n);
        let k2 = spec.wavenumber_sq();
        let (mut gu, mut gv) = (0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                let (a, b) = fft::split_pair(&z, n, i, j);
                let q = k2[i * n + j];
                gu += q * a.norm_sqr();
                gv += q * b.norm_sqr();
            }
        }
        if u.iter().all(|&x| x == 0.0) {
            gu = 0.0;
        }
        if v.iter().all(|&x| x == 0.0) {
            gv = 0.0;
        }
        let spectral = area / (n * n) as f64;

        let u2: Vec<f64> = u.iter().map(|x| x * x).collect();
        let v2: Vec<f64> = v.iter().map(|x| x * x).collect();
        let (conv_u, conv_v) = table.convolve_pair(&u2, &v2, Part::Log)?;
        let mass_u = area * u2.iter().sum::<f64>();
        let mass_v = area * v2.iter().sum::<f64>();
        let i_uu = area * dot(&u2, &conv_u);
        let i_vv = area * dot(&v2, &conv_v);
        // averaged over both orders to keep (u,v) ↔ (v,u) exact
        let i_uv = 0.5 * area * (dot(&v2, &conv_u) + dot(&u2, &conv_v));
        Ok(Snapshot {
            grad_u: gu * spectral,
            grad_v: gv * spectral,
            mass_u,
            mass_v,
            i_uu,
            i_vv,
            i_uv,
            conv_u,
            conv_v,
        })
    }

    pub(crate) fn of_pair(pair: &FieldPair, table: &KernelTable) -> Result<Self> {
        Self::new(pair.u.values(), pair.v.values(), pair.spec(), table)
    }

    pub(crate) fn h_norm_sq(&self, p: &SystemParams) -> f64 {
        self.kinetic() + self.mass(p)
    }

    pub(crate) fn kinetic(&self) -> f64 {
        self.grad_u + self.grad_v
    }

    pub(crate) fn mass(&self, p: &SystemParams) -> f64 {
        p.lambda1 * self.mass_u + p.lambda2 * self.mass_v
    }

    pub(crate) fn a0(&self, p: &SystemParams) -> f64 {
        p.mu1 * self.i_uu + p.mu2 * self.i_vv + 2.0 * p.beta * self.i_uv
    }

    pub(crate) fn j(&self, p: &SystemParams) -> f64 {
        0.5 * self.h_norm_sq(p) + 0.25 * self.a0(p)
    }

    pub(crate) fn nehari(&self, p: &SystemParams) -> f64 {
        self.h_norm_sq(p) + self.a0(p)
    }

    /// `μ₁‖u‖⁴ + μ₂‖v‖⁴ + 2β‖u‖²‖v‖²`.
    pub(crate) fn logmass(&self, p: &SystemParams) -> f64 {
        p.mu1 * self.mass_u * self.mass_u
            + p.mu2 * self.mass_v * self.mass_v
            + 2.0 * p.beta * self.mass_u * self.mass_v
    }

    /// Strong-form residual; the `L²` gradient of `J`.
    pub(crate) fn residual(&self, u: &[f64], v: &[f64], spec: GridSpec, p: &SystemParams) -> (Vec<f64>, Vec<f64>) {
        let k2 = spec.wavenumber_sq();
        let (mut ru, mut rv) = fft::apply_multipliers_pair(u, v, spec.n(), &k2, |q| q, |q| q);
        for i in 0..u.len() {
            ru[i] += (p.lambda1 + p.mu1 * self.conv_u[i] + p.beta * self.conv_v[i]) * u[i];
            rv[i] += (p.lambda2 + p.mu2 * self.conv_v[i] + p.beta * self.conv_u[i]) * v[i];
        }
        (ru, rv)
    }
}

pub fn h_norm_sq(pair: &FieldPair, params: &SystemParams) -> f64 {
    crate::grid::grad_norm_sq(&pair.u)
        + crate::grid::grad_norm_sq(&pair.v)
        + params.lambda1 * l2_norm_sq(&pair.u)
        + params.lambda2 * l2_norm_sq(&pair.v)
}

/// `‖(u,v)‖²_H + ‖u‖²_* + ‖v‖²_*`.
pub fn x_norm_sq(pair: &FieldPair, params: &SystemParams) -> f64 {
    h_norm_sq(pair, params) + xlog_norm_sq(&pair.u) + xlog_norm_sq(&pair.v)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AFunctionals {
    pub a0: f64,
    pub a1: Option<f64>,
    pub a2: Option<f64>,
}

fn split_functional(pair: &FieldPair, params: &SystemParams, table: &KernelTable, part: Part) -> Result<f64> {
    let u2 = pair.u.density();
    let v2 = pair.v.density();
    let (cu, cv) = table.convolve_pair(u2.values(), v2.values(), part)?;
    let area = pair.spec().cell_area();
    let uu = area * dot(u2.values(), &cu);
    let vv = area * dot(v2.values(), &cv);
    let uv = 0.5 * area * (dot(v2.values(), &cu) + dot(u2.values(), &cv));
    Ok(params.mu1 * uu + params.mu2 * vv + 2.0 * params.beta * uv)
}

/// `A_i = μ₁I_i(u²,u²) + μ₂I_i(v²,v²) + 2βI_i(u²,v²)`; `A₁`, `A₂` only when the
/// table carries the split.
pub fn a_functionals(pair: &FieldPair, params: &SystemParams, table: &KernelTable) -> Result<AFunctionals> {
    let s = Snapshot::of_pair(pair, table)?;
    a_functionals_from(&s, pair, params, table)
}

pub fn j_energy(pair: &FieldPair, params: &SystemParams, table: &KernelTable) -> Result<EnergyBreakdown> {
    let s = Snapshot::of_pair(pair, table)?;
    let a = a_functionals_from(&s, pair, params, table)?;
    let h = s.h_norm_sq(params);
    let xlog_u = xlog_norm_sq(&pair.u);
    let xlog_v = xlog_norm_sq(&pair.v);
    Ok(EnergyBreakdown {
        grad_u: s.grad_u,
        grad_v: s.grad_v,
        mass_u: s.mass_u,
        mass_v: s.mass_v,
        xlog_u,
        xlog_v,
        i0_uu: s.i_uu,
        i0_vv: s.i_vv,
        i0_uv: s.i_uv,
        a0: a.a0,
        a1: a.a1,
        a2: a.a2,
        j: s.j(params),
        n: s.nehari(params),
        h_norm_sq: h,
        x_norm_sq: h + xlog_u + xlog_v,
    })
}

fn a_functionals_from(s: &Snapshot, pair: &FieldPair, params: &SystemParams, table: &KernelTable) -> Result<AFunctionals> {
    let (a1, a2) = if table.has_split() {
        (
            Some(split_functional(pair, params, table, Part::Growing)?),
            Some(split_functional(pair, params, table, Part::Decaying)?),
        )
    } else {
        (None, None)
    };
    Ok(AFunctionals {
        a0: s.a0(params),
        a1,
        a2,
    })
}

/// `r_u = −Δu + λ₁u − μ₁w_u u − βw_v u` and `r_v` likewise, with `w_f = −k ∗ f²`.
pub fn el_residual(pair: &FieldPair, params: &SystemParams, table: &KernelTable) -> Result<(Field, Field)> {
    let s = Snapshot::of_pair(pair, table)?;
    let spec = pair.spec();
    let (ru, rv) = s.residual(pair.u.values(), pair.v.values(), spec, params);
    Ok((
        Field::from_values_unchecked(spec, ru),
        Field::from_values_unchecked(spec, rv),
    ))
}

/// Both sides of
/// `A₁(u,v) ≤ (1/π)(μ₁‖u‖²_*‖u‖² + μ₂‖v‖²_*‖v‖² + β‖u‖²_*‖v‖² + β‖v‖²_*‖u‖²)`.
/// `A₁` needs the split kernel, hence the table.
pub fn a1_bound_check(pair: &FieldPair, params: &SystemParams, table: &KernelTable) -> Result<(f64, f64)> {
    let lhs = split_functional(pair, params, table, Part::Growing)?;
    let (mu, mv) = (l2_norm_sq(&pair.u), l2_norm_sq(&pair.v));
    let (xu, xv) = (xlog_norm_sq(&pair.u), xlog_norm_sq(&pair.v));
    let rhs = (params.mu1 * xu * mu + params.mu2 * xv * mv + params.beta * (xu * mv + xv * mu))
        / std::f64::consts::PI;
    Ok((lhs, rhs))
}
