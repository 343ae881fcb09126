//! The logarithmic kernel `k(z) = (1/2π) ln|z|`, its split
//! `k = k₁ − k₂` with `k₁ = (1/2π) ln(1+|z|)` and `k₂ = (1/2π) ln(1+1/|z|)`,
//! and free-space convolution against it.
//!
//! Kernels are tabulated on the doubled `2N × 2N` displacement lattice, so a
//! zero-padded circular FFT convolution equals the aperiodic discrete sum
//! `h² Σ_j k(x_i − y_j) f_j` exactly. Two tabulations of `k` are provided:
//!
//! * [`Quadrature::CellAverage`]: point values, with the singular
//!   zero-displacement entry replaced by the exact cell average of `k`.
//!   Second-order accurate; it is the reference the direct-sum oracle checks.
//! * [`Quadrature::BandLimited`]: the lattice kernel whose discrete sum equals
//!   the continuous convolution for band-limited densities. It is built from
//!   the closed-form Fourier transform of `k` truncated to a disk that covers
//!   every displacement in the box, sampled on a 4× oversampled lattice.
//!   Discrete energies then inherit the continuous scaling identities to
//!   round-off, which the Nehari fibering relies on.

use std::f64::consts::{LN_2, PI};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft;
use crate::grid::{integrate, Field, GridSpec};

const INV_TWO_PI: f64 = 1.0 / (2.0 * PI);

/// Largest grid accepted by the `O(N⁴)` direct sums.
pub const DIRECT_SUM_MAX_N: usize = 32;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quadrature {
    CellAverage,
    #[default]
    BandLimited,
}

/// Which kernel of the split to apply.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Part {
    /// `k = k₁ − k₂`, the sign-changing log kernel.
    Log,
    /// `k₁ = (1/2π) ln(1+|z|)`, nonnegative and growing.
    Growing,
    /// `k₂ = (1/2π) ln(1+1/|z|)`, nonnegative, singular at 0 and decaying.
    Decaying,
}

#[derive(Clone, Debug)]
struct Table {
    values: Vec<f64>,
    spectrum: Vec<f64>,
}

impl Table {
    fn new(values: Vec<f64>, m: usize) -> Self {
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft::plan(m).forward(&mut buf);
        // The table is even in the displacement, so its spectrum is real.
        let spectrum = buf.iter().map(|c| c.re).collect();
        Table { values, spectrum }
    }
}

#[derive(Clone, Debug)]
pub struct KernelTable {
    spec: GridSpec,
    quadrature: Quadrature,
    log: Table,
    split: Option<(Table, Table)>,
}

/// Exact mean of `ln|z|` over the cell `[−h/2, h/2]²`.
pub fn cell_average_ln(h: f64) -> f64 {
    h.ln() - 0.5 * LN_2 - 1.5 + 0.25 * PI
}

/// Mean over the cell `[−h/2, h/2]²` of a radial integrand `g(|z|)`, given
/// `radial_antiderivative(R) = ∫₀^R g(r) r dr`. The cell is cut into eight
/// triangles with a vertex at the origin, leaving a smooth angular integral.
pub fn cell_average(h: f64, radial_antiderivative: impl Fn(f64) -> f64) -> f64 {
    let f = |theta: f64| radial_antiderivative(0.5 * h / theta.cos());
    8.0 / (h * h) * adaptive_simpson(&f, 0.0, 0.25 * PI, 1e-15, 40)
}

fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

fn antiderivative_ln(r: f64) -> f64 {
    0.5 * r * r * r.ln() - 0.25 * r * r
}

fn antiderivative_ln1p(r: f64) -> f64 {
    0.5 * (r * r - 1.0) * r.ln_1p() - 0.25 * r * r + 0.5 * r
}

/// Signed displacement (in cells) stored at index `p` of the doubled lattice.
fn lattice_offset(p: usize, n: usize) -> i64 {
    fft::signed_index(p, 2 * n)
}

fn point_table(spec: GridSpec, kernel: impl Fn(f64) -> f64, at_zero: f64) -> Vec<f64> {
    let n = spec.n();
    let m = 2 * n;
    let h = spec.spacing();
    let mut values = vec![0.0; m * m];
    for p in 0..m {
        let d1 = lattice_offset(p, n) as f64 * h;
        for q in 0..m {
            let d2 = lattice_offset(q, n) as f64 * h;
            values[p * m + q] = if p == 0 && q == 0 {
                at_zero
            } else {
                kernel(d1.hypot(d2))
            };
        }
    }
    values
}

/// Fourier transform of `(1/2π) ln|z|` restricted to `|z| < R`.
fn truncated_log_transform(k: f64, radius: f64) -> f64 {
    let ln_r = radius.ln();
    if k == 0.0 {
        return 0.5 * radius * radius * ln_r - 0.25 * radius * radius;
    }
    let kr = k * radius;
    radius * ln_r * libm::j1(kr) / k - (1.0 - libm::j0(kr)) / (k * k)
}

fn band_limited_table(spec: GridSpec) -> Vec<f64> {
    let n = spec.n();
    let h = spec.spacing();
    // Oversampled periodic lattice. Displacements reach 2√2·L, the truncation
    // radius is 4L and the period 8L clears both with the density support.
    let big = 4 * n;
    let period = big as f64 * h;
    let radius = 4.0 * spec.half_width();
    let dk = 2.0 * PI / period;
    let mut buf = vec![Complex64::new(0.0, 0.0); big * big];
    buf.par_chunks_mut(big).enumerate().for_each(|(p, row)| {
        let kp = fft::signed_index(p, big) as f64 * dk;
        for (q, out) in row.iter_mut().enumerate() {
            let kq = fft::signed_index(q, big) as f64 * dk;
            *out = Complex64::new(truncated_log_transform(kp.hypot(kq), radius), 0.0);
        }
    });
    fft::plan(big).inverse(&mut buf);
    let scale = 1.0 / (period * period);

    let m = 2 * n;
    let mut values = vec![0.0; m * m];
    for p in 0..m {
        let bp = lattice_offset(p, n).rem_euclid(big as i64) as usize;
        for q in 0..m {
            let bq = lattice_offset(q, n).rem_euclid(big as i64) as usize;
            values[p * m + q] = buf[bp * big + bq].re * scale;
        }
    }
    values
}

impl KernelTable {
    /// Table of `k` only; the split tables are left out.
    pub fn new(spec: GridSpec, quadrature: Quadrature) -> Self {
        let m = 2 * spec.n();
        let values = match quadrature {
            Quadrature::CellAverage => point_table(
                spec,
                |r| INV_TWO_PI * r.ln(),
                INV_TWO_PI * cell_average(spec.spacing(), antiderivative_ln),
            ),
            Quadrature::BandLimited => band_limited_table(spec),
        };
        KernelTable {
            spec,
            quadrature,
            log: Table::new(values, m),
            split: None,
        }
    }

    /// Table of `k` together with `k₁` and `k₂`.
    ///
    /// `k₁` is point-sampled with its cell average at zero. `k₂` is point-sampled
    /// for the cell-average quadrature and `k₁ − k` for the band-limited one, so
    /// `k = k₁ − k₂` holds entrywise in both cases.
    pub fn with_split(spec: GridSpec, quadrature: Quadrature) -> Self {
        let mut table = Self::new(spec, quadrature);
        table.materialize_split();
        table
    }

    pub fn materialize_split(&mut self) {
        if self.split.is_some() {
            return;
        }
        let spec = self.spec;
        let m = 2 * spec.n();
        let h = spec.spacing();
        let k1_zero = INV_TWO_PI * cell_average(h, antiderivative_ln1p);
        let growing = point_table(spec, |r| INV_TWO_PI * r.ln_1p(), k1_zero);
        let decaying = match self.quadrature {
            Quadrature::CellAverage => point_table(
                spec,
                |r| INV_TWO_PI * (1.0 / r).ln_1p(),
                k1_zero - self.log.values[0],
            ),
            Quadrature::BandLimited => growing
                .iter()
                .zip(&self.log.values)
                .map(|(a, b)| a - b)
                .collect(),
        };
        self.split = Some((Table::new(growing, m), Table::new(decaying, m)));
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    pub fn quadrature(&self) -> Quadrature {
        self.quadrature
    }

    pub fn has_split(&self) -> bool {
        self.split.is_some()
    }

    fn table(&self, part: Part) -> Result<&Table> {
        match (part, &self.split) {
            (Part::Log, _) => Ok(&self.log),
            (Part::Growing, Some((g, _))) => Ok(g),
            (Part::Decaying, Some((_, d))) => Ok(d),
            _ => Err(Error::InvalidState(
                "split kernel tables were not materialized".into(),
            )),
        }
    }

    /// Kernel value at displacement `(d1, d2)` in cells, `|d_i| < N`.
    pub fn value(&self, part: Part, d1: i64, d2: i64) -> Result<f64> {
        let n = self.spec.n() as i64;
        if d1.abs() >= n || d2.abs() >= n {
            return Err(Error::InvalidArgument(format!(
                "displacement ({d1}, {d2}) outside the lattice"
            )));
        }
        let m = 2 * n;
        let p = d1.rem_euclid(m) as usize;
        let q = d2.rem_euclid(m) as usize;
        Ok(self.table(part)?.values[p * m as usize + q])
    }

    /// `h² (k ∗ f)` and `h² (k ∗ g)` at the grid nodes, both in one padded transform.
    pub(crate) fn convolve_pair(&self, f: &[f64], g: &[f64], part: Part) -> Result<(Vec<f64>, Vec<f64>)> {
        let table = self.table(part)?;
        let n = self.spec.n();
        let m = 2 * n;
        let mut buf = vec![Complex64::new(0.0, 0.0); m * m];
        for i in 0..n {
            let row = &mut buf[i * m..i * m + n];
            for (j, c) in row.iter_mut().enumerate() {
                *c = Complex64::new(f[i * n + j], g[i * n + j]);
            }
        }
        let plan = fft::plan(m);
        plan.forward(&mut buf);
        for (c, s) in buf.iter_mut().zip(&table.spectrum) {
            *c *= *s;
        }
        plan.inverse(&mut buf);
        let scale = self.spec.cell_area() / (m * m) as f64;
        let mut cf = Vec::with_capacity(n * n);
        let mut cg = Vec::with_capacity(n * n);
        for i in 0..n {
            for c in &buf[i * m..i * m + n] {
                cf.push(c.re * scale);
                cg.push(c.im * scale);
            }
        }
        Ok((cf, cg))
    }

    /// `h² (k_part ∗ f)` at the grid nodes.
    pub fn convolve(&self, f: &Field, part: Part) -> Result<Field> {
        self.check_spec(f)?;
        let zero = vec![0.0; self.spec.len()];
        let (cf, _) = self.convolve_pair(f.values(), &zero, part)?;
        Ok(Field::from_values_unchecked(self.spec, cf))
    }

    fn check_spec(&self, f: &Field) -> Result<()> {
        if f.spec() != self.spec {
            return Err(Error::InvalidArgument(
                "field and kernel table live on different grids".into(),
            ));
        }
        Ok(())
    }
}

/// `build_kernel(spec, q)` is [`KernelTable::new`].
pub fn build_kernel(spec: GridSpec, quadrature: Quadrature) -> KernelTable {
    KernelTable::new(spec, quadrature)
}

/// `w_f(x) = −∫ (1/2π) ln|x − y| f(y) dy` at the grid nodes.
pub fn log_potential(f: &Field, table: &KernelTable) -> Result<Field> {
    Ok(table.convolve(f, Part::Log)?.scaled(-1.0))
}

fn bilinear(f: &Field, g: &Field, table: &KernelTable, part: Part) -> Result<f64> {
    table.check_spec(g)?;
    let conv = table.convolve(f, part)?;
    Ok(conv.inner(g))
}

/// `I₀(f, g) = ∫∫ (1/2π) ln|x − y| f(x) g(y)`.
pub fn i0(f: &Field, g: &Field, table: &KernelTable) -> Result<f64> {
    bilinear(f, g, table, Part::Log)
}

/// `I₁(f, g)` with kernel `(1/2π) ln(1 + |x − y|)`; needs the split tables.
pub fn i1(f: &Field, g: &Field, table: &KernelTable) -> Result<f64> {
    bilinear(f, g, table, Part::Growing)
}

/// `I₂(f, g)` with kernel `(1/2π) ln(1 + 1/|x − y|)`; needs the split tables.
pub fn i2(f: &Field, g: &Field, table: &KernelTable) -> Result<f64> {
    bilinear(f, g, table, Part::Decaying)
}

fn guard_direct(spec: GridSpec) -> Result<()> {
    if spec.n() > DIRECT_SUM_MAX_N {
        return Err(Error::Refused(format!(
            "direct double sum limited to N <= {DIRECT_SUM_MAX_N}, got {}",
            spec.n()
        )));
    }
    Ok(())
}

/// `h⁴ Σ_i Σ_j k(x_i − y_j) f_i g_j` with point values of `(1/2π) ln|z|` and
/// the exact cell average on the diagonal. Independent of the FFT path.
pub fn direct_i0_oracle(f: &Field, g: &Field, spec: GridSpec) -> Result<f64> {
    guard_direct(spec)?;
    if f.spec() != spec || g.spec() != spec {
        return Err(Error::InvalidArgument("fields do not match the grid".into()));
    }
    let n = spec.n();
    let h = spec.spacing();
    let diag = INV_TWO_PI * cell_average_ln(h);
    let mut total = 0.0;
    for a in 0..n * n {
        let (ai, aj) = (a / n, a % n);
        let mut row = 0.0;
        for b in 0..n * n {
            let (bi, bj) = (b / n, b % n);
            let k = if a == b {
                diag
            } else {
                let dx = (ai as f64 - bi as f64) * h;
                let dy = (aj as f64 - bj as f64) * h;
                INV_TWO_PI * dx.hypot(dy).ln()
            };
            row += k * g.values()[b];
        }
        total += f.values()[a] * row;
    }
    Ok(total * h.powi(4))
}

/// Direct double sum against the entries of `table` (any quadrature).
pub fn direct_table_sum(f: &Field, g: &Field, table: &KernelTable, part: Part) -> Result<f64> {
    let spec = table.spec();
    guard_direct(spec)?;
    table.check_spec(f)?;
    table.check_spec(g)?;
    let n = spec.n();
    let mut total = 0.0;
    for a in 0..n * n {
        let (ai, aj) = ((a / n) as i64, (a % n) as i64);
        let mut row = 0.0;
        for b in 0..n * n {
            let (bi, bj) = ((b / n) as i64, (b % n) as i64);
            row += table.value(part, ai - bi, aj - bj)? * g.values()[b];
        }
        total += f.values()[a] * row;
    }
    Ok(total * spec.cell_area().powi(2))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FarfieldPoint {
    pub r: f64,
    pub defect: f64,
}

/// Default number of sampled angles per radius.
pub const FARFIELD_ANGLES: usize = 64;

/// Potential `w_f` at an arbitrary point by direct quadrature over the nodes.
pub fn potential_at(f: &Field, x: [f64; 2]) -> f64 {
    let spec = f.spec();
    let n = spec.n();
    let h = spec.spacing();
    let diag = cell_average_ln(h);
    let mut s = 0.0;
    for i in 0..n {
        let dx = x[0] - spec.coord(i);
        for j in 0..n {
            let v = f.values()[i * n + j];
            if v == 0.0 {
                continue;
            }
            let r = dx.hypot(x[1] - spec.coord(j));
            let ln = if r < 1e-12 * h { diag } else { r.ln() };
            s += ln * v;
        }
    }
    -INV_TWO_PI * spec.cell_area() * s
}

/// `defect(r) = max_θ |w_f(r e_θ) + (m/2π) ln r|` with `m = ∫ f`, using the
/// direct-quadrature potential.
pub fn farfield_check(f: &Field, radii: &[f64], n_angles: usize) -> Result<Vec<FarfieldPoint>> {
    let l = f.spec().half_width();
    if let Some(r) = radii.iter().find(|&&r| !(r > 0.0 && r < l)) {
        return Err(Error::InvalidArgument(format!(
            "far-field radius {r} outside (0, {l})"
        )));
    }
    if n_angles == 0 {
        return Err(Error::InvalidArgument("need at least one angle".into()));
    }
    let mass = integrate(f);
    Ok(radii
        .iter()
        .map(|&r| {
            let defect = (0..n_angles)
                .into_par_iter()
                .map(|a| {
                    let theta = 2.0 * PI * (a as f64 + 0.5) / n_angles as f64;
                    let w = potential_at(f, [r * theta.cos(), r * theta.sin()]);
                    (w + mass * INV_TWO_PI * r.ln()).abs()
                })
                .reduce(|| 0.0, f64::max);
            FarfieldPoint { r, defect }
        })
        .collect())
}
