//! Truncated square box, sampled fields and the spectral operators on them.
//!
//! Nodes sit at cell centers `x_i = −L + (i + ½)h`, so no node is at the
//! origin and the node set is symmetric under `x → −x`. Values are stored
//! row-major with the first index along `x₁`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft;

/// Smallest accepted number of points per side.
pub const MIN_POINTS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    half_width: f64,
    n: usize,
}

impl GridSpec {
    pub fn new(half_width: f64, n: usize) -> Result<Self> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "half width must be positive, got {half_width}"
            )));
        }
        if n < MIN_POINTS || n % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "points per side must be even and at least {MIN_POINTS}, got {n}"
            )));
        }
        Ok(GridSpec { half_width, n })
    }

    /// Box half width giving boundary values of order `e^{-12}` for states
    /// decaying at rate `√λ`.
    pub fn auto_half_width(lambda_min: f64) -> f64 {
        12.0 / lambda_min.sqrt()
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    pub fn cell_area(&self) -> f64 {
        let h = self.spacing();
        h * h
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + (i as f64 + 0.5) * self.spacing()
    }

    pub fn node(&self, i: usize, j: usize) -> [f64; 2] {
        [self.coord(i), self.coord(j)]
    }

    pub fn radius(&self, i: usize, j: usize) -> f64 {
        self.coord(i).hypot(self.coord(j))
    }

    /// Angular wavenumber of FFT index `i` on the periodic box of length `2L`.
    pub fn wavenumber(&self, i: usize) -> f64 {
        2.0 * PI * fft::signed_index(i, self.n) as f64 / (2.0 * self.half_width)
    }

    /// `|k|²` for every FFT index, row-major.
    pub fn wavenumber_sq(&self) -> Vec<f64> {
        let n = self.n;
        let k: Vec<f64> = (0..n).map(|i| self.wavenumber(i)).collect();
        let mut out = Vec::with_capacity(n * n);
        for ki in &k {
            for kj in &k {
                out.push(ki * ki + kj * kj);
            }
        }
        out
    }
}

pub fn make_grid(half_width: f64, n: usize) -> Result<GridSpec> {
    GridSpec::new(half_width, n)
}

/// Real scalar function sampled on a [`GridSpec`].
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    spec: GridSpec,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(spec: GridSpec) -> Self {
        Field {
            spec,
            values: vec![0.0; spec.len()],
        }
    }

    pub fn constant(spec: GridSpec, c: f64) -> Self {
        Field {
            spec,
            values: vec![c; spec.len()],
        }
    }

    pub fn from_fn(spec: GridSpec, f: impl Fn(f64, f64) -> f64) -> Self {
        let n = spec.n();
        let mut values = Vec::with_capacity(spec.len());
        for i in 0..n {
            let x1 = spec.coord(i);
            for j in 0..n {
                values.push(f(x1, spec.coord(j)));
            }
        }
        Field { spec, values }
    }

    pub fn from_values(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} samples, got {}",
                spec.len(),
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite sample at flat index {k}"
            )));
        }
        Ok(Field { spec, values })
    }

    pub(crate) fn from_values_unchecked(spec: GridSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), spec.len());
        Field { spec, values }
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.spec.n() + j]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            spec: self.spec,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scaled(&self, s: f64) -> Field {
        self.map(|v| s * v)
    }

    /// Pointwise square, the density `f²`.
    pub fn density(&self) -> Field {
        self.map(|v| v * v)
    }

    pub fn abs(&self) -> Field {
        self.map(f64::abs)
    }

    /// `self + s·other`.
    pub fn axpy(&self, s: f64, other: &Field) -> Field {
        assert_eq!(self.spec, other.spec, "fields live on different grids");
        Field {
            spec: self.spec,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + s * b)
                .collect(),
        }
    }

    pub fn mul(&self, other: &Field) -> Field {
        assert_eq!(self.spec, other.spec, "fields live on different grids");
        Field {
            spec: self.spec,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .collect(),
        }
    }

    /// `∫ f g` by the midpoint rule.
    pub fn inner(&self, other: &Field) -> f64 {
        assert_eq!(self.spec, other.spec, "fields live on different grids");
        self.spec.cell_area()
            * self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .sum::<f64>()
    }

    /// Point reflection `f(−x)`.
    pub fn reflected(&self) -> Field {
        let mut values = self.values.clone();
        values.reverse();
        Field {
            spec: self.spec,
            values,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// `h² Σ f_ij`.
pub fn integrate(f: &Field) -> f64 {
    f.spec.cell_area() * f.values.iter().sum::<f64>()
}

pub fn l2_norm_sq(f: &Field) -> f64 {
    f.inner(f)
}

/// `∫ |∇f|²` with the derivative taken spectrally on the periodic extension.
pub fn grad_norm_sq(f: &Field) -> f64 {
    let spec = f.spec;
    let n = spec.n();
    let mut buf: Vec<Complex64> = f.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft::plan(n).forward(&mut buf);
    let k2 = spec.wavenumber_sq();
    let s: f64 = buf.iter().zip(&k2).map(|(c, q)| q * c.norm_sqr()).sum();
    spec.cell_area() * s / (n * n) as f64
}

/// `‖f‖²_* = ∫ ln(1+|x|) f²`.
pub fn xlog_norm_sq(f: &Field) -> f64 {
    let spec = f.spec;
    let n = spec.n();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            let v = f.values[i * n + j];
            s += spec.radius(i, j).ln_1p() * v * v;
        }
    }
    spec.cell_area() * s
}

/// Spectral Laplacian (multiplier `−|k|²`) of the periodic extension.
pub fn laplacian(f: &Field) -> Field {
    let spec = f.spec;
    let n = spec.n();
    let zero = vec![0.0; spec.len()];
    let k2 = spec.wavenumber_sq();
    let (lap, _) = fft::apply_multipliers_pair(&f.values, &zero, n, &k2, |q| -q, |_| 0.0);
    Field::from_values_unchecked(spec, lap)
}

/// Translates by `shift`, returning samples of `f(x − shift)` computed with
/// the band-limited interpolant of the periodic extension.
pub fn translate(f: &Field, shift: [f64; 2]) -> Field {
    let spec = f.spec;
    let n = spec.n();
    let mut buf: Vec<Complex64> = f.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let plan = fft::plan(n);
    plan.forward(&mut buf);
    let k: Vec<f64> = (0..n).map(|i| spec.wavenumber(i)).collect();
    let nyq = n / 2;
    for i in 0..n {
        for j in 0..n {
            // Nyquist modes carry no unambiguous phase for a real field.
            if i == nyq || j == nyq {
                buf[i * n + j] = Complex64::new(0.0, 0.0);
                continue;
            }
            let phase = -(k[i] * shift[0] + k[j] * shift[1]);
            buf[i * n + j] *= Complex64::from_polar(1.0, phase);
        }
    }
    plan.inverse(&mut buf);
    let scale = 1.0 / (n * n) as f64;
    Field::from_values_unchecked(spec, buf.iter().map(|c| c.re * scale).collect())
}

/// Periodic band-limited cardinal function for an even number of samples.
fn periodic_sinc(s: f64, h: f64, period: f64) -> f64 {
    let a = PI * s / period;
    let sa = a.sin();
    if sa.abs() < 1e-15 {
        return 1.0;
    }
    let n = (period / h).round();
    (PI * s / h).sin() * a.cos() / (n * sa)
}

/// Samples `t² f(t·x)` at every node.
///
/// The dilation is separable, so the band-limited interpolant is applied as
/// two dense `N × N` matrix products. Targets outside the box are zero.
pub fn dilate(f: &Field, t: f64) -> Result<Field> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "dilation factor must be positive, got {t}"
        )));
    }
    let spec = f.spec;
    let n = spec.n();
    if t == 1.0 {
        return Ok(f.clone());
    }
    let h = spec.spacing();
    let period = 2.0 * spec.half_width();
    let l = spec.half_width();
    let mut m = vec![0.0; n * n];
    for a in 0..n {
        let target = t * spec.coord(a);
        if target.abs() > l {
            continue;
        }
        for b in 0..n {
            m[a * n + b] = periodic_sinc(target - spec.coord(b), h, period);
        }
    }
    // tmp = F Mᵀ, out = M tmp
    let fv = &f.values;
    let mut tmp = vec![0.0; n * n];
    tmp.par_chunks_mut(n).enumerate().for_each(|(b, row)| {
        let frow = &fv[b * n..(b + 1) * n];
        for (c, out) in row.iter_mut().enumerate() {
            let mrow = &m[c * n..(c + 1) * n];
            *out = frow.iter().zip(mrow).map(|(x, y)| x * y).sum();
        }
    });
    let t2 = t * t;
    let mut out = vec![0.0; n * n];
    out.par_chunks_mut(n).enumerate().for_each(|(a, row)| {
        let mrow = &m[a * n..(a + 1) * n];
        if mrow.iter().all(|&x| x == 0.0) {
            return;
        }
        for (c, o) in row.iter_mut().enumerate() {
            let mut s = 0.0;
            for b in 0..n {
                s += mrow[b] * tmp[b * n + c];
            }
            *o = t2 * s;
        }
    });
    Ok(Field::from_values_unchecked(spec, out))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    pub radius: Vec<f64>,
    pub mean: Vec<f64>,
    pub count: Vec<usize>,
}

impl RadialProfile {
    pub fn len(&self) -> usize {
        self.radius.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radius.is_empty()
    }
}

/// Mean of `f` over annuli of width `L / n_bins` covering the inscribed disk.
/// Empty annuli are dropped; the reported radius of an annulus is the mean
/// radius of the samples it holds.
pub fn radial_profile(f: &Field, n_bins: usize) -> Result<RadialProfile> {
    if n_bins < 4 {
        return Err(Error::InvalidArgument(format!(
            "radial profile needs at least 4 bins, got {n_bins}"
        )));
    }
    let spec = f.spec;
    let n = spec.n();
    let width = spec.half_width() / n_bins as f64;
    let mut sum = vec![0.0; n_bins];
    let mut rsum = vec![0.0; n_bins];
    let mut count = vec![0usize; n_bins];
    for i in 0..n {
        for j in 0..n {
            let r = spec.radius(i, j);
            let k = (r / width) as usize;
            if k < n_bins {
                sum[k] += f.values[i * n + j];
                rsum[k] += r;
                count[k] += 1;
            }
        }
    }
    let mut out = RadialProfile {
        radius: Vec::new(),
        mean: Vec::new(),
        count: Vec::new(),
    };
    for k in 0..n_bins {
        if count[k] > 0 {
            out.radius.push(rsum[k] / count[k] as f64);
            out.mean.push(sum[k] / count[k] as f64);
            out.count.push(count[k]);
        }
    }
    Ok(out)
}

/// Radial grid oversampling relative to `h` used by [`radialize`].
const RADIAL_OVERSAMPLE: f64 = 8.0;
/// Half-width of the Lagrange stencil used to read the radial average.
const STENCIL_HALF: usize = 4;

/// Replaces every sample by the angular average of `f` over the circle through it.
///
/// The average is taken on the band-limited interpolant: each Fourier mode
/// averages to `J₀(|k| r)`, so radial band-limited fields are reproduced to
/// interpolation accuracy and every non-radial mode is removed.
pub fn radialize(f: &Field) -> Field {
    let spec = f.spec;
    let n = spec.n();
    let mut buf: Vec<Complex64> = f.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft::plan(n).forward(&mut buf);

    // Coefficients of f(x) = Σ c_k e^{ik·x}; group the real parts by |k|².
    let x0 = spec.coord(0);
    let scale = 1.0 / (n * n) as f64;
    let mut shells: std::collections::BTreeMap<i64, f64> = std::collections::BTreeMap::new();
    for i in 0..n {
        let p = fft::signed_index(i, n);
        let ki = spec.wavenumber(i);
        for j in 0..n {
            let q = fft::signed_index(j, n);
            let kj = spec.wavenumber(j);
            let c = buf[i * n + j] * Complex64::from_polar(scale, -(ki + kj) * x0);
            *shells.entry(p * p + q * q).or_insert(0.0) += c.re;
        }
    }
    let dk = 2.0 * PI / (2.0 * spec.half_width());
    let shells: Vec<(f64, f64)> = shells
        .into_iter()
        .filter(|(_, c)| *c != 0.0)
        .map(|(m, c)| (dk * (m as f64).sqrt(), c))
        .collect();

    // Angular average on a fine radial grid, extended evenly below r = 0.
    let dr = spec.spacing() / RADIAL_OVERSAMPLE;
    let r_max = spec.half_width() * 2f64.sqrt();
    let offset = STENCIL_HALF;
    let count = (r_max / dr).ceil() as usize + 2 * STENCIL_HALF + 2;
    let profile: Vec<f64> = (0..count)
        .into_par_iter()
        .map(|m| {
            let r = ((m as f64) - offset as f64).abs() * dr;
            shells.iter().map(|&(k, c)| c * libm::j0(k * r)).sum()
        })
        .collect();

    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let pos = spec.radius(i, j) / dr + offset as f64;
            out[i * n + j] = lagrange_read(&profile, pos);
        }
    }
    Field::from_values_unchecked(spec, out)
}

fn lagrange_read(samples: &[f64], pos: f64) -> f64 {
    let base = pos.floor() as usize;
    let lo = base + 1 - STENCIL_HALF;
    let hi = base + STENCIL_HALF;
    let mut s = 0.0;
    for a in lo..=hi {
        let mut w = 1.0;
        for b in lo..=hi {
            if a != b {
                w *= (pos - b as f64) / (a as f64 - b as f64);
            }
        }
        s += w * samples[a];
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(spec: GridSpec, a: f64) -> Field {
        Field::from_fn(spec, |x, y| (-a * (x * x + y * y)).exp())
    }

    #[test]
    fn spacing_from_definition() {
        assert_eq!(make_grid(1.0, 8).unwrap().spacing(), 0.25);
        assert_eq!(make_grid(12.0, 256).unwrap().spacing(), 0.09375);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(matches!(make_grid(1.0, 7), Err(Error::InvalidArgument(_))));
        assert!(matches!(make_grid(1.0, 6), Err(Error::InvalidArgument(_))));
        assert!(matches!(make_grid(0.0, 8), Err(Error::InvalidArgument(_))));
        assert!(matches!(make_grid(-2.0, 8), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn nodes_are_centered() {
        let spec = make_grid(3.0, 16).unwrap();
        let n = spec.n();
        for i in 0..n {
            assert!((spec.coord(i) + spec.coord(n - 1 - i)).abs() < 1e-15);
            assert!(spec.coord(i) != 0.0);
        }
        assert!((spec.spacing() * n as f64 - 6.0).abs() < 1e-14);
    }

    #[test]
    fn integrate_constants() {
        let spec = make_grid(1.0, 8).unwrap();
        assert!((integrate(&Field::constant(spec, 1.0)) - 4.0).abs() < 1e-14);
        assert_eq!(integrate(&Field::zeros(spec)), 0.0);
    }

    #[test]
    fn integrate_gaussian() {
        let spec = make_grid(12.0, 256).unwrap();
        assert!((integrate(&gaussian(spec, 1.0)) - PI).abs() < 1e-10);
    }

    #[test]
    fn norms_of_zero_field() {
        let spec = make_grid(2.0, 16).unwrap();
        let z = Field::zeros(spec);
        assert_eq!(l2_norm_sq(&z), 0.0);
        assert_eq!(grad_norm_sq(&z), 0.0);
        assert_eq!(xlog_norm_sq(&z), 0.0);
    }

    #[test]
    fn gaussian_moments() {
        // f = e^{-|x|²/2}: ‖f‖² = π and ‖∇f‖² = ∫|x|² e^{-|x|²} = π.
        let spec = make_grid(12.0, 256).unwrap();
        let f = gaussian(spec, 0.5);
        assert!((l2_norm_sq(&f) - PI).abs() < 1e-8);
        assert!((grad_norm_sq(&f) - PI).abs() < 1e-8);
    }

    #[test]
    fn laplacian_of_constant_vanishes() {
        let spec = make_grid(3.0, 16).unwrap();
        let lap = laplacian(&Field::constant(spec, 2.5));
        assert!(lap.max_abs() < 1e-12);
    }

    #[test]
    fn laplacian_eigenfunction() {
        let l = 3.0;
        let spec = make_grid(l, 32).unwrap();
        let f = Field::from_fn(spec, |x, _| (PI * x / l).sin());
        let lap = laplacian(&f);
        let expect = f.scaled(-(PI / l).powi(2));
        let err = lap.axpy(-1.0, &expect).max_abs();
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn laplacian_gaussian() {
        let spec = make_grid(12.0, 256).unwrap();
        let f = gaussian(spec, 1.0);
        let lap = laplacian(&f);
        let exact = Field::from_fn(spec, |x, y| {
            let r2 = x * x + y * y;
            (4.0 * r2 - 4.0) * (-r2).exp()
        });
        let err = lap.axpy(-1.0, &exact).max_abs();
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn dilate_identity_and_errors() {
        let spec = make_grid(4.0, 32).unwrap();
        let f = gaussian(spec, 1.0);
        assert_eq!(dilate(&f, 1.0).unwrap(), f);
        assert!(matches!(dilate(&f, 0.0), Err(Error::InvalidArgument(_))));
        assert!(matches!(dilate(&f, -1.0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn dilate_gaussian_matches_closed_form() {
        let spec = make_grid(12.0, 256).unwrap();
        let f = gaussian(spec, 1.0);
        for &t in &[0.5, 0.8, 1.3, 2.0] {
            let d = dilate(&f, t).unwrap();
            let exact = gaussian(spec, t * t).scaled(t * t);
            let err = d.axpy(-1.0, &exact).max_abs();
            assert!(err < 1e-6, "t = {t}: {err}");
            let mass = l2_norm_sq(&d) / (t * t * l2_norm_sq(&f));
            assert!((mass - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn dilate_composes() {
        let spec = make_grid(12.0, 128).unwrap();
        let f = gaussian(spec, 1.0);
        let two = dilate(&dilate(&f, 0.8).unwrap(), 1.5).unwrap();
        let one = dilate(&f, 1.2).unwrap();
        assert!(two.axpy(-1.0, &one).max_abs() < 2e-6);
    }

    #[test]
    fn translate_moves_gaussian() {
        let spec = make_grid(10.0, 128).unwrap();
        let f = gaussian(spec, 1.0);
        let g = translate(&f, [0.7, -0.3]);
        let exact = Field::from_fn(spec, |x, y| (-((x - 0.7).powi(2) + (y + 0.3).powi(2))).exp());
        assert!(g.axpy(-1.0, &exact).max_abs() < 1e-10);
    }

    #[test]
    fn profile_needs_bins() {
        let spec = make_grid(2.0, 16).unwrap();
        assert!(radial_profile(&Field::zeros(spec), 3).is_err());
    }

    #[test]
    fn profile_of_odd_function_vanishes() {
        let spec = make_grid(5.0, 64).unwrap();
        let f = Field::from_fn(spec, |x, _| x);
        let p = radial_profile(&f, 16).unwrap();
        for m in &p.mean {
            assert!(m.abs() < 1e-12);
        }
        assert!(radialize(&f).max_abs() < 1e-9 * f.max_abs());
    }

    #[test]
    fn profile_of_gaussian() {
        let spec = make_grid(12.0, 256).unwrap();
        let p = radial_profile(&gaussian(spec, 1.0), 128).unwrap();
        assert!(p.radius.windows(2).all(|w| w[0] < w[1]));
        assert!(p.count.iter().all(|&c| c >= 1));
        for (r, m) in p.radius.iter().zip(&p.mean) {
            assert!((m - (-r * r).exp()).abs() < 1e-3, "r = {r}");
        }
    }

    #[test]
    fn radialize_keeps_radial_fields() {
        let spec = make_grid(12.0, 128).unwrap();
        let f = gaussian(spec, 0.7);
        let g = radialize(&f);
        assert!(g.axpy(-1.0, &f).max_abs() < 1e-10);
    }

    #[test]
    fn radialize_is_a_projection() {
        let spec = make_grid(12.0, 128).unwrap();
        let f = Field::from_fn(spec, |x, y| (-(x - 0.5).powi(2) - 2.0 * y * y).exp());
        let once = radialize(&f);
        let twice = radialize(&once);
        assert!(twice.axpy(-1.0, &once).max_abs() < 1e-10);
        assert!(once.axpy(-1.0, &f).max_abs() > 1e-2);
    }
}
