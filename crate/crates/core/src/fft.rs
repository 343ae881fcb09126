//! Square 2D FFTs over row-major complex buffers.
//!
//! Rows are transformed in parallel; every row is an independent transform so
//! the output does not depend on the thread count.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

pub(crate) struct Fft2 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

/// Shared plan for an `n × n` transform.
pub(crate) fn plan(n: usize) -> Arc<Fft2> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Fft2>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("fft plan cache poisoned");
    guard
        .entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            Arc::new(Fft2 {
                n,
                forward: planner.plan_fft_forward(n),
                inverse: planner.plan_fft_inverse(n),
            })
        })
        .clone()
}

impl Fft2 {
    /// Unnormalized forward transform, `X_k = Σ_j x_j e^{-2πi jk/n}` on both axes.
    pub(crate) fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.forward);
    }

    /// Unnormalized inverse transform (no `1/n²` factor).
    pub(crate) fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inverse);
    }

    fn transform(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        assert_eq!(data.len(), n * n, "buffer does not match plan size");
        let scratch_len = fft.get_inplace_scratch_len();
        for _ in 0..2 {
            data.par_chunks_mut(n).for_each_init(
                || vec![Complex64::new(0.0, 0.0); scratch_len],
                |scratch, row| fft.process_with_scratch(row, scratch),
            );
            transpose(data, n);
        }
    }
}

fn transpose(data: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}

/// Signed FFT index: `0, 1, …, n/2 − 1, −n/2, …, −1`.
pub(crate) fn signed_index(i: usize, n: usize) -> i64 {
    if i < n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// Packs two real fields as `u + i v` and returns their forward transform.
pub(crate) fn forward_pair(u: &[f64], v: &[f64], n: usize) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = u
        .iter()
        .zip(v)
        .map(|(&a, &b)| Complex64::new(a, b))
        .collect();
    plan(n).forward(&mut buf);
    buf
}

/// Splits the transform of `u + i v` into the transforms of `u` and `v` at
/// index `idx`, using the conjugate symmetry of real-field spectra.
pub(crate) fn split_pair(z: &[Complex64], n: usize, i: usize, j: usize) -> (Complex64, Complex64) {
    let zi = z[i * n + j];
    let mi = (n - i) % n;
    let mj = (n - j) % n;
    let zm = z[mi * n + mj].conj();
    let a = (zi + zm) * 0.5;
    let b = (zi - zm) * Complex64::new(0.0, -0.5);
    (a, b)
}

/// Applies per-component real Fourier multipliers to a pair of real fields.
/// The multipliers receive the squared angular wavenumber and must be even in `k`.
pub(crate) fn apply_multipliers_pair(
    u: &[f64],
    v: &[f64],
    n: usize,
    k2: &[f64],
    mu: impl Fn(f64) -> f64,
    mv: impl Fn(f64) -> f64,
) -> (Vec<f64>, Vec<f64>) {
    let z = forward_pair(u, v, n);
    let mut out = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for j in 0..n {
            let (a, b) = split_pair(&z, n, i, j);
            let q = k2[i * n + j];
            out[i * n + j] = a * mu(q) + Complex64::new(0.0, 1.0) * b * mv(q);
        }
    }
    plan(n).inverse(&mut out);
    let scale = 1.0 / (n * n) as f64;
    // keep an identically zero input exactly zero instead of picking up
    // round-off from its partner
    let zero_u = u.iter().all(|&x| x == 0.0);
    let zero_v = v.iter().all(|&x| x == 0.0);
    let ru = out.iter().map(|c| if zero_u { 0.0 } else { c.re * scale }).collect();
    let rv = out.iter().map(|c| if zero_v { 0.0 } else { c.im * scale }).collect();
    (ru, rv)
}
