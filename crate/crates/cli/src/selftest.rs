//! Oracle checks that need no solve: kernel quadrature, fiber expansion,
//! gradient consistency and the `A₁` bound.

use anyhow::Result;
use loghartree::energy::{a1_bound_check, el_residual, j_energy};
use loghartree::grid::make_grid;
use loghartree::kernel::{direct_i0_oracle, i0};
use loghartree::nehari::{fiber_coeffs, fiber_value};
use loghartree::{Field, FieldPair, GridSpec, KernelTable, Quadrature, SystemParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Clone, Debug, Serialize)]
pub struct OracleCheck {
    pub name: String,
    pub cases: usize,
    pub worst: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub seconds: f64,
}

fn gaussian(spec: GridSpec, center: [f64; 2], width: f64, amplitude: f64) -> Field {
    Field::from_fn(spec, |x, y| {
        let d2 = (x - center[0]).powi(2) + (y - center[1]).powi(2);
        amplitude * (-d2 / (2.0 * width * width)).exp()
    })
}

/// Two random Gaussians near the center with widths about a tenth of the box.
fn random_field(spec: GridSpec, rng: &mut ChaCha8Rng) -> Field {
    let l = spec.half_width();
    let mut f = Field::zeros(spec);
    for _ in 0..2 {
        let g = gaussian(
            spec,
            [rng.gen_range(-0.15..0.15) * l, rng.gen_range(-0.15..0.15) * l],
            rng.gen_range(0.08..0.14) * l,
            rng.gen_range(-1.0..1.5),
        );
        f = f.axpy(1.0, &g);
    }
    f
}

fn random_pair(spec: GridSpec, rng: &mut ChaCha8Rng) -> Result<FieldPair> {
    Ok(FieldPair::new(random_field(spec, rng), random_field(spec, rng))?)
}

fn params() -> Result<SystemParams> {
    Ok(SystemParams::new(1.0, 2.0, 1.0, 0.7, 1.3)?)
}

fn timed(name: &str, tolerance: f64, f: impl FnOnce() -> Result<(usize, f64)>) -> Result<OracleCheck> {
    let start = std::time::Instant::now();
    let (cases, worst) = f()?;
    Ok(OracleCheck {
        name: name.into(),
        cases,
        worst,
        tolerance,
        pass: worst <= tolerance,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// FFT-path `I₀` against the direct quadrature on small grids.
pub fn kernel_oracle(pairs_per_grid: usize, seed: u64) -> Result<OracleCheck> {
    timed("kernel_oracle", 1e-12, || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        let mut cases = 0;
        for (l, n) in [(3.0, 8), (4.0, 12), (5.0, 16)] {
            let spec = make_grid(l, n)?;
            let table = KernelTable::new(spec, Quadrature::CellAverage);
            for _ in 0..pairs_per_grid {
                let f = random_field(spec, &mut rng).density();
                let g = random_field(spec, &mut rng).density();
                let fast = i0(&f, &g, &table)?;
                let slow = direct_i0_oracle(&f, &g, spec)?;
                worst = worst.max((fast - slow).abs() / slow.abs());
                cases += 1;
            }
        }
        Ok((cases, worst))
    })
}

/// `g(t)` from the coefficients of a Gaussian pair against `N` of the pair
/// `t²u(tx), t²v(tx)` sampled afresh.
pub fn fiber_identity() -> Result<OracleCheck> {
    timed("fiber_identity", 1e-8, || {
        let spec = make_grid(12.0, 256)?;
        let table = KernelTable::new(spec, Quadrature::BandLimited);
        let p = params()?;
        let bumps = [([0.5, 0.0], 1.0, 1.0), ([-0.3, 0.4], 0.8, 0.7)];
        let at = |t: f64| -> Result<FieldPair> {
            let [(cu, wu, au), (cv, wv, av)] = bumps;
            Ok(FieldPair::new(
                gaussian(spec, [cu[0] / t, cu[1] / t], wu / t, t * t * au),
                gaussian(spec, [cv[0] / t, cv[1] / t], wv / t, t * t * av),
            )?)
        };
        let c = fiber_coeffs(&at(1.0)?, &p, &table)?;
        let mut worst: f64 = 0.0;
        let ts = [0.5, 0.8, 1.25, 2.0];
        for t in ts {
            let g = fiber_value(&c, t)?;
            let n = j_energy(&at(t)?, &p, &table)?.n;
            worst = worst.max((g - n).abs() / (1.0 + g.abs()));
        }
        Ok((ts.len(), worst))
    })
}

/// Residual against central differences of `J` along random directions.
pub fn gradient_check(directions: usize, seed: u64) -> Result<OracleCheck> {
    timed("gradient", 1e-6, || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = make_grid(6.0, 64)?;
        let table = KernelTable::new(spec, Quadrature::BandLimited);
        let p = params()?;
        let pair = random_pair(spec, &mut rng)?;
        let (ru, rv) = el_residual(&pair, &p, &table)?;
        let eps = 1e-4;
        let mut worst: f64 = 0.0;
        for _ in 0..directions {
            let d = random_pair(spec, &mut rng)?;
            let jp = j_energy(&pair.axpy(eps, &d), &p, &table)?.j;
            let jm = j_energy(&pair.axpy(-eps, &d), &p, &table)?.j;
            let fd = (jp - jm) / (2.0 * eps);
            let an = ru.inner(d.u()) + rv.inner(d.v());
            worst = worst.max((fd - an).abs() / an.abs().max(fd.abs()));
        }
        Ok((directions, worst))
    })
}

/// Worst `(lhs − rhs)/rhs` of the `A₁` bound over random nonnegative pairs.
pub fn a1_bound(pairs: usize, seed: u64) -> Result<OracleCheck> {
    timed("a1_bound", 0.0, || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = make_grid(8.0, 64)?;
        let table = KernelTable::with_split(spec, Quadrature::BandLimited);
        let p = params()?;
        let mut worst = f64::NEG_INFINITY;
        for _ in 0..pairs {
            let pair = random_pair(spec, &mut rng)?.abs();
            let (lhs, rhs) = a1_bound_check(&pair, &p, &table)?;
            worst = worst.max((lhs - rhs) / rhs);
        }
        Ok((pairs, worst))
    })
}

pub fn run_all(seed: u64) -> Result<Vec<OracleCheck>> {
    Ok(vec![
        kernel_oracle(5, seed)?,
        fiber_identity()?,
        gradient_check(10, seed.wrapping_add(1))?,
        a1_bound(100, seed.wrapping_add(2))?,
    ])
}
