//! Shared fixtures for unit tests.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::energy::FieldPair;
use crate::grid::{Field, GridSpec};

/// Sum of Gaussians `amp · e^{−|x−c|²/(2σ²)}` given as `(c₁, c₂, σ, amp)`.
pub(crate) fn bumps(spec: GridSpec, terms: &[(f64, f64, f64, f64)]) -> Field {
    Field::from_fn(spec, |x, y| {
        terms
            .iter()
            .map(|&(cx, cy, s, a)| a * (-((x - cx).powi(2) + (y - cy).powi(2)) / (2.0 * s * s)).exp())
            .sum()
    })
}

/// Smooth, well-contained random field: two bumps near the center, width
/// about an eighth of the box.
pub(crate) fn random_bumps(spec: GridSpec, rng: &mut ChaCha8Rng) -> Field {
    let l = spec.half_width();
    let terms: Vec<_> = (0..2)
        .map(|_| {
            (
                rng.gen_range(-0.15..0.15) * l,
                rng.gen_range(-0.15..0.15) * l,
                rng.gen_range(0.08..0.14) * l,
                rng.gen_range(-1.0..1.5),
            )
        })
        .collect();
    bumps(spec, &terms)
}

pub(crate) fn random_pair(spec: GridSpec, rng: &mut ChaCha8Rng) -> FieldPair {
    let u = random_bumps(spec, rng);
    let v = random_bumps(spec, rng);
    FieldPair::new(u, v).unwrap()
}
