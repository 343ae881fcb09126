//! Post-hoc checks on computed states: criticality, Nehari identities,
//! radial symmetry and monotonicity, exponential decay, far-field behavior
//! of the potentials, and the energy ordering against semitrivial states.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::energy::{el_residual, j_energy, FieldPair};
use crate::error::{Error, Result};
use crate::grid::{l2_norm_sq, radial_profile, radialize, Field, RadialProfile};
use crate::kernel::{farfield_check, FarfieldPoint, KernelTable, FARFIELD_ANGLES};
use crate::scalar::{ScalarGroundState, FARFIELD_FRACTIONS};
use crate::solver::{CoupledGroundState, StateKind};

/// Adjacent radial bins may increase by at most this much.
pub const DEFAULT_MONOTONE_TOL: f64 = 1e-10;

/// `‖f − radialize(f)‖₂ / ‖f‖₂`; zero for the zero field.
pub fn asymmetry(f: &Field) -> f64 {
    let norm = l2_norm_sq(f).sqrt();
    if norm == 0.0 {
        return 0.0;
    }
    l2_norm_sq(&f.axpy(-1.0, &radialize(f))).sqrt() / norm
}

/// Number of adjacent bins with `p_{k+1} > p_k + tol`.
pub fn monotonicity_violations(profile: &RadialProfile, tol: f64) -> usize {
    profile.mean.windows(2).filter(|w| w[1] > w[0] + tol).count()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
    /// Bins inside the window skipped because their mean was not positive.
    pub skipped: usize,
}

/// Least-squares fit of `ln p(r) = intercept + slope·r` over bins with
/// `r_min ≤ r ≤ r_max`.
pub fn decay_fit(profile: &RadialProfile, r_min: f64, r_max: f64) -> Result<DecayFit> {
    if !(r_min < r_max) {
        return Err(Error::InvalidArgument(format!("empty fit window [{r_min}, {r_max}]")));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut skipped = 0;
    for (&r, &p) in profile.radius.iter().zip(&profile.mean) {
        if r < r_min || r > r_max {
            continue;
        }
        if p > 0.0 {
            xs.push(r);
            ys.push(p.ln());
        } else {
            skipped += 1;
        }
    }
    let n = xs.len();
    if n < 3 {
        return Ok(DecayFit {
            slope: 0.0,
            intercept: 0.0,
            r_squared: 0.0,
            points: n,
            skipped,
        });
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(DecayFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
        points: n,
        skipped,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub el_residual: f64,
    pub nehari: f64,
    pub quarter_identity: f64,
    pub asymmetry: f64,
    pub monotone_bin: f64,
    pub max_violations: usize,
    pub min_r_squared: f64,
    pub farfield: f64,
    /// Fraction of the half-width where the far-field defect is judged.
    pub farfield_radius: f64,
    pub ordering_margin: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            el_residual: 1e-6,
            nehari: 1e-8,
            quarter_identity: 1e-8,
            asymmetry: 1e-3,
            monotone_bin: DEFAULT_MONOTONE_TOL,
            max_violations: 0,
            min_r_squared: 0.99,
            farfield: 1e-3,
            farfield_radius: 0.8,
            ordering_margin: 1e-4,
        }
    }
}

/// One verdict: `pass` is exactly `defect <= tolerance`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub defect: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn new(name: &str, defect: f64, tolerance: f64) -> Self {
        Check {
            name: name.to_string(),
            defect,
            tolerance,
            pass: defect <= tolerance,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentReport {
    pub el_residual_rel: f64,
    pub asymmetry: f64,
    pub monotonicity_violations: usize,
    pub decay: DecayFit,
    pub farfield: Vec<FarfieldPoint>,
    pub profile: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ordering {
    pub c: f64,
    pub j_u1_0: f64,
    pub j_0_u2: f64,
    /// `(min{J(u₁,0), J(0,u₂)} − c) / min{…}`.
    pub margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum OrderingSection {
    Skipped { reason: String },
    Computed(Ordering),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub kind: String,
    pub j: f64,
    pub h_norm_sq: f64,
    pub nehari_defect: f64,
    pub quarter_identity_defect: f64,
    /// Absent for a component that vanishes identically.
    pub u: Option<ComponentReport>,
    /// Absent for scalar states and for a vanished `v`.
    pub v: Option<ComponentReport>,
    pub ordering: OrderingSection,
    pub tolerances: Tolerances,
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl VerificationReport {
    pub fn failed_checks(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }
}

/// A state to verify.
#[derive(Clone, Copy, Debug)]
pub enum Subject<'a> {
    Scalar(&'a ScalarGroundState),
    Coupled(&'a CoupledGroundState),
}

fn component(f: &Field, r: &Field, tol: &Tolerances) -> Result<ComponentReport> {
    let spec = f.spec();
    let l = spec.half_width();
    let norm = l2_norm_sq(f).sqrt();
    let el_residual_rel = if norm == 0.0 { 0.0 } else { l2_norm_sq(r).sqrt() / norm };
    let profile = radial_profile(f, spec.n() / 2)?;
    let mut radii: Vec<f64> = FARFIELD_FRACTIONS.iter().map(|x| x * l).collect();
    if !FARFIELD_FRACTIONS.contains(&tol.farfield_radius) {
        radii.push(tol.farfield_radius * l);
    }
    Ok(ComponentReport {
        el_residual_rel,
        asymmetry: asymmetry(f),
        monotonicity_violations: monotonicity_violations(&profile, tol.monotone_bin),
        decay: decay_fit(&profile, 0.3 * l, 0.6 * l)?,
        farfield: farfield_check(&f.density(), &radii, FARFIELD_ANGLES)?,
        profile: profile.radius.iter().zip(&profile.mean).map(|(&r, &p)| [r, p]).collect(),
    })
}

fn component_checks(name: &str, c: &ComponentReport, half_width: f64, tol: &Tolerances, checks: &mut Vec<Check>) {
    checks.push(Check::new(&format!("el_residual_{name}"), c.el_residual_rel, tol.el_residual));
    checks.push(Check::new(&format!("asymmetry_{name}"), c.asymmetry, tol.asymmetry));
    checks.push(Check::new(
        &format!("monotonicity_violations_{name}"),
        c.monotonicity_violations as f64,
        tol.max_violations as f64,
    ));
    // a negative slope is required; the defect is how far it is from negative
    let slope_defect = if c.decay.slope < 0.0 { 0.0 } else { c.decay.slope.abs() + f64::MIN_POSITIVE };
    checks.push(Check::new(&format!("decay_slope_{name}"), slope_defect, 0.0));
    checks.push(Check::new(
        &format!("decay_fit_{name}"),
        1.0 - c.decay.r_squared,
        1.0 - tol.min_r_squared,
    ));
    let target = tol.farfield_radius * half_width;
    let at = c
        .farfield
        .iter()
        .min_by(|a, b| (a.r - target).abs().total_cmp(&(b.r - target).abs()))
        .map(|p| p.defect)
        .unwrap_or(f64::INFINITY);
    checks.push(Check::new(&format!("farfield_{name}"), at, tol.farfield));
}

/// Recomputes every diagnostic for `subject`. Scalar references
/// `(u₁, u₂)` enable the energy-ordering section.
pub fn verify(
    subject: Subject<'_>,
    scalar_refs: Option<(&ScalarGroundState, &ScalarGroundState)>,
    table: &KernelTable,
    tol: &Tolerances,
) -> Result<VerificationReport> {
    let (pair, params, kind) = match subject {
        Subject::Scalar(s) => (FieldPair::first(s.u.clone()), s.params(), "scalar".to_string()),
        Subject::Coupled(c) => {
            let kind = match c.kind {
                StateKind::Nontrivial => "nontrivial",
                StateKind::SemitrivialU => "semitrivial-u",
                StateKind::SemitrivialV => "semitrivial-v",
            };
            (c.pair.clone(), c.params, kind.to_string())
        }
    };
    let e = j_energy(&pair, &params, table)?;
    let (ru, rv) = el_residual(&pair, &params, table)?;
    let mut checks = Vec::new();

    let nehari_defect = e.n.abs() / e.h_norm_sq;
    let quarter_identity_defect = (e.j - 0.25 * e.h_norm_sq).abs() / e.j.abs();
    checks.push(Check::new("nehari", nehari_defect, tol.nehari));
    checks.push(Check::new("quarter_identity", quarter_identity_defect, tol.quarter_identity));
    let positive_level = if e.j > 0.0 { 0.0 } else { e.j.abs() + f64::MIN_POSITIVE };
    checks.push(Check::new("positive_level", positive_level, 0.0));

    let l = pair.spec().half_width();
    let mut report_on = |name: &str, f: &Field, r: &Field| -> Result<Option<ComponentReport>> {
        if f.values().iter().all(|&x| x == 0.0) {
            return Ok(None);
        }
        let c = component(f, r, tol)?;
        component_checks(name, &c, l, tol, &mut checks);
        Ok(Some(c))
    };
    let u = report_on("u", pair.u(), &ru)?;
    let v = match subject {
        Subject::Scalar(_) => None,
        Subject::Coupled(_) => report_on("v", pair.v(), &rv)?,
    };

    let ordering = match (subject, scalar_refs) {
        (Subject::Scalar(_), _) => OrderingSection::Skipped {
            reason: "scalar state".into(),
        },
        (Subject::Coupled(_), None) => OrderingSection::Skipped {
            reason: "no scalar references".into(),
        },
        (Subject::Coupled(c), Some((u1, u2))) => {
            let m = u1.energy.min(u2.energy);
            let margin = (m - c.c_level) / m;
            checks.push(Check::new(
                "ordering",
                (tol.ordering_margin - margin).max(0.0),
                0.0,
            ));
            if c.kind.is_semitrivial() {
                checks.push(Check::new("nontrivial", 1.0, 0.0));
            }
            OrderingSection::Computed(Ordering {
                c: c.c_level,
                j_u1_0: u1.energy,
                j_0_u2: u2.energy,
                margin,
            })
        }
    };

    let pass = checks.iter().all(|c| c.pass);
    Ok(VerificationReport {
        kind,
        j: e.j,
        h_norm_sq: e.h_norm_sq,
        nehari_defect,
        quarter_identity_defect,
        u,
        v,
        ordering,
        tolerances: *tol,
        checks,
        pass,
    })
}

fn curve_csv(points: impl Iterator<Item = (f64, f64)>) -> String {
    let mut s = String::from("r,value\n");
    for (r, v) in points {
        s.push_str(&format!("{r:.17e},{v:.17e}\n"));
    }
    s
}

/// Writes the report as JSON at `path` and the curves as `r,value` CSV files
/// next to it (`<stem>.<curve>.csv`).
pub fn emit_report(report: &VerificationReport, path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(report).map_err(|e| Error::json(path, e))?;
    std::fs::write(path, json).map_err(|e| Error::io(path, e))?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
    let dir = path.parent().unwrap_or(Path::new("."));
    let comps = [("u", &report.u), ("v", &report.v)];
    for (name, c) in comps.iter().filter_map(|(n, c)| c.as_ref().map(|c| (n, c))) {
        let profile = dir.join(format!("{stem}.profile_{name}.csv"));
        std::fs::write(&profile, curve_csv(c.profile.iter().map(|p| (p[0], p[1]))))
            .map_err(|e| Error::io(&profile, e))?;
        let far = dir.join(format!("{stem}.farfield_{name}.csv"));
        std::fs::write(&far, curve_csv(c.farfield.iter().map(|p| (p.r, p.defect))))
            .map_err(|e| Error::io(&far, e))?;
    }
    Ok(())
}

pub fn read_report(path: &Path) -> Result<VerificationReport> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::testing::bumps;

    #[test]
    fn radial_field_is_symmetric_and_monotone() {
        let spec = make_grid(8.0, 128).unwrap();
        let g = bumps(spec, &[(0.0, 0.0, 1.0, 1.0)]);
        assert!(asymmetry(&g) < 1e-6);
        let p = radial_profile(&g, 64).unwrap();
        assert_eq!(monotonicity_violations(&p, DEFAULT_MONOTONE_TOL), 0);
        let off = bumps(spec, &[(3.0, 0.0, 1.0, 1.0)]);
        assert!(asymmetry(&off) > 0.1);
        let p = radial_profile(&off, 64).unwrap();
        assert!(monotonicity_violations(&p, DEFAULT_MONOTONE_TOL) > 0);
    }

    #[test]
    fn exponential_decay_fit() {
        let spec = make_grid(10.0, 128).unwrap();
        let f = Field::from_fn(spec, |x, y| (-2.0 * x.hypot(y)).exp());
        let p = radial_profile(&f, 64).unwrap();
        let fit = decay_fit(&p, 3.0, 6.0).unwrap();
        assert!((fit.slope + 2.0).abs() < 1e-2, "{fit:?}");
        assert!(fit.r_squared > 0.9999);
        assert!(decay_fit(&p, 6.0, 3.0).is_err());
        let zero = radial_profile(&Field::zeros(spec), 64).unwrap();
        let fit = decay_fit(&zero, 3.0, 6.0).unwrap();
        assert_eq!((fit.points, fit.r_squared), (0, 0.0));
    }

    #[test]
    fn check_pass_is_defect_within_tolerance() {
        assert!(Check::new("a", 1.0, 1.0).pass);
        assert!(!Check::new("a", 1.0 + 1e-16 * 4.0, 1.0).pass);
        assert!(!Check::new("a", f64::NAN, 1.0).pass);
    }

    #[test]
    fn emit_into_missing_directory_names_path() {
        let report = VerificationReport {
            kind: "scalar".into(),
            j: 1.0,
            h_norm_sq: 4.0,
            nehari_defect: 0.0,
            quarter_identity_defect: 0.0,
            u: Some(ComponentReport {
                el_residual_rel: 0.0,
                asymmetry: 0.0,
                monotonicity_violations: 0,
                decay: DecayFit {
                    slope: -1.0,
                    intercept: 0.0,
                    r_squared: 1.0,
                    points: 3,
                    skipped: 0,
                },
                farfield: vec![],
                profile: vec![[0.5, 1.0]],
            }),
            v: None,
            ordering: OrderingSection::Skipped { reason: "scalar state".into() },
            tolerances: Tolerances::default(),
            checks: vec![],
            pass: true,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("missing").join("report.json");
        let err = emit_report(&report, &path).unwrap_err();
        assert!(err.to_string().contains("missing"));
        let ok = dir.path().join("report.json");
        emit_report(&report, &ok).unwrap();
        assert_eq!(read_report(&ok).unwrap(), report);
        assert!(dir.path().join("report.profile_u.csv").exists());
    }
}
