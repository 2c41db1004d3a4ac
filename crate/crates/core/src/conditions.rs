//! Sampled certification of the structure hypotheses.
//!
//! Each check evaluates one family of pointwise inequalities on quasi-random
//! samples of a level set `{H >= c}` and reports either
//! `certified-on-sample`, `violated` (with witnesses) or `unresolved`.
//! Sampling cannot prove an almost-everywhere inequality, so
//! `certified-on-sample` is the strongest verdict issued here.
//!
//! * H0: `phi(H) <= H_p.p - H` and `|H_p| <= kappa (H_p.p - H)` on `{H >= c0}`
//! * H1: `|H_t| <= psi(H) (H_p.p - H)` on `{H >= c1}`
//! * H2: `min_{|p| = R} H -> inf` on compacts in `(x, t)`
//! * H3: `|H_x| <= gamma (|p| + 1) (H_p.p - H)` on `{H >= c2}`

use crate::coeffs::Vec2;
use crate::error::{Error, Result};
use crate::hamiltonians::{sample_level_set, HamiltonianModel};
use crate::sampling::{direction, Halton, SampleBox, SamplePoint};
use crate::structure::{IntegrabilityVerdict, PhiFunction, StructureProfile};
use rayon::prelude::*;
use serde::Serialize;

/// Witnesses kept per hypothesis, most severe first.
pub const MAX_WITNESSES: usize = 10;

/// Fraction of requested samples that must be resolved for a certificate.
pub const MIN_RESOLVED_FRACTION: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    CertifiedOnSample,
    Violated,
    Unresolved,
    NotCoerciveOnSample,
}

/// A sampled point where `lhs <= rhs + tol` fails.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub sample: usize,
    pub inequality: String,
    pub x: Vec<f64>,
    pub t: f64,
    pub p: Vec<f64>,
    /// Set for transferred (G) checks.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v: Option<f64>,
    pub h: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub tol: f64,
}

impl Witness {
    pub fn excess(&self) -> f64 {
        self.lhs - self.rhs
    }

    /// Scale-free size of the violation, in `(0, 1]` for `lhs > rhs >= 0`.
    pub fn severity(&self) -> f64 {
        self.excess() / (self.lhs.abs() + self.rhs.abs()).max(f64::MIN_POSITIVE)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisResult {
    pub hypothesis: String,
    pub verdict: Verdict,
    pub level: Option<f64>,
    pub note: Option<String>,
    pub samples_requested: usize,
    pub samples_resolved: usize,
    pub violations: usize,
    /// Largest `lhs - rhs` seen over resolved samples.
    pub worst_excess: Option<f64>,
    pub witnesses: Vec<Witness>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coercivity: Option<Vec<CoercivityRow>>,
}

impl HypothesisResult {
    fn vacuous(name: &str, note: &str, n: usize) -> Self {
        Self {
            hypothesis: name.into(),
            verdict: Verdict::CertifiedOnSample,
            level: None,
            note: Some(format!("vacuous: {note}")),
            samples_requested: n,
            samples_resolved: 0,
            violations: 0,
            worst_excess: None,
            witnesses: Vec::new(),
            coercivity: None,
        }
    }

    pub fn is_vacuous(&self) -> bool {
        self.note.as_deref().is_some_and(|n| n.starts_with("vacuous"))
    }
}

/// Per-point outcome of a family of inequalities.
#[derive(Debug, Clone)]
pub(crate) enum PointOutcome {
    Unresolved,
    Checked {
        worst_excess: f64,
        failures: Vec<Witness>,
    },
}

/// One inequality `lhs <= rhs + tol` at a point.
pub(crate) struct Inequality<'a> {
    pub name: &'a str,
    pub lhs: f64,
    pub rhs: f64,
    pub tol: f64,
}

pub(crate) fn evaluate(
    sample: usize,
    dim: usize,
    s: &SamplePoint,
    h: f64,
    ineqs: &[Inequality<'_>],
) -> PointOutcome {
    let mut worst = f64::NEG_INFINITY;
    let mut failures = Vec::new();
    for q in ineqs {
        let excess = q.lhs - q.rhs;
        worst = worst.max(excess);
        if !(excess <= q.tol) {
            failures.push(Witness {
                sample,
                inequality: q.name.to_string(),
                x: s.x_vec(dim),
                t: s.t,
                p: s.p_vec(dim),
                v: None,
                h,
                lhs: q.lhs,
                rhs: q.rhs,
                tol: q.tol,
            });
        }
    }
    PointOutcome::Checked {
        worst_excess: worst,
        failures,
    }
}

/// Folds per-point outcomes (in sample order) into a result.
pub(crate) fn reduce(
    name: &str,
    level: Option<f64>,
    requested: usize,
    outcomes: Vec<PointOutcome>,
) -> HypothesisResult {
    let mut resolved = 0;
    let mut violations = 0;
    let mut worst: Option<f64> = None;
    let mut witnesses = Vec::new();
    for o in outcomes {
        if let PointOutcome::Checked {
            worst_excess,
            failures,
        } = o
        {
            resolved += 1;
            worst = Some(worst.map_or(worst_excess, |w: f64| w.max(worst_excess)));
            if !failures.is_empty() {
                violations += 1;
                witnesses.extend(failures);
            }
        }
    }
    witnesses.sort_by(|a: &Witness, b: &Witness| {
        b.severity().total_cmp(&a.severity()).then(a.sample.cmp(&b.sample))
    });
    witnesses.truncate(MAX_WITNESSES);
    let verdict = if violations > 0 {
        Verdict::Violated
    } else if resolved == 0 || (resolved as f64) < MIN_RESOLVED_FRACTION * requested as f64 {
        Verdict::Unresolved
    } else {
        Verdict::CertifiedOnSample
    };
    let note = match verdict {
        Verdict::Unresolved if resolved == 0 => Some("level set not reached in the sampling box".into()),
        Verdict::Unresolved => Some(format!(
            "only {resolved} of {requested} samples resolved"
        )),
        _ => None,
    };
    HypothesisResult {
        hypothesis: name.into(),
        verdict,
        level,
        note,
        samples_requested: requested,
        samples_resolved: resolved,
        violations,
        worst_excess: worst,
        witnesses,
        coercivity: None,
    }
}

fn point_tol(h: f64) -> f64 {
    1e-8 * (1.0 + h.abs())
}

/// (H0) on `{H >= level}`; `level` is normally `c0`.
pub fn check_h0(
    model: &HamiltonianModel,
    phi: &PhiFunction,
    level: f64,
    bx: &SampleBox,
    n: usize,
    seed: u64,
) -> Result<HypothesisResult> {
    if phi.c0 != model.constants.c0 {
        return Err(Error::Misuse(format!(
            "phi starts at c0 = {} but the model has c0 = {}",
            phi.c0, model.constants.c0
        )));
    }
    if level < model.constants.c0 {
        return Err(Error::Misuse(format!(
            "level {level} below c0 = {}",
            model.constants.c0
        )));
    }
    let kappa = model.constants.kappa;
    let pts = sample_level_set(model, level, bx, n, seed);
    let outcomes = pts
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let h = model.h(&s.x, s.t, &s.p);
            let hp = model.h_p(&s.x, s.t, &s.p);
            let gap = hp.dot(&s.p) - h;
            let tol = point_tol(h);
            evaluate(
                i,
                model.dim,
                s,
                h,
                &[
                    Inequality {
                        name: "phi(H) <= H_p.p - H",
                        lhs: phi.eval(h),
                        rhs: gap,
                        tol,
                    },
                    Inequality {
                        name: "|H_p| <= kappa (H_p.p - H)",
                        lhs: hp.norm(),
                        rhs: kappa * gap,
                        tol,
                    },
                ],
            )
        })
        .collect();
    Ok(reduce("H0", Some(level), n, outcomes))
}

/// (H1) on `{H >= c1}`. Samples where `psi(H)` is undefined are unresolved.
pub fn check_h1(
    model: &HamiltonianModel,
    profile: &StructureProfile,
    c1: f64,
    bx: &SampleBox,
    n: usize,
    seed: u64,
) -> Result<HypothesisResult> {
    if !model.is_t_dependent() {
        return Ok(HypothesisResult::vacuous("H1", "t-independent (H_t = 0)", n));
    }
    if c1 < model.constants.c1 {
        return Err(Error::Misuse(format!(
            "c1 = {c1} below the model's c1 = {}",
            model.constants.c1
        )));
    }
    let pts = sample_level_set(model, c1, bx, n, seed);
    let psi_lower = profile.psi_lower();
    let outcomes = pts
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let h = model.h(&s.x, s.t, &s.p);
            if !(h > psi_lower) {
                return PointOutcome::Unresolved;
            }
            let Ok(psi) = profile.psi(h) else {
                return PointOutcome::Unresolved;
            };
            let gap = model.legendre_gap(&s.x, s.t, &s.p);
            evaluate(
                i,
                model.dim,
                s,
                h,
                &[Inequality {
                    name: "|H_t| <= psi(H) (H_p.p - H)",
                    lhs: model.h_t(&s.x, s.t, &s.p).abs(),
                    rhs: psi * gap,
                    tol: point_tol(h),
                }],
            )
        })
        .collect();
    Ok(reduce("H1", Some(c1), n, outcomes))
}

/// `min H` over the sphere `|p| = R` for each radius, on one compact.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoercivityRow {
    pub compact: usize,
    pub radii: Vec<f64>,
    pub min_h: Vec<f64>,
}

/// Settings for the coercivity check.
#[derive(Debug, Clone, PartialEq)]
pub struct CoercivityProbe {
    pub compacts: Vec<SampleBox>,
    pub radii: Vec<f64>,
    /// `min H` at the largest radius must exceed this.
    pub threshold: f64,
    pub points_per_compact: usize,
    pub directions: usize,
}

impl Default for CoercivityProbe {
    fn default() -> Self {
        Self {
            compacts: vec![SampleBox::default()],
            radii: (0..8).map(|k| 2f64.powi(k)).collect(),
            threshold: 100.0,
            points_per_compact: 64,
            directions: 32,
        }
    }
}

/// (H2): `min_{(x,t) in K, |p| = R} H` must increase in `R` past some `R0`
/// and exceed the threshold at the largest radius, for every compact `K`.
pub fn check_h2(model: &HamiltonianModel, probe: &CoercivityProbe, seed: u64) -> Result<HypothesisResult> {
    if probe.radii.windows(2).any(|w| !(w[1] > w[0])) || probe.radii.len() < 2 {
        return Err(Error::Misuse("radii must be increasing (at least two)".into()));
    }
    let dim = model.dim;
    let dirs: Vec<Vec2> = if dim == 1 {
        vec![Vec2::new(1.0, 0.0), Vec2::new(-1.0, 0.0)]
    } else {
        (0..probe.directions)
            .map(|k| direction(2, k as f64 / probe.directions as f64))
            .collect()
    };
    let mut rows = Vec::new();
    let mut ok = true;
    for (ci, k) in probe.compacts.iter().enumerate() {
        let mut seq = Halton::new(dim + 3, seed.wrapping_add(ci as u64));
        let xt: Vec<SamplePoint> = (0..probe.points_per_compact)
            .map(|_| k.map(dim, &seq.next_point()))
            .collect();
        let min_h: Vec<f64> = probe
            .radii
            .par_iter()
            .map(|&r| {
                xt.iter()
                    .flat_map(|s| dirs.iter().map(move |d| model.h(&s.x, s.t, &(d * r))))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        // longest strictly increasing suffix
        let mut start = min_h.len() - 1;
        while start > 0 && min_h[start - 1] < min_h[start] {
            start -= 1;
        }
        let increasing_tail = min_h.len() - start >= 2;
        let last = *min_h.last().expect("non-empty");
        if !(increasing_tail && last > probe.threshold) {
            ok = false;
        }
        rows.push(CoercivityRow {
            compact: ci,
            radii: probe.radii.clone(),
            min_h,
        });
    }
    let samples = probe.compacts.len() * probe.points_per_compact * dirs.len() * probe.radii.len();
    Ok(HypothesisResult {
        hypothesis: "H2".into(),
        verdict: if ok {
            Verdict::CertifiedOnSample
        } else {
            Verdict::NotCoerciveOnSample
        },
        level: None,
        note: (!ok).then(|| {
            format!(
                "min H over |p| = R does not grow past the threshold {}",
                probe.threshold
            )
        }),
        samples_requested: samples,
        samples_resolved: samples,
        violations: 0,
        worst_excess: None,
        witnesses: Vec::new(),
        coercivity: Some(rows),
    })
}

/// (H3) on `{H >= c2}`.
pub fn check_h3(
    model: &HamiltonianModel,
    c2: f64,
    bx: &SampleBox,
    n: usize,
    seed: u64,
) -> Result<HypothesisResult> {
    if !model.is_x_dependent() {
        return Ok(HypothesisResult::vacuous("H3", "x-independent (H_x = 0)", n));
    }
    let Some(gamma) = model.constants.gamma else {
        let mut r = reduce("H3", Some(c2), n, Vec::new());
        r.note = Some("gamma not set for an x-dependent model".into());
        return Ok(r);
    };
    let pts = sample_level_set(model, c2, bx, n, seed);
    let outcomes = pts
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let h = model.h(&s.x, s.t, &s.p);
            let gap = model.legendre_gap(&s.x, s.t, &s.p);
            evaluate(
                i,
                model.dim,
                s,
                h,
                &[Inequality {
                    name: "|H_x| <= gamma (|p| + 1) (H_p.p - H)",
                    lhs: model.h_x(&s.x, s.t, &s.p).norm(),
                    rhs: gamma * (s.p.norm() + 1.0) * gap,
                    tol: point_tol(h),
                }],
            )
        })
        .collect();
    Ok(reduce("H3", Some(c2), n, outcomes))
}

/// Re-evaluates a witness from the model alone; returns the recomputed
/// `(lhs, rhs)` of its inequality.
pub fn recompute_witness(
    model: &HamiltonianModel,
    phi: Option<&PhiFunction>,
    profile: Option<&StructureProfile>,
    w: &Witness,
) -> Option<(f64, f64)> {
    let mut x = Vec2::zeros();
    let mut p = Vec2::zeros();
    for k in 0..model.dim {
        x[k] = w.x[k];
        p[k] = w.p[k];
    }
    let h = model.h(&x, w.t, &p);
    let hp = model.h_p(&x, w.t, &p);
    let gap = hp.dot(&p) - h;
    let c = &model.constants;
    Some(match w.inequality.as_str() {
        "phi(H) <= H_p.p - H" => (phi?.eval(h), gap),
        "|H_p| <= kappa (H_p.p - H)" => (hp.norm(), c.kappa * gap),
        "|H_t| <= psi(H) (H_p.p - H)" => (model.h_t(&x, w.t, &p).abs(), profile?.psi(h).ok()? * gap),
        "|H_x| <= gamma (|p| + 1) (H_p.p - H)" => {
            (model.h_x(&x, w.t, &p).norm(), c.gamma? * (p.norm() + 1.0) * gap)
        }
        _ => return None,
    })
}

/// Everything certified about one model.
#[derive(Debug, Clone, Serialize)]
pub struct CertificationReport {
    pub model: String,
    pub dim: usize,
    pub wording: String,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c_star: f64,
    pub kappa: f64,
    pub gamma: Option<f64>,
    pub phi: String,
    pub seed: u64,
    pub integrability: Option<IntegrabilityVerdict>,
    pub results: Vec<HypothesisResult>,
    pub g_lemma: Option<crate::transform::GLemmaReport>,
    pub notes: Vec<String>,
}

impl CertificationReport {
    pub fn new(model: &HamiltonianModel, phi: &PhiFunction, seed: u64) -> Self {
        let c = &model.constants;
        Self {
            model: model.name.clone(),
            dim: model.dim,
            wording: "certified-on-sample means no violation among the sampled points; \
                      it is not a proof of the almost-everywhere inequality"
                .into(),
            c0: c.c0,
            c1: c.c1,
            c2: c.c2,
            c_star: c.c_star(),
            kappa: c.kappa,
            gamma: c.gamma,
            phi: phi.label(),
            seed,
            integrability: None,
            results: Vec::new(),
            g_lemma: None,
            notes: model.notes.clone(),
        }
    }

    pub fn result(&self, hypothesis: &str) -> Option<&HypothesisResult> {
        self.results.iter().find(|r| r.hypothesis == hypothesis)
    }

    pub fn any_violation(&self) -> bool {
        self.results
            .iter()
            .any(|r| matches!(r.verdict, Verdict::Violated | Verdict::NotCoerciveOnSample))
            || self
                .integrability
                .as_ref()
                .is_some_and(|v| !v.is_integrable())
            || self.g_lemma.as_ref().is_some_and(|g| g.total_violations() > 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::{ScalarFn, MatrixFn};
    use crate::hamiltonians::{
        make_exponential, make_log_growth, make_power_norm, make_scalar_coefficient,
        PowerNormModel, StructureConstants,
    };
    use crate::structure::build_profile;

    fn quadratic() -> HamiltonianModel {
        make_power_norm(PowerNormModel::new(2.0, 2)).unwrap()
    }

    #[test]
    fn h0_quadratic_certified() {
        let m = quadratic();
        let r = check_h0(&m, &PhiFunction::linear(1.0), 0.0, &SampleBox::default(), 2000, 1).unwrap();
        assert_eq!(r.verdict, Verdict::CertifiedOnSample, "{r:?}");
        assert_eq!(r.samples_resolved, 2000);
    }

    #[test]
    fn h0_small_kappa_violated_near_unit_gradient() {
        let mut m = quadratic();
        m.constants.kappa = 0.1;
        let r = check_h0(&m, &PhiFunction::linear(1.0), 0.0, &SampleBox::default(), 2000, 1).unwrap();
        assert_eq!(r.verdict, Verdict::Violated);
        assert!(!r.witnesses.is_empty());
        // 2|p| <= 0.1 (|p|^2 + 1) fails worst at |p| = 1
        let w = &r.witnesses[0];
        let n: f64 = w.p.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((n - 1.0).abs() < 0.35, "{n}");
        for w in &r.witnesses {
            let (lhs, rhs) = recompute_witness(&m, Some(&PhiFunction::linear(1.0)), None, w).unwrap();
            assert!(lhs - rhs > w.tol);
        }
    }

    #[test]
    fn h0_constant_hamiltonian_violated() {
        let constants = StructureConstants {
            c0: 0.0,
            c1: 0.0,
            c2: 0.0,
            kappa: 1.0,
            gamma: None,
            coercive: false,
        };
        let m = HamiltonianModel::from_fn("constant", 1, |_: &Vec2, _, _: &Vec2| 2.0, constants).unwrap();
        let r = check_h0(&m, &PhiFunction::linear(1.0), 0.0, &SampleBox::default(), 100, 1).unwrap();
        assert_eq!(r.verdict, Verdict::Violated);
    }

    #[test]
    fn h0_rejects_mismatched_phi() {
        let m = quadratic();
        assert!(check_h0(&m, &PhiFunction::exponential_model(), 3.0, &SampleBox::default(), 10, 1).is_err());
    }

    #[test]
    fn h1_vacuous_for_autonomous() {
        let m = quadratic();
        let p = build_profile(PhiFunction::linear(1.0), 0.0).unwrap();
        let r = check_h1(&m, &p, 0.0, &SampleBox::default(), 100, 1).unwrap();
        assert_eq!(r.verdict, Verdict::CertifiedOnSample);
        assert!(r.is_vacuous());
        assert!(r.note.unwrap().contains("t-independent"));
    }

    #[test]
    fn h1_scalar_coefficient_cases() {
        // a = g(x)(1+t) with g = 1 + 0.5 sin(2 pi x)
        let g = ScalarFn::sum(vec![ScalarFn::constant(1.0), ScalarFn::sine(0.5, 1.0, 0)]);
        let a = ScalarFn::product(vec![g, ScalarFn::sum(vec![ScalarFn::constant(1.0), ScalarFn::time(1.0)])]);
        let m = make_scalar_coefficient(2.0, 1, a).unwrap();
        assert_eq!(m.constants.c1, 4.0);
        let p = build_profile(PhiFunction::linear(1.0), 0.0).unwrap();
        let r = check_h1(&m, &p, 4.0, &SampleBox::default(), 2000, 2).unwrap();
        assert_eq!(r.verdict, Verdict::CertifiedOnSample, "{r:?}");

        let a = ScalarFn::sum(vec![ScalarFn::monomial(1.0, 0, 2), ScalarFn::time(1.0)]);
        let m = make_scalar_coefficient(2.0, 1, a).unwrap();
        let r = check_h1(&m, &p, 4.0, &SampleBox::default(), 2000, 2).unwrap();
        assert_eq!(r.verdict, Verdict::Violated);
        let w = &r.witnesses[0];
        let (lhs, rhs) = recompute_witness(&m, None, Some(&p), w).unwrap();
        assert!(lhs - rhs > w.tol);
    }

    #[test]
    fn h2_cases() {
        let probe = CoercivityProbe::default();
        let r = check_h2(&quadratic(), &probe, 0).unwrap();
        assert_eq!(r.verdict, Verdict::CertifiedOnSample);
        let row = &r.coercivity.as_ref().unwrap()[0];
        for (rad, v) in row.radii.iter().zip(&row.min_h) {
            assert!((v - (rad * rad - 1.0)).abs() < 1e-9);
        }
        let r = check_h2(&make_exponential(2).unwrap(), &probe, 0).unwrap();
        assert_eq!(r.verdict, Verdict::CertifiedOnSample);
        let r = check_h2(&make_log_growth(1).unwrap(), &probe, 0).unwrap();
        assert_eq!(r.verdict, Verdict::CertifiedOnSample);

        let a = ScalarFn::PositivePartSquared { coef: 1.0, axis: 0 };
        let m = make_scalar_coefficient(2.0, 1, a).unwrap();
        let r = check_h2(&m, &probe, 0).unwrap();
        assert_eq!(r.verdict, Verdict::NotCoerciveOnSample);
        assert!(r.coercivity.unwrap()[0].min_h.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn h3_cases() {
        let r = check_h3(&quadratic(), 0.0, &SampleBox::default(), 100, 0).unwrap();
        assert!(r.is_vacuous());

        // f = 1 + x^4 in 1-D with a small gamma
        let mut p = PowerNormModel::new(2.0, 1);
        p.f = ScalarFn::sum(vec![ScalarFn::constant(1.0), ScalarFn::monomial(1.0, 0, 4)]);
        let mut m = make_power_norm(p).unwrap();
        m.constants.gamma = Some(0.01);
        let r = check_h3(&m, 1.0, &SampleBox::default(), 2000, 0).unwrap();
        assert_eq!(r.verdict, Verdict::Violated);
        let w = &r.witnesses[0];
        let (lhs, rhs) = recompute_witness(&m, None, None, w).unwrap();
        assert!(lhs - rhs > w.tol);

        // degenerate drift with Lipschitz A, c, f
        let mut d = PowerNormModel::new(2.0, 2);
        d.a = MatrixFn::Diag {
            d0: ScalarFn::sum(vec![ScalarFn::constant(1.0), ScalarFn::sine(0.5, 0.2, 1)]),
            d1: ScalarFn::constant(0.0),
        };
        d.coercive = false;
        d.c = Some(crate::coeffs::VectorFn::new(
            ScalarFn::sine(0.5, 0.3, 0),
            ScalarFn::constant(0.0),
        ));
        d.f = ScalarFn::sum(vec![ScalarFn::constant(1.5), ScalarFn::sine(0.5, 0.1, 1)]);
        let mut m = make_power_norm(d).unwrap();
        m.constants.gamma = Some(2.0);
        let r = check_h3(&m, 5.0, &SampleBox::default(), 2000, 0).unwrap();
        assert_eq!(r.verdict, Verdict::CertifiedOnSample, "{r:?}");
    }

    #[test]
    fn reports_are_deterministic() {
        let mut m = quadratic();
        m.constants.kappa = 0.5;
        let a = check_h0(&m, &PhiFunction::linear(1.0), 0.0, &SampleBox::default(), 500, 7).unwrap();
        let b = check_h0(&m, &PhiFunction::linear(1.0), 0.0, &SampleBox::default(), 500, 7).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}
