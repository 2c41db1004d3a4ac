//! The exponential change of unknown `v = -exp(-u)` and the transformed
//! Hamiltonian `G(x,t,v,p) = -v H(x, t, -p/v)`.

use crate::coeffs::Vec2;
use crate::conditions::{evaluate, reduce, HypothesisResult, Inequality, PointOutcome};
use crate::error::{Error, Result};
use crate::hamiltonians::HamiltonianModel;
use crate::sampling::{scale_to_level, Halton, SampleBox, SamplePoint};
use crate::solver::GridField;
use crate::structure::StructureProfile;
use rayon::prelude::*;
use serde::Serialize;

/// Largest `u` accepted by `u_to_v`; `exp(-690)` is still a normal f64.
pub const U_MAX: f64 = 690.0;

/// `v` is sampled in `[-1, -V_MIN]`.
pub const V_MIN: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct TransformedHamiltonian {
    pub base: HamiltonianModel,
}

impl TransformedHamiltonian {
    pub fn new(base: HamiltonianModel) -> Self {
        Self { base }
    }

    pub fn g(&self, x: &Vec2, t: f64, v: f64, p: &Vec2) -> f64 {
        -v * self.base.h(x, t, &(-p / v))
    }

    /// `H_p(q).q - H(q)` at `q = -p/v`.
    pub fn g_v(&self, x: &Vec2, t: f64, v: f64, p: &Vec2) -> f64 {
        self.base.legendre_gap(x, t, &(-p / v))
    }

    pub fn g_p(&self, x: &Vec2, t: f64, v: f64, p: &Vec2) -> Vec2 {
        self.base.h_p(x, t, &(-p / v))
    }

    pub fn g_t(&self, x: &Vec2, t: f64, v: f64, p: &Vec2) -> f64 {
        -v * self.base.h_t(x, t, &(-p / v))
    }

    pub fn g_x(&self, x: &Vec2, t: f64, v: f64, p: &Vec2) -> Vec2 {
        -v * self.base.h_x(x, t, &(-p / v))
    }
}

/// Shifts `u` so that its minimum is zero; returns the field and the shift added.
pub fn normalize(u: &GridField) -> (GridField, f64) {
    let shift = -u.min();
    (u.map(|x| x + shift), shift)
}

/// `v = -exp(-u)` for `0 <= u <= U_MAX`.
pub fn u_to_v(u: &GridField) -> Result<GridField> {
    let (k, min) = u.argmin();
    if min < 0.0 {
        return Err(Error::Normalization(format!(
            "u has minimum {min} at index {k}; shift by the minimum first"
        )));
    }
    let max = u.max();
    if max > U_MAX {
        return Err(Error::Normalization(format!(
            "u reaches {max} > {U_MAX}; exp(-u) would underflow"
        )));
    }
    Ok(GridField {
        values: u.values.par_iter().map(|&x| -(-x).exp()).collect(),
        ..u.clone()
    })
}

/// `u = -ln(-v)` for `-1 <= v < 0`.
pub fn v_to_u(v: &GridField) -> Result<GridField> {
    if let Some((k, &x)) = v
        .values
        .iter()
        .enumerate()
        .find(|(_, &x)| !(-1.0..0.0).contains(&x))
    {
        return Err(Error::Normalization(format!(
            "v = {x} at index {k} is outside [-1, 0)"
        )));
    }
    Ok(GridField {
        values: v.values.par_iter().map(|&x| -(-x).ln()).collect(),
        ..v.clone()
    })
}

/// Results of the transferred hypotheses.
#[derive(Debug, Clone, Serialize)]
pub struct GLemmaReport {
    pub model: String,
    pub c_star: f64,
    pub v_range: [f64; 2],
    pub results: Vec<HypothesisResult>,
}

impl GLemmaReport {
    pub fn result(&self, name: &str) -> Option<&HypothesisResult> {
        self.results.iter().find(|r| r.hypothesis == name)
    }

    pub fn total_violations(&self) -> usize {
        self.results.iter().map(|r| r.violations).sum()
    }
}

/// A point `(x, t, v, p)` with `G >= c*`.
#[derive(Debug, Clone, Copy)]
struct GPoint {
    s: SamplePoint,
    v: f64,
}

fn sample_g_points(tr: &TransformedHamiltonian, level: f64, bx: &SampleBox, n: usize, seed: u64) -> Vec<GPoint> {
    let base = &tr.base;
    let dim = base.dim;
    let mut seq = Halton::new(dim + 4, seed);
    let coercive = base.constants.coercive;
    let attempts = if coercive { n } else { 20 * n };
    let mut out = Vec::with_capacity(n);
    for _ in 0..attempts {
        if out.len() == n {
            break;
        }
        let u = seq.next_point();
        // q = -p/v is drawn from the box, then p = -v q
        let s = bx.map(dim, &u);
        let v = -(V_MIN + (1.0 - V_MIN) * u[dim + 3]);
        let value = |q: &Vec2| -v * base.h(&s.x, s.t, q);
        let q = if coercive {
            scale_to_level(s.p, level, bx.p_radius, value)
        } else {
            (value(&s.p) >= level).then_some(s.p)
        };
        if let Some(q) = q {
            out.push(GPoint {
                s: SamplePoint { p: -v * q, ..s },
                v,
            });
        }
    }
    out
}

/// Checks (G0), (G1) and (G3) on `n` points with `v in [-1, -V_MIN]` and
/// `G >= c*`. (G1) and (G3) are vacuous for t- and x-independent models.
pub fn check_g_lemma(
    tr: &TransformedHamiltonian,
    profile: &StructureProfile,
    bx: &SampleBox,
    n: usize,
    seed: u64,
) -> Result<GLemmaReport> {
    let base = &tr.base;
    let c = base.constants;
    let c_star = profile.c_star;
    let phi = profile.phi();
    let pts = sample_g_points(tr, c_star, bx, n, seed);
    let dim = base.dim;

    let tol = |g: f64| 1e-8 * (1.0 + g.abs());
    let with_v = |mut o: PointOutcome, v: f64| {
        if let PointOutcome::Checked { failures, .. } = &mut o {
            for w in failures {
                w.v = Some(v);
            }
        }
        o
    };

    let g0: Vec<PointOutcome> = pts
        .par_iter()
        .enumerate()
        .map(|(i, gp)| {
            let (x, t, v, p) = (&gp.s.x, gp.s.t, gp.v, &gp.s.p);
            let g = tr.g(x, t, v, p);
            let gv = tr.g_v(x, t, v, p);
            let o = evaluate(
                i,
                dim,
                &gp.s,
                g,
                &[
                    Inequality {
                        name: "phi(G) <= G_v",
                        lhs: phi.eval(g),
                        rhs: gv,
                        tol: tol(g),
                    },
                    Inequality {
                        name: "|G_p| <= kappa G_v",
                        lhs: tr.g_p(x, t, v, p).norm(),
                        rhs: c.kappa * gv,
                        tol: tol(g),
                    },
                ],
            );
            with_v(o, v)
        })
        .collect();
    let mut results = vec![reduce("G0", Some(c_star), n, g0)];

    if base.is_t_dependent() {
        let psi_lower = profile.psi_lower();
        let g1: Vec<PointOutcome> = pts
            .par_iter()
            .enumerate()
            .map(|(i, gp)| {
                let (x, t, v, p) = (&gp.s.x, gp.s.t, gp.v, &gp.s.p);
                let g = tr.g(x, t, v, p);
                if !(g > psi_lower) {
                    return PointOutcome::Unresolved;
                }
                let Ok(psi) = profile.psi(g) else {
                    return PointOutcome::Unresolved;
                };
                let o = evaluate(
                    i,
                    dim,
                    &gp.s,
                    g,
                    &[Inequality {
                        name: "|G_t| <= psi(G) G_v",
                        lhs: tr.g_t(x, t, v, p).abs(),
                        rhs: psi * tr.g_v(x, t, v, p),
                        tol: tol(g),
                    }],
                );
                with_v(o, v)
            })
            .collect();
        results.push(reduce("G1", Some(c_star), n, g1));
    } else {
        results.push(vacuous("G1", "t-independent (G_t = 0)", n));
    }

    match (base.is_x_dependent(), c.gamma) {
        (false, _) => results.push(vacuous("G3", "x-independent (G_x = 0)", n)),
        (true, None) => {
            let mut r = reduce("G3", Some(c_star), n, Vec::new());
            r.note = Some("gamma not set for an x-dependent model".into());
            results.push(r);
        }
        (true, Some(gamma)) => {
            let g3: Vec<PointOutcome> = pts
                .par_iter()
                .enumerate()
                .map(|(i, gp)| {
                    let (x, t, v, p) = (&gp.s.x, gp.s.t, gp.v, &gp.s.p);
                    let g = tr.g(x, t, v, p);
                    let o = evaluate(
                        i,
                        dim,
                        &gp.s,
                        g,
                        &[Inequality {
                            name: "|G_x| <= gamma (|p| + 1) G_v",
                            lhs: tr.g_x(x, t, v, p).norm(),
                            rhs: gamma * (p.norm() + 1.0) * tr.g_v(x, t, v, p),
                            tol: tol(g),
                        }],
                    );
                    with_v(o, v)
                })
                .collect();
            results.push(reduce("G3", Some(c_star), n, g3));
        }
    }
    Ok(GLemmaReport {
        model: base.name.clone(),
        c_star,
        v_range: [-1.0, -V_MIN],
        results,
    })
}

fn vacuous(name: &str, note: &str, n: usize) -> HypothesisResult {
    let mut r = reduce(name, None, n, Vec::new());
    r.verdict = crate::conditions::Verdict::CertifiedOnSample;
    r.note = Some(format!("vacuous: {note}"));
    r
}
