//! The structure function `phi` and the decay profile built from it.
//!
//! Given an increasing `phi >= 0` on `[c0, inf)` with `1/(s phi(s))`
//! integrable at infinity:
//!
//! * `F(tau) = 2 int_tau^inf dsigma / (sigma phi(sigma))`, decreasing,
//! * `eta = F^{-1}`, decreasing with `eta(0+) = inf` and
//!   `eta' = -eta phi(eta) / 2`,
//! * `psi`, the inverse of `r -> 2r + phi(2r)`,
//! * `t* = F(c*)` (or `inf` when `c* = 0`).
//!
//! `F` is tabulated once on a log-spaced grid of `tau - c0`; values between
//! nodes come from a local quadrature anchored at the nearest node, and `eta`
//! is obtained by a bracketed Newton iteration on that representation using
//! the exact derivative `F'(tau) = -2 / (tau phi(tau))`.

use crate::error::{Error, Result};
use crate::hamiltonians::HamiltonianModel;
use crate::quadrature::integrate;
use crate::hamiltonians::sample_level_set;
use crate::sampling::{Halton, SampleBox, SamplePoint, KINK_RADIUS};
use serde::{Deserialize, Serialize};
use std::cell::Cell;
use std::f64::consts::E;
use std::fmt;
use std::sync::Arc;

type PhiEval = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PhiKind {
    /// `slope * s`
    Linear { slope: f64 },
    /// `s (ln s - 1)`
    ExponentialModel,
    /// `r^2 / (1 + r)` where `r ln(1 + r) = s`
    LogGrowth,
    /// Piecewise-linear lower envelope of sampled `H_p.p - H`.
    Empirical { knots: Vec<[f64; 2]>, tail_exponent: f64 },
    Custom { label: String },
}

/// Increasing structure function on `[c0, inf)`.
#[derive(Clone)]
pub struct PhiFunction {
    eval: PhiEval,
    /// `d -> phi(c0 + d)`, for families that lose precision near `c0`.
    eval_offset: Option<PhiEval>,
    pub c0: f64,
    pub kind: PhiKind,
}

impl fmt::Debug for PhiFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PhiFunction")
            .field("c0", &self.c0)
            .field("kind", &self.kind)
            .finish()
    }
}

impl PhiFunction {
    pub fn from_fn(
        label: impl Into<String>,
        c0: f64,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            eval: Arc::new(f),
            eval_offset: None,
            c0,
            kind: PhiKind::Custom {
                label: label.into(),
            },
        }
    }

    pub fn linear(slope: f64) -> Self {
        Self {
            eval: Arc::new(move |s| slope * s),
            eval_offset: None,
            c0: 0.0,
            kind: PhiKind::Linear { slope },
        }
    }

    pub fn exponential_model() -> Self {
        Self {
            eval: Arc::new(|s: f64| (s * (s / E).ln()).max(0.0)),
            eval_offset: Some(Arc::new(|d: f64| ((E + d) * (d / E).ln_1p()).max(0.0))),
            c0: E,
            kind: PhiKind::ExponentialModel,
        }
    }

    pub fn log_growth() -> Self {
        Self {
            eval: Arc::new(|s: f64| {
                let r = invert_log_growth(s);
                r * r / (1.0 + r)
            }),
            eval_offset: None,
            c0: std::f64::consts::LN_2,
            kind: PhiKind::LogGrowth,
        }
    }

    /// Same function, different left endpoint.
    pub fn with_c0(mut self, c0: f64) -> Self {
        self.c0 = c0;
        self
    }

    pub fn eval(&self, s: f64) -> f64 {
        (self.eval)(s)
    }

    /// `phi(c0 + d)`.
    pub fn eval_offset(&self, d: f64) -> f64 {
        match &self.eval_offset {
            Some(f) => f(d),
            None => (self.eval)(self.c0 + d),
        }
    }

    pub fn label(&self) -> String {
        match &self.kind {
            PhiKind::Linear { slope } => format!("{slope} s"),
            PhiKind::ExponentialModel => "s (ln s - 1)".into(),
            PhiKind::LogGrowth => "r^2/(1+r), r ln(1+r) = s".into(),
            PhiKind::Empirical { .. } => "empirical envelope".into(),
            PhiKind::Custom { label } => label.clone(),
        }
    }

    /// First pair `s1 < s2` on a log-spaced sample of `(c0, hi]` where `phi`
    /// decreases or is negative, if any.
    pub fn monotonicity_witness(&self, hi: f64, n: usize) -> Option<(f64, f64)> {
        let base = self.c0.max(0.0);
        let span = (hi - base).max(1.0);
        let mut prev: Option<(f64, f64)> = None;
        for k in 0..n {
            let s = base + span * 10f64.powf(-6.0 + 6.0 * k as f64 / (n - 1).max(1) as f64);
            let v = self.eval(s);
            if !(v >= 0.0) {
                return Some((s, s));
            }
            if let Some((ps, pv)) = prev {
                if v < pv {
                    return Some((ps, s));
                }
            }
            prev = Some((s, v));
        }
        None
    }
}

/// Solves `r ln(1 + r) = s` for `r >= 0` (safeguarded Newton).
fn invert_log_growth(s: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    let g = |r: f64| r * r.ln_1p() - s;
    let mut lo = 0.0;
    let mut hi = 1.0;
    while g(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    let mut r = 0.5 * (lo + hi);
    for _ in 0..100 {
        let v = g(r);
        if v == 0.0 {
            return r;
        }
        if v < 0.0 {
            lo = r;
        } else {
            hi = r;
        }
        let slope = r.ln_1p() + r / (1.0 + r);
        let mut next = r - v / slope;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - r).abs() <= 2.0 * f64::EPSILON * r {
            return next;
        }
        r = next;
    }
    r
}

/// Analytic lower bound used for the tail `(M, inf)` of `F`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub form: TailForm,
    /// Coefficient of the bound.
    pub a: f64,
    /// Exponent (power form only; 1 for the `s (ln s - 1)` form).
    pub b: f64,
    pub start: f64,
    /// Upper bound for `2 int_M^inf ds/(s phi(s))`.
    pub tail: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailForm {
    /// `phi(s) >= a s^b`
    Power,
    /// `phi(s) >= a s (ln s - 1)`
    PowerLog,
}

/// Sampled bucket minima overestimate the true infimum slightly; the
/// empirical phi is shrunk by this factor to stay below it.
pub const EMPIRICAL_MARGIN: f64 = 0.99;
const MIN_TAIL_EXPONENT: f64 = 0.1;

/// Fits `a s^b` and `a s (ln s - 1)` lower bounds of `phi` on `[M, 4M]`,
/// lowers the coefficient until the bound holds on `[M, 64M]`, and returns the
/// form with the smaller tail integral.
pub fn fit_tail(phi: &PhiFunction, start: f64) -> Result<TailFit> {
    let fit_pts: Vec<f64> = (0..16).map(|i| start * 4f64.powf(i as f64 / 15.0)).collect();
    let check_pts: Vec<f64> = (0..32).map(|i| start * 64f64.powf(i as f64 / 31.0)).collect();
    let mut logs = Vec::with_capacity(fit_pts.len());
    for &s in &fit_pts {
        let v = phi.eval(s);
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::NonIntegrable(format!(
                "phi({s:e}) = {v} is not positive in the tail"
            )));
        }
        logs.push((s.ln(), v.ln()));
    }
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let b = sxy / sxx;

    let mut candidates = Vec::new();
    if b >= MIN_TAIL_EXPONENT {
        let a = check_pts
            .iter()
            .map(|&s| phi.eval(s) / s.powf(b))
            .fold(f64::INFINITY, f64::min);
        if a > 0.0 && a.is_finite() {
            candidates.push(TailFit {
                form: TailForm::Power,
                a,
                b,
                start,
                tail: 2.0 / (a * b * start.powf(b)),
            });
        }
    }
    if start > E {
        let ratios: Vec<f64> = check_pts
            .iter()
            .map(|&s| phi.eval(s) / (s * (s.ln() - 1.0)))
            .collect();
        let a = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let first = ratios[0];
        let last = *ratios.last().expect("non-empty");
        // accept only if the ratio does not decay along the check range
        if a > 0.0 && a.is_finite() && last >= 0.9 * first {
            candidates.push(TailFit {
                form: TailForm::PowerLog,
                a,
                b: 1.0,
                start,
                tail: 2.0 / (a * start * (start.ln() - 1.0)),
            });
        }
    }
    candidates
        .into_iter()
        .min_by(|p, q| p.tail.total_cmp(&q.tail))
        .ok_or_else(|| {
            Error::NonIntegrable(format!(
                "no lower bound with positive growth: fitted exponent {b:.4} on [{start:e}, {:e}]",
                4.0 * start
            ))
        })
}

const QUAD_REL: f64 = 1e-14;
const QUAD_PANELS: usize = 500;

/// `2 int_lo^hi dsigma / (sigma phi(sigma))` for `c0 < lo <= hi`, integrated
/// in `w = ln(sigma - c0)`.
fn integral_between(phi: &PhiFunction, lo: f64, hi: f64) -> Result<f64> {
    if lo == hi {
        return Ok(0.0);
    }
    let c0 = phi.c0;
    let bad = Cell::new(None);
    let q = integrate(
        |w| {
            let d = w.exp();
            let s = c0 + d;
            let v = phi.eval_offset(d);
            if !(v > 0.0) || !v.is_finite() {
                bad.set(Some((s, v)));
                return 0.0;
            }
            d / (s * v)
        },
        (lo - c0).ln(),
        (hi - c0).ln(),
        1e-300,
        QUAD_REL,
        QUAD_PANELS,
    );
    if let Some((s, v)) = bad.get() {
        return Err(Error::Domain(format!(
            "phi({s}) = {v} is not positive inside the integration range"
        )));
    }
    Ok(2.0 * q.value)
}

fn tail_start(phi: &PhiFunction, tau: f64) -> f64 {
    1e10 * tau.max(phi.c0).max(1.0)
}

/// `F(tau)` together with the tail bound used beyond the quadrature range.
pub fn compute_f_detailed(phi: &PhiFunction, tau: f64) -> Result<(f64, TailFit)> {
    if !(tau > phi.c0) {
        return Err(Error::OutOfDomain {
            what: "tau",
            value: tau,
            lower: phi.c0,
            upper: f64::INFINITY,
        });
    }
    let m = tail_start(phi, tau);
    let fit = fit_tail(phi, m)?;
    let body = integral_between(phi, tau, m)?;
    Ok((body + fit.tail, fit))
}

/// `F(tau) = 2 int_tau^inf dsigma / (sigma phi(sigma))`.
pub fn compute_f(phi: &PhiFunction, tau: f64) -> Result<f64> {
    compute_f_detailed(phi, tau).map(|(v, _)| v)
}

/// `psi(tau)`: the `r > c0` with `2r + phi(2r) = tau`.
pub fn compute_psi(phi: &PhiFunction, tau: f64) -> Result<f64> {
    let c0 = phi.c0;
    let lower = 2.0 * c0 + phi.eval(2.0 * c0);
    if !(tau > lower) || !tau.is_finite() {
        return Err(Error::OutOfDomain {
            what: "tau",
            value: tau,
            lower,
            upper: f64::INFINITY,
        });
    }
    let g = |r: f64| 2.0 * r + phi.eval(2.0 * r) - tau;
    let mut lo = c0;
    // phi >= 0 gives g(tau/2) >= 0
    let mut hi = 0.5 * tau;
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Monotonicity plus the tail-fit certification of the integral condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum IntegrabilityVerdict {
    Integrable {
        a_point: f64,
        f_at_a: f64,
        tail_fit: TailFit,
    },
    NotMonotone {
        s1: f64,
        s2: f64,
    },
    NotIntegrable {
        reason: String,
    },
}

impl IntegrabilityVerdict {
    pub fn is_integrable(&self) -> bool {
        matches!(self, IntegrabilityVerdict::Integrable { .. })
    }
}

/// Certifies `int_A^inf ds/(s phi(s)) < inf`; `A` defaults to `c0 + max(c0, 1)`.
pub fn check_integrability(phi: &PhiFunction, a_point: Option<f64>) -> IntegrabilityVerdict {
    let hi = 1e8 * phi.c0.max(1.0);
    if let Some((s1, s2)) = phi.monotonicity_witness(hi, 400) {
        return IntegrabilityVerdict::NotMonotone { s1, s2 };
    }
    let a = a_point.unwrap_or(phi.c0 + phi.c0.max(1.0));
    match compute_f_detailed(phi, a) {
        Ok((f_at_a, tail_fit)) => IntegrabilityVerdict::Integrable {
            a_point: a,
            f_at_a,
            tail_fit,
        },
        Err(e) => IntegrabilityVerdict::NotIntegrable {
            reason: e.to_string(),
        },
    }
}

/// Tabulated `F` with `eta`, `psi`, `c*` and `t*`.
#[derive(Clone)]
pub struct StructureProfile {
    phi: PhiFunction,
    nodes: Vec<f64>,
    f_nodes: Vec<f64>,
    f_at_c0: f64,
    tail: TailFit,
    pub c_star: f64,
    pub t_star: f64,
}

impl fmt::Debug for StructureProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StructureProfile")
            .field("phi", &self.phi)
            .field("nodes", &self.nodes.len())
            .field("c_star", &self.c_star)
            .field("t_star", &self.t_star)
            .finish()
    }
}

const NODES_PER_DECADE: i32 = 40;
const NODE_DECADES: i32 = 10;

/// Builds the profile for `phi` at level `c_star`.
pub fn build_profile(phi: PhiFunction, c_star: f64) -> Result<StructureProfile> {
    let c0 = phi.c0;
    if !(c_star >= c0 || (c_star == 0.0 && c0 == 0.0)) || !c_star.is_finite() {
        return Err(Error::Domain(format!(
            "c* = {c_star} must satisfy c* >= c0 = {c0}"
        )));
    }
    let scale = c0.max(1.0);
    let nodes: Vec<f64> = (-NODE_DECADES * NODES_PER_DECADE..=NODE_DECADES * NODES_PER_DECADE)
        .map(|k| c0 + scale * 10f64.powf(k as f64 / NODES_PER_DECADE as f64))
        .collect();
    let top = *nodes.last().expect("non-empty");
    let (f_top, tail) = compute_f_detailed(&phi, top)?;
    let mut f_nodes = vec![0.0; nodes.len()];
    f_nodes[nodes.len() - 1] = f_top;
    for k in (0..nodes.len() - 1).rev() {
        f_nodes[k] = f_nodes[k + 1] + integral_between(&phi, nodes[k], nodes[k + 1])?;
    }
    let phi_c0 = phi.eval(c0);
    let f_at_c0 = if c0 > 0.0 && phi_c0 > 0.0 {
        // the integrand in w = ln(sigma - c0) decays like e^w below the first node
        f_nodes[0] + 2.0 * (nodes[0] - c0) / (c0 * phi_c0)
    } else {
        f64::INFINITY
    };
    let mut profile = StructureProfile {
        phi,
        nodes,
        f_nodes,
        f_at_c0,
        tail,
        c_star,
        t_star: f64::INFINITY,
    };
    profile.t_star = if c_star == 0.0 {
        f64::INFINITY
    } else if c_star == c0 {
        f_at_c0
    } else {
        profile.f(c_star)?
    };
    Ok(profile)
}

impl StructureProfile {
    pub fn phi(&self) -> &PhiFunction {
        &self.phi
    }

    pub fn tail_fit(&self) -> &TailFit {
        &self.tail
    }

    /// `F(c0)`, infinite when `c0 = 0` or `phi(c0) = 0`.
    pub fn f_at_c0(&self) -> f64 {
        self.f_at_c0
    }

    pub fn has_finite_horizon(&self) -> bool {
        self.t_star.is_finite()
    }

    pub fn f(&self, tau: f64) -> Result<f64> {
        let c0 = self.phi.c0;
        if tau == c0 && self.f_at_c0.is_finite() {
            return Ok(self.f_at_c0);
        }
        if !(tau > c0) {
            return Err(Error::OutOfDomain {
                what: "tau",
                value: tau,
                lower: c0,
                upper: f64::INFINITY,
            });
        }
        let j = self.nodes.partition_point(|&n| n < tau);
        if j == self.nodes.len() {
            return compute_f(&self.phi, tau);
        }
        Ok(self.f_nodes[j] + integral_between(&self.phi, tau, self.nodes[j])?)
    }

    /// `eta(s) = F^{-1}(s)` for `0 < s < t*` (which is `F(c0)` when `c* = c0`).
    pub fn eta(&self, s: f64) -> Result<f64> {
        let upper = self.t_star.min(self.f_at_c0);
        if !(s > 0.0 && s < upper) {
            return Err(Error::OutOfDomain {
                what: "s",
                value: s,
                lower: 0.0,
                upper,
            });
        }
        let c0 = self.phi.c0;
        let last = self.nodes.len() - 1;
        // F is decreasing: find the bracket [lo, hi] with F(lo) >= s >= F(hi)
        let (mut lo, mut hi) = if s > self.f_nodes[0] {
            (c0, self.nodes[0])
        } else if s < self.f_nodes[last] {
            let mut lo = self.nodes[last];
            let mut hi = 2.0 * lo;
            while self.f(hi)? > s {
                lo = hi;
                hi *= 2.0;
                if !hi.is_finite() {
                    return Err(Error::Domain(format!("eta({s}) overflows")));
                }
            }
            (lo, hi)
        } else {
            let j = self.f_nodes.partition_point(|&v| v > s);
            (self.nodes[j - 1], self.nodes[j])
        };
        let mut tau = if lo == c0 { 0.5 * (lo + hi) } else { (lo * hi).sqrt() };
        for _ in 0..200 {
            let g = self.f(tau)? - s;
            if g == 0.0 {
                return Ok(tau);
            }
            if g > 0.0 {
                lo = tau;
            } else {
                hi = tau;
            }
            let step = g * tau * self.phi.eval(tau) / 2.0;
            let mut next = tau + step;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - tau).abs() <= 2.0 * f64::EPSILON * tau || hi - lo <= 4.0 * f64::EPSILON * hi
            {
                return Ok(next);
            }
            tau = next;
        }
        Ok(tau)
    }

    pub fn psi(&self, tau: f64) -> Result<f64> {
        compute_psi(&self.phi, tau)
    }

    /// Left endpoint of `psi`'s domain, `2 c0 + phi(2 c0)`.
    pub fn psi_lower(&self) -> f64 {
        2.0 * self.phi.c0 + self.phi.eval(2.0 * self.phi.c0)
    }

    /// `max(eta(t), eta(t*/2))`.
    pub fn eta_capped(&self, t: f64) -> Result<f64> {
        if !self.t_star.is_finite() {
            return Err(Error::Misuse(
                "capped decay profile needs c* > 0 (finite t*); use eta directly".into(),
            ));
        }
        let half = 0.5 * self.t_star;
        if t <= half {
            self.eta(t)
        } else {
            self.eta(half)
        }
    }

    /// Largest ODE, round-trip and psi-identity residuals over `s_values`.
    pub fn invariant_residuals(&self, s_values: &[f64]) -> Result<ProfileResiduals> {
        let mut out = ProfileResiduals::default();
        for &s in s_values {
            let eta = self.eta(s)?;
            let phi_eta = self.phi.eval(eta);
            let h = 1e-4 * s.min(self.t_star - s);
            let d = (self.eta(s + h)? - self.eta(s - h)?) / (2.0 * h);
            let scale = eta * phi_eta;
            out.ode = out.ode.max((d + 0.5 * scale).abs() / scale);
            out.round_trip = out
                .round_trip
                .max((self.f(eta)? - s).abs() / (1.0 + s));
            if eta > 2.0 * self.phi.c0 && eta + phi_eta > self.psi_lower() {
                let psi = self.psi(eta + phi_eta)?;
                out.psi = out.psi.max((psi - 0.5 * eta).abs() / (0.5 * eta));
                out.psi_checked += 1;
            }
            out.samples += 1;
        }
        Ok(out)
    }

    pub fn dump(&self) -> ProfileDump {
        let stride = 10;
        let phi_samples = self
            .nodes
            .iter()
            .step_by(stride)
            .map(|&s| [s, self.phi.eval(s)])
            .collect();
        let f_samples = self
            .nodes
            .iter()
            .zip(&self.f_nodes)
            .step_by(stride)
            .map(|(&s, &f)| [s, f])
            .collect();
        ProfileDump {
            phi: self.phi.label(),
            c0: self.phi.c0,
            phi_samples,
            f_samples,
            c_star: self.c_star,
            t_star: self.t_star.is_finite().then_some(self.t_star),
            tail_fit: self.tail,
        }
    }
}

/// Relative residuals of the profile identities.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct ProfileResiduals {
    pub samples: usize,
    /// `|eta' + eta phi(eta)/2| / (eta phi(eta))`
    pub ode: f64,
    /// `|F(eta(s)) - s| / (1 + s)`
    pub round_trip: f64,
    /// `|psi(eta + phi(eta)) - eta/2| / (eta/2)`
    pub psi: f64,
    pub psi_checked: usize,
}

/// Audit document for a profile. `t_star = null` means `+inf`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileDump {
    pub phi: String,
    pub c0: f64,
    pub phi_samples: Vec<[f64; 2]>,
    #[serde(rename = "F_samples")]
    pub f_samples: Vec<[f64; 2]>,
    pub c_star: f64,
    pub t_star: Option<f64>,
    pub tail_fit: TailFit,
}

/// Sampled lower envelope of `H_p.p - H` by level.
#[derive(Debug, Clone, Serialize)]
pub struct EmpiricalPhi {
    pub levels: Vec<f64>,
    /// Minimum of `H_p.p - H` over samples with `H` in `[s_k, s_{k+1}]`;
    /// `None` marks an unresolved level.
    pub raw: Vec<Option<f64>>,
    /// Running minimum of `raw` from the right (nondecreasing).
    pub envelope: Vec<Option<f64>>,
    pub samples_per_level: Vec<usize>,
}

impl EmpiricalPhi {
    pub fn resolved(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.levels
            .iter()
            .zip(&self.envelope)
            .filter_map(|(&s, e)| e.map(|v| (s, v)))
    }

    /// Continuous nondecreasing interpolant lying below every bucket minimum,
    /// with a power-law extrapolation past the last level.
    pub fn to_phi(&self, c0: f64) -> Result<PhiFunction> {
        let pts: Vec<(f64, f64)> = self.resolved().collect();
        if pts.len() < 2 {
            return Err(Error::Domain(
                "fewer than two resolved levels for an empirical phi".into(),
            ));
        }
        if let Some(&(s, v)) = pts.iter().find(|p| p.1 < 0.0) {
            return Err(Error::Domain(format!(
                "sampled H_p.p - H = {v} < 0 at level {s}; no admissible phi"
            )));
        }
        // knot at level k carries the envelope of bucket k-1
        let mut knots: Vec<[f64; 2]> = Vec::with_capacity(pts.len());
        knots.push([pts[0].0, EMPIRICAL_MARGIN * pts[0].1]);
        for w in pts.windows(2) {
            knots.push([w[1].0, EMPIRICAL_MARGIN * w[0].1]);
        }
        let n = knots.len();
        let [s1, v1] = knots[n - 2];
        let [s2, v2] = knots[n - 1];
        let tail_exponent = if v1 > 0.0 && v2 > 0.0 {
            ((v2 / v1).ln() / (s2 / s1).ln()).clamp(0.0, 2.0)
        } else {
            0.0
        };
        let ks = knots.clone();
        let eval = move |s: f64| -> f64 {
            let first = ks[0];
            let last = ks[ks.len() - 1];
            if s <= first[0] {
                return first[1];
            }
            if s >= last[0] {
                return last[1] * (s / last[0]).powf(tail_exponent);
            }
            let j = ks.partition_point(|k| k[0] <= s);
            let [a, fa] = ks[j - 1];
            let [b, fb] = ks[j];
            fa + (fb - fa) * (s - a) / (b - a)
        };
        Ok(PhiFunction {
            eval: Arc::new(eval),
            eval_offset: None,
            c0,
            kind: PhiKind::Empirical {
                knots,
                tail_exponent,
            },
        })
    }
}

/// Points with `H` in `[level, level + width]`. Coercive models get `p`
/// rescaled along its ray onto a target level spread across the bucket;
/// other models fall back to rejection sampling.
fn bucket_samples(
    model: &HamiltonianModel,
    level: f64,
    width: f64,
    bx: &SampleBox,
    n: usize,
    seed: u64,
) -> Vec<SamplePoint> {
    if !model.constants.coercive {
        return sample_level_set(model, level, bx, n, seed);
    }
    let dim = model.dim;
    let mut seq = Halton::new(dim + 4, seed);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let u = seq.next_point();
        let s = bx.map(dim, &u);
        let target = level + width * u[dim + 3];
        let dir = s.p / s.p.norm();
        let value = |r: f64| model.h(&s.x, s.t, &(dir * r));
        let mut lo = KINK_RADIUS;
        let mut hi = bx.p_radius;
        if value(lo) >= target || value(hi) < target {
            continue;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if value(mid) >= target {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 4.0 * f64::EPSILON * hi {
                break;
            }
        }
        out.push(SamplePoint { p: dir * hi, ..s });
    }
    out
}

/// Samples `H_p.p - H` level by level and returns its monotone lower envelope.
pub fn extract_empirical_phi(
    model: &HamiltonianModel,
    levels: &[f64],
    bx: &SampleBox,
    n: usize,
    seed: u64,
) -> Result<EmpiricalPhi> {
    if levels.windows(2).any(|w| !(w[1] > w[0])) || levels.is_empty() {
        return Err(Error::Domain("levels must be increasing and non-empty".into()));
    }
    if levels[0] < model.constants.c0 {
        return Err(Error::Domain(format!(
            "level {} below c0 = {}",
            levels[0], model.constants.c0
        )));
    }
    let mut raw = Vec::with_capacity(levels.len());
    let mut counts = Vec::with_capacity(levels.len());
    for (k, &s) in levels.iter().enumerate() {
        let width = if k + 1 < levels.len() {
            levels[k + 1] - s
        } else if k > 0 {
            s - levels[k - 1]
        } else {
            s.abs().max(1.0)
        };
        let pts = bucket_samples(model, s, width, bx, n, seed.wrapping_add(k as u64));
        let mut best: Option<f64> = None;
        let mut count = 0;
        for p in &pts {
            let h = model.h(&p.x, p.t, &p.p);
            if h >= s && h <= s + width {
                let gap = model.legendre_gap(&p.x, p.t, &p.p);
                best = Some(best.map_or(gap, |b: f64| b.min(gap)));
                count += 1;
            }
        }
        raw.push(best);
        counts.push(count);
    }
    let mut envelope = vec![None; raw.len()];
    let mut running = f64::INFINITY;
    for k in (0..raw.len()).rev() {
        if let Some(v) = raw[k] {
            running = running.min(v);
            envelope[k] = Some(running);
        }
    }
    Ok(EmpiricalPhi {
        levels: levels.to_vec(),
        raw,
        envelope,
        samples_per_level: counts,
    })
}
