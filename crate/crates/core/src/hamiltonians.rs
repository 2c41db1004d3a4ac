//! Hamiltonian models `H(x, t, p)` with exact derivative evaluators.
//!
//! A [`HamiltonianModel`] bundles the evaluators for `H`, `H_p`, `H_t` and
//! `H_x` with the structure constants the certification and estimate checks
//! need (`c0`, `c1`, `c2`, `kappa`, `gamma`, the coercivity flag and, when
//! the family has one in closed form, the structure function `phi`).
//!
//! Built-in families:
//!
//! * power-norm: `|A p|^m - b.p - f`, optionally with the degenerate drift
//!   `b = A c` ([`make_power_norm`]),
//! * scalar coefficient: `a(x,t) |p|^m` ([`make_scalar_coefficient`]),
//! * exponential: `exp(|p|)` ([`make_exponential`]),
//! * log growth: `|p| ln(1 + |p|)` ([`make_log_growth`]).

use crate::coeffs::{project, project_matrix, MatrixFn, ScalarFn, Vec2, VectorFn};
use crate::error::{Error, Result};
use crate::sampling::{scale_to_level, Halton, SampleBox, SamplePoint};
use crate::structure::PhiFunction;
use serde::{Deserialize, Serialize};
use std::f64::consts::E;
use std::fmt;
use std::sync::Arc;

pub type ScalarEval = Arc<dyn Fn(&Vec2, f64, &Vec2) -> f64 + Send + Sync>;
pub type VectorEval = Arc<dyn Fn(&Vec2, f64, &Vec2) -> Vec2 + Send + Sync>;

/// Level thresholds and constants attached to a model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructureConstants {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub kappa: f64,
    pub gamma: Option<f64>,
    pub coercive: bool,
}

impl StructureConstants {
    /// `max(c0, c1)` in the coercive case, `max(c0, c1, c2)` otherwise.
    pub fn c_star(&self) -> f64 {
        if self.coercive {
            self.c0.max(self.c1)
        } else {
            self.c0.max(self.c1).max(self.c2)
        }
    }
}

#[derive(Clone)]
pub struct HamiltonianModel {
    pub name: String,
    pub dim: usize,
    h: ScalarEval,
    h_p: VectorEval,
    h_t: Option<ScalarEval>,
    h_x: Option<VectorEval>,
    pub constants: StructureConstants,
    /// Closed-form structure function, when the family provides one.
    pub phi: Option<PhiFunction>,
    /// Set when `H(p) = coef |p|^m - offset` exactly.
    pub radial_power: Option<RadialPower>,
    pub notes: Vec<String>,
}

/// `H(p) = coef |p|^m - offset`, which has a closed-form Legendre transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialPower {
    pub coef: f64,
    pub m: f64,
    pub offset: f64,
}

impl RadialPower {
    /// `L(q) = (m-1) m^{-m/(m-1)} coef^{-1/(m-1)} |q|^{m/(m-1)} + offset`.
    pub fn lagrangian(&self, q: f64) -> f64 {
        let m = self.m;
        let k = m / (m - 1.0);
        (m - 1.0) * m.powf(-k) * self.coef.powf(-1.0 / (m - 1.0)) * q.abs().powf(k) + self.offset
    }
}

impl fmt::Debug for HamiltonianModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HamiltonianModel")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("t_dependent", &self.h_t.is_some())
            .field("x_dependent", &self.h_x.is_some())
            .field("constants", &self.constants)
            .finish()
    }
}

impl HamiltonianModel {
    /// Builds a model from raw evaluators. `h_t`/`h_x` may be `None` for
    /// t- or x-independent Hamiltonians.
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        h: ScalarEval,
        h_p: VectorEval,
        h_t: Option<ScalarEval>,
        h_x: Option<VectorEval>,
        constants: StructureConstants,
    ) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidModel(format!("dimension {dim} not in {{1, 2}}")));
        }
        Ok(Self {
            name: name.into(),
            dim,
            h,
            h_p,
            h_t,
            h_x,
            constants,
            phi: None,
            radial_power: None,
            notes: Vec::new(),
        })
    }

    /// A model given by `H` alone; `H_p` falls back to centered differences.
    pub fn from_fn(
        name: impl Into<String>,
        dim: usize,
        h: impl Fn(&Vec2, f64, &Vec2) -> f64 + Send + Sync + 'static,
        constants: StructureConstants,
    ) -> Result<Self> {
        let h: ScalarEval = Arc::new(h);
        let hh = h.clone();
        let h_p: VectorEval = Arc::new(move |x, t, p| {
            let mut g = Vec2::zeros();
            for k in 0..dim {
                g[k] = centered_difference(|s| {
                    let mut q = *p;
                    q[k] = s;
                    hh(x, t, &q)
                }, p[k])
                .0;
            }
            g
        });
        Self::new(name, dim, h, h_p, None, None, constants)
    }

    pub fn with_phi(mut self, phi: PhiFunction) -> Self {
        self.phi = Some(phi);
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    pub fn h(&self, x: &Vec2, t: f64, p: &Vec2) -> f64 {
        (self.h)(x, t, p)
    }

    pub fn h_p(&self, x: &Vec2, t: f64, p: &Vec2) -> Vec2 {
        project((self.h_p)(x, t, p), self.dim)
    }

    /// `H_t`, zero for t-independent models.
    pub fn h_t(&self, x: &Vec2, t: f64, p: &Vec2) -> f64 {
        self.h_t.as_ref().map_or(0.0, |f| f(x, t, p))
    }

    /// `H_x`, zero for x-independent models.
    pub fn h_x(&self, x: &Vec2, t: f64, p: &Vec2) -> Vec2 {
        self.h_x
            .as_ref()
            .map_or_else(Vec2::zeros, |f| project(f(x, t, p), self.dim))
    }

    pub fn is_t_dependent(&self) -> bool {
        self.h_t.is_some()
    }

    pub fn is_x_dependent(&self) -> bool {
        self.h_x.is_some()
    }

    /// `H_p . p - H`.
    pub fn legendre_gap(&self, x: &Vec2, t: f64, p: &Vec2) -> f64 {
        self.h_p(x, t, p).dot(p) - self.h(x, t, p)
    }

    /// Replaces the structure constants (config overrides).
    pub fn set_constants(&mut self, constants: StructureConstants) {
        self.constants = constants;
    }
}

/// Centered difference of `f` at `a` with step `1e-5 (1 + |a|)`.
///
/// The second value is `false` when forward and backward differences disagree
/// by more than 10%, which marks the point as kink-adjacent.
pub fn centered_difference(f: impl Fn(f64) -> f64, a: f64) -> (f64, bool) {
    let h = 1e-5 * (1.0 + a.abs());
    let f0 = f(a);
    let fp = f(a + h);
    let fm = f(a - h);
    let fwd = (fp - f0) / h;
    let bwd = (f0 - fm) / h;
    let smooth = (fwd - bwd).abs() <= 0.1 * fwd.abs().max(bwd.abs()).max(1e-12);
    ((fp - fm) / (2.0 * h), smooth)
}

/// Parameters of `|A p|^m - b.p - f` (with `b = A c` for the degenerate drift).
#[derive(Debug, Clone, PartialEq)]
pub struct PowerNormModel {
    pub m: f64,
    pub dim: usize,
    pub a: MatrixFn,
    pub f: ScalarFn,
    pub b: Option<VectorFn>,
    pub c: Option<VectorFn>,
    pub coercive: bool,
}

impl PowerNormModel {
    pub fn new(m: f64, dim: usize) -> Self {
        Self {
            m,
            dim,
            a: MatrixFn::Identity,
            f: ScalarFn::constant(1.0),
            b: None,
            c: None,
            coercive: true,
        }
    }
}

fn validation_points(dim: usize) -> Vec<SamplePoint> {
    let bx = SampleBox::default();
    let mut seq = Halton::new(dim + 3, 0x5eed);
    (0..256).map(|_| bx.map(dim, &seq.next_point())).collect()
}

/// `H(x,t,p) = |A p|^m - b.p - f`, with `b = A c` when `c` is given.
pub fn make_power_norm(params: PowerNormModel) -> Result<HamiltonianModel> {
    let PowerNormModel {
        m,
        dim,
        a,
        f,
        b,
        c,
        coercive,
    } = params;
    if !(m > 1.0) || !m.is_finite() {
        return Err(Error::InvalidModel(format!("exponent m = {m} must be > 1")));
    }
    if dim != 1 && dim != 2 {
        return Err(Error::InvalidModel(format!("dimension {dim} not in {{1, 2}}")));
    }
    if b.is_some() && c.is_some() {
        return Err(Error::InvalidModel(
            "give either a drift b or a degenerate drift c, not both".into(),
        ));
    }
    for s in validation_points(dim) {
        let fv = f.eval(&s.x, s.t);
        if !(fv >= 1.0) {
            return Err(Error::InvalidModel(format!(
                "f(x,t) = {fv} < 1 at x = {:?}, t = {}",
                s.x_vec(dim),
                s.t
            )));
        }
        if coercive {
            let am = project_matrix(a.eval(&s.x, s.t), dim);
            let det = if dim == 1 { am[(0, 0)] } else { am.determinant() };
            if det.abs() < 1e-12 {
                return Err(Error::InvalidModel(format!(
                    "coercive flag set but A is singular at x = {:?}, t = {}",
                    s.x_vec(dim),
                    s.t
                )));
            }
        }
    }

    let drift_kind = match (&b, &c) {
        (Some(_), _) => "drift",
        (_, Some(_)) => "degenerate-drift",
        _ => "none",
    };
    let t_dep = a.depends_on_t()
        || f.depends_on_t()
        || b.as_ref().is_some_and(VectorFn::depends_on_t)
        || c.as_ref().is_some_and(VectorFn::depends_on_t);
    let x_dep = a.depends_on_x()
        || f.depends_on_x()
        || b.as_ref().is_some_and(VectorFn::depends_on_x)
        || c.as_ref().is_some_and(VectorFn::depends_on_x);

    let radial_power = match (&a, &f, drift_kind) {
        (MatrixFn::Identity, ScalarFn::Const { value }, "none") => Some(RadialPower {
            coef: 1.0,
            m,
            offset: *value,
        }),
        (
            MatrixFn::Scalar {
                value: ScalarFn::Const { value: s },
            },
            ScalarFn::Const { value },
            "none",
        ) => Some(RadialPower {
            coef: s.abs().powf(m),
            m,
            offset: *value,
        }),
        _ => None,
    };
    let core = Arc::new(PowerNormCore { m, dim, a, f, b, c });

    let h: ScalarEval = {
        let core = core.clone();
        Arc::new(move |x, t, p| core.h(x, t, p))
    };
    let h_p: VectorEval = {
        let core = core.clone();
        Arc::new(move |x, t, p| core.h_p(x, t, p))
    };
    let h_t: Option<ScalarEval> = t_dep.then(|| {
        let core = core.clone();
        Arc::new(move |x: &Vec2, t: f64, p: &Vec2| core.h_t(x, t, p)) as ScalarEval
    });
    let h_x: Option<VectorEval> = x_dep.then(|| {
        let core = core.clone();
        Arc::new(move |x: &Vec2, t: f64, p: &Vec2| core.h_x(x, t, p)) as VectorEval
    });

    let constants = StructureConstants {
        c0: 0.0,
        c1: 0.0,
        c2: 0.0,
        kappa: m / (m - 1.0),
        gamma: None,
        coercive,
    };
    let name = match drift_kind {
        "drift" => "power-norm-drift",
        "degenerate-drift" => "degenerate-drift",
        _ => "power-norm",
    };
    let mut model = HamiltonianModel::new(name, dim, h, h_p, h_t, h_x, constants)?;
    model.radial_power = radial_power;
    if drift_kind == "none" {
        // H_p.p - H = (m-1)H + m f >= (m-1)H on {H >= 0} since f >= 1
        model = model.with_phi(PhiFunction::linear(m - 1.0));
    } else {
        model = model.with_note("no closed-form phi with drift; use the empirical envelope");
    }
    Ok(model)
}

struct PowerNormCore {
    m: f64,
    dim: usize,
    a: MatrixFn,
    f: ScalarFn,
    b: Option<VectorFn>,
    c: Option<VectorFn>,
}

impl PowerNormCore {
    fn matrix(&self, x: &Vec2, t: f64) -> nalgebra::Matrix2<f64> {
        project_matrix(self.a.eval(x, t), self.dim)
    }

    fn drift(&self, x: &Vec2, t: f64) -> Vec2 {
        let v = match (&self.b, &self.c) {
            (Some(b), _) => b.eval(x, t),
            (_, Some(c)) => self.matrix(x, t).transpose() * project(c.eval(x, t), self.dim),
            _ => Vec2::zeros(),
        };
        project(v, self.dim)
    }

    /// Derivative of the drift along `t` (`k = None`) or `x_k`.
    fn drift_derivative(&self, x: &Vec2, t: f64, k: Option<usize>) -> Vec2 {
        let v = match (&self.b, &self.c) {
            (Some(b), _) => match k {
                None => b.d_t(x, t),
                Some(k) => b.d_x(x, t, k),
            },
            (_, Some(c)) => {
                let am = self.matrix(x, t);
                let cv = project(c.eval(x, t), self.dim);
                let (da, dc) = match k {
                    None => (self.a.d_t(x, t), c.d_t(x, t)),
                    Some(k) => (self.a.d_x(x, t, k), c.d_x(x, t, k)),
                };
                project_matrix(da, self.dim).transpose() * cv
                    + am.transpose() * project(dc, self.dim)
            }
            _ => Vec2::zeros(),
        };
        project(v, self.dim)
    }

    /// `m |w|^(m-2)`, zero when `w = 0`.
    fn weight(&self, w: &Vec2) -> f64 {
        let r = w.norm();
        if r == 0.0 {
            0.0
        } else {
            self.m * r.powf(self.m - 2.0)
        }
    }

    fn h(&self, x: &Vec2, t: f64, p: &Vec2) -> f64 {
        let w = self.matrix(x, t) * p;
        w.norm().powf(self.m) - self.drift(x, t).dot(p) - self.f.eval(x, t)
    }

    fn h_p(&self, x: &Vec2, t: f64, p: &Vec2) -> Vec2 {
        let am = self.matrix(x, t);
        let w = am * p;
        am.transpose() * w * self.weight(&w) - self.drift(x, t)
    }

    fn h_t(&self, x: &Vec2, t: f64, p: &Vec2) -> f64 {
        let am = self.matrix(x, t);
        let w = am * p;
        let dw = project_matrix(self.a.d_t(x, t), self.dim) * p;
        self.weight(&w) * w.dot(&dw) - self.drift_derivative(x, t, None).dot(p) - self.f.d_t(x, t)
    }

    fn h_x(&self, x: &Vec2, t: f64, p: &Vec2) -> Vec2 {
        let am = self.matrix(x, t);
        let w = am * p;
        let wt = self.weight(&w);
        let mut g = Vec2::zeros();
        for k in 0..self.dim {
            let dw = project_matrix(self.a.d_x(x, t, k), self.dim) * p;
            g[k] = wt * w.dot(&dw)
                - self.drift_derivative(x, t, Some(k)).dot(p)
                - self.f.d_x(x, t, k);
        }
        g
    }
}

/// `H(x,t,p) = a(x,t) |p|^m` with `a >= 0`.
pub fn make_scalar_coefficient(m: f64, dim: usize, a: ScalarFn) -> Result<HamiltonianModel> {
    if !(m > 1.0) || !m.is_finite() {
        return Err(Error::InvalidModel(format!("exponent m = {m} must be > 1")));
    }
    for s in validation_points(dim.clamp(1, 2)) {
        let av = a.eval(&s.x, s.t);
        if !(av >= 0.0) {
            return Err(Error::InvalidModel(format!(
                "coefficient a(x,t) = {av} < 0 at x = {:?}, t = {}",
                s.x_vec(dim),
                s.t
            )));
        }
    }
    let t_dep = a.depends_on_t();
    let x_dep = a.depends_on_x();
    let radial_power = match a {
        ScalarFn::Const { value } if value > 0.0 => Some(RadialPower {
            coef: value,
            m,
            offset: 0.0,
        }),
        _ => None,
    };
    let a = Arc::new(a);

    let h: ScalarEval = {
        let a = a.clone();
        Arc::new(move |x, t, p| a.eval(x, t) * p.norm().powf(m))
    };
    let h_p: VectorEval = {
        let a = a.clone();
        Arc::new(move |x, t, p| {
            let r = p.norm();
            if r == 0.0 {
                Vec2::zeros()
            } else {
                p * (a.eval(x, t) * m * r.powf(m - 2.0))
            }
        })
    };
    let h_t: Option<ScalarEval> = t_dep.then(|| {
        let a = a.clone();
        Arc::new(move |x: &Vec2, t: f64, p: &Vec2| a.d_t(x, t) * p.norm().powf(m)) as ScalarEval
    });
    let h_x: Option<VectorEval> = x_dep.then(|| {
        let a = a.clone();
        Arc::new(move |x: &Vec2, t: f64, p: &Vec2| a.grad_x(x, t) * p.norm().powf(m))
            as VectorEval
    });
    let constants = StructureConstants {
        c0: 0.0,
        // |a_t| <= a/(1+t)-type coefficients need H >= 2m/(m-1)
        c1: if t_dep { 2.0 * m / (m - 1.0) } else { 0.0 },
        c2: 0.0,
        kappa: m / (m - 1.0),
        gamma: None,
        coercive: false,
    };
    let mut model = HamiltonianModel::new("scalar-coefficient", dim, h, h_p, h_t, h_x, constants)?
        .with_phi(PhiFunction::linear(m - 1.0));
    model.radial_power = radial_power;
    Ok(model)
}

/// `H(p) = exp(|p|)`.
///
/// `H_p.p - H = (|p| - 1) e^{|p|} = s (ln s - 1)` at level `s = H`, so the
/// structure function is `phi(s) = s (ln s - 1)` on `[e, inf)`. On
/// `{H >= e^2}` one has `|p| >= 2` and `|H_p| <= H_p.p - H`, hence
/// `kappa = 1` and `c1 = e^2`.
pub fn make_exponential(dim: usize) -> Result<HamiltonianModel> {
    let h: ScalarEval = Arc::new(|_, _, p| p.norm().exp());
    let h_p: VectorEval = Arc::new(|_, _, p| {
        let r = p.norm();
        if r == 0.0 {
            Vec2::zeros()
        } else {
            p * (r.exp() / r)
        }
    });
    let constants = StructureConstants {
        c0: E,
        c1: E * E,
        c2: 0.0,
        kappa: 1.0,
        gamma: None,
        coercive: true,
    };
    Ok(
        HamiltonianModel::new("exponential", dim, h, h_p, None, None, constants)?
            .with_phi(PhiFunction::exponential_model())
            .with_note(
                "phi(s) = s(ln s - 1), positive only for s > e; c0 = e. The form s ln(s - 1) on s > 2 does not match H_p.p - H = (|p| - 1) e^|p|",
            ),
    )
}

/// `H(p) = |p| ln(1 + |p|)`.
///
/// `H_p.p - H = |p|^2 / (1 + |p|)`. On `{|p| >= 1}` (i.e. `H >= ln 2`) the
/// ratio `|H_p| / (H_p.p - H)` is at most its value at `|p| = 1`, which is
/// below 2.4.
pub fn make_log_growth(dim: usize) -> Result<HamiltonianModel> {
    let h: ScalarEval = Arc::new(|_, _, p| {
        let r = p.norm();
        r * r.ln_1p()
    });
    let h_p: VectorEval = Arc::new(|_, _, p| {
        let r = p.norm();
        if r == 0.0 {
            Vec2::zeros()
        } else {
            p * ((r.ln_1p() + r / (1.0 + r)) / r)
        }
    });
    let constants = StructureConstants {
        c0: std::f64::consts::LN_2,
        c1: 0.0,
        c2: 0.0,
        kappa: 2.4,
        gamma: None,
        coercive: true,
    };
    Ok(
        HamiltonianModel::new("log-growth", dim, h, h_p, None, None, constants)?
            .with_phi(PhiFunction::log_growth()),
    )
}

/// Up to `n` points of `box` with `H(x,t,p) >= level`.
///
/// Points are drawn from the seeded Halton sequence. Coercive models have `p`
/// scaled outward along its ray until the level is met (within the box);
/// other models use rejection with at most `20 n` draws. A level of `-inf`
/// returns the first `n` draws unconditionally.
pub fn sample_level_set(
    model: &HamiltonianModel,
    level: f64,
    bx: &SampleBox,
    n: usize,
    seed: u64,
) -> Vec<SamplePoint> {
    let dim = model.dim;
    let mut seq = Halton::new(dim + 3, seed);
    let mut out = Vec::with_capacity(n);
    if n == 0 || !bx.is_finite() {
        return out;
    }
    let attempts = if level == f64::NEG_INFINITY || model.constants.coercive {
        n
    } else {
        20 * n
    };
    for _ in 0..attempts {
        if out.len() == n {
            break;
        }
        let s = bx.map(dim, &seq.next_point());
        if level == f64::NEG_INFINITY {
            out.push(s);
            continue;
        }
        let value = |q: &Vec2| model.h(&s.x, s.t, q);
        if model.constants.coercive {
            if let Some(p) = scale_to_level(s.p, level, bx.p_radius, value) {
                out.push(SamplePoint { p, ..s });
            }
        } else if value(&s.p) >= level {
            out.push(s);
        }
    }
    out
}

/// Worst relative mismatch between analytic and finite-difference derivatives.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct DerivativeCheck {
    pub samples: usize,
    pub worst_p: f64,
    pub worst_t: f64,
    pub worst_x: f64,
}

impl DerivativeCheck {
    pub fn worst(&self) -> f64 {
        self.worst_p.max(self.worst_t).max(self.worst_x)
    }
}

/// Compares `H_p`, `H_t`, `H_x` with centered differences of `H` at step
/// `1e-6 (1 + |arg|)`. The mismatch of each component is measured as
/// `|a - fd| / max(|a|, 1e-3 (1 + |H|))`, which is relative except where the
/// analytic value is lost in the round-off of `H` itself.
pub fn check_derivatives(
    model: &HamiltonianModel,
    bx: &SampleBox,
    n: usize,
    seed: u64,
) -> DerivativeCheck {
    let pts = sample_level_set(model, f64::NEG_INFINITY, bx, n, seed);
    let mut out = DerivativeCheck {
        samples: pts.len(),
        ..Default::default()
    };
    let fd = |f: &dyn Fn(f64) -> f64, a: f64| {
        let h = 1e-6 * (1.0 + a.abs());
        (f(a + h) - f(a - h)) / (2.0 * h)
    };
    for s in &pts {
        let hv = model.h(&s.x, s.t, &s.p);
        let floor = 1e-3 * (1.0 + hv.abs());
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(floor);
        let hp = model.h_p(&s.x, s.t, &s.p);
        for k in 0..model.dim {
            let d = fd(
                &|v| {
                    let mut q = s.p;
                    q[k] = v;
                    model.h(&s.x, s.t, &q)
                },
                s.p[k],
            );
            out.worst_p = out.worst_p.max(rel(hp[k], d));
        }
        if model.is_t_dependent() {
            let d = fd(&|v| model.h(&s.x, v, &s.p), s.t);
            out.worst_t = out.worst_t.max(rel(model.h_t(&s.x, s.t, &s.p), d));
        }
        if model.is_x_dependent() {
            let hx = model.h_x(&s.x, s.t, &s.p);
            for k in 0..model.dim {
                let d = fd(
                    &|v| {
                        let mut y = s.x;
                        y[k] = v;
                        model.h(&y, s.t, &s.p)
                    },
                    s.x[k],
                );
                out.worst_x = out.worst_x.max(rel(hx[k], d));
            }
        }
    }
    out
}
