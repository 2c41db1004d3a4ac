//! Named coefficient families for the model Hamiltonians.
//!
//! Coefficients are small expression trees built from a fixed set of
//! primitives. Every node knows its value, its spatial gradient and its time
//! derivative in closed form, so the Hamiltonians assembled from them carry
//! exact `H_t` and `H_x` evaluators.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

pub type Vec2 = Vector2<f64>;
pub type Mat2 = Matrix2<f64>;

/// Scalar function of `(x, t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ScalarFn {
    Const {
        value: f64,
    },
    /// `coef * x[axis]^power`
    Monomial {
        coef: f64,
        axis: usize,
        power: u32,
    },
    /// `coef * t`
    Time {
        coef: f64,
    },
    /// `coef * max(x[axis], 0)^2`
    PositivePartSquared {
        coef: f64,
        axis: usize,
    },
    /// `amp * sin(2 pi freq x[axis] + phase)`
    Sine {
        amp: f64,
        freq: f64,
        axis: usize,
        #[serde(default)]
        phase: f64,
    },
    Sum {
        terms: Vec<ScalarFn>,
    },
    Product {
        factors: Vec<ScalarFn>,
    },
}

impl ScalarFn {
    pub fn constant(value: f64) -> Self {
        ScalarFn::Const { value }
    }

    pub fn monomial(coef: f64, axis: usize, power: u32) -> Self {
        ScalarFn::Monomial { coef, axis, power }
    }

    pub fn time(coef: f64) -> Self {
        ScalarFn::Time { coef }
    }

    pub fn sine(amp: f64, freq: f64, axis: usize) -> Self {
        ScalarFn::Sine {
            amp,
            freq,
            axis,
            phase: 0.0,
        }
    }

    pub fn sum(terms: Vec<ScalarFn>) -> Self {
        ScalarFn::Sum { terms }
    }

    pub fn product(factors: Vec<ScalarFn>) -> Self {
        ScalarFn::Product { factors }
    }

    pub fn eval(&self, x: &Vec2, t: f64) -> f64 {
        match self {
            ScalarFn::Const { value } => *value,
            ScalarFn::Monomial { coef, axis, power } => coef * x[*axis].powi(*power as i32),
            ScalarFn::Time { coef } => coef * t,
            ScalarFn::PositivePartSquared { coef, axis } => {
                let y = x[*axis].max(0.0);
                coef * y * y
            }
            ScalarFn::Sine {
                amp,
                freq,
                axis,
                phase,
            } => amp * (TAU * freq * x[*axis] + phase).sin(),
            ScalarFn::Sum { terms } => terms.iter().map(|f| f.eval(x, t)).sum(),
            ScalarFn::Product { factors } => factors.iter().map(|f| f.eval(x, t)).product(),
        }
    }

    pub fn d_t(&self, x: &Vec2, t: f64) -> f64 {
        match self {
            ScalarFn::Time { coef } => *coef,
            ScalarFn::Sum { terms } => terms.iter().map(|f| f.d_t(x, t)).sum(),
            ScalarFn::Product { factors } => product_rule(factors, |f| f.d_t(x, t), x, t),
            _ => 0.0,
        }
    }

    pub fn d_x(&self, x: &Vec2, t: f64, k: usize) -> f64 {
        match self {
            ScalarFn::Monomial { coef, axis, power } if *axis == k => {
                if *power == 0 {
                    0.0
                } else {
                    coef * f64::from(*power) * x[k].powi(*power as i32 - 1)
                }
            }
            ScalarFn::PositivePartSquared { coef, axis } if *axis == k => {
                2.0 * coef * x[k].max(0.0)
            }
            ScalarFn::Sine {
                amp,
                freq,
                axis,
                phase,
            } if *axis == k => amp * TAU * freq * (TAU * freq * x[k] + phase).cos(),
            ScalarFn::Sum { terms } => terms.iter().map(|f| f.d_x(x, t, k)).sum(),
            ScalarFn::Product { factors } => product_rule(factors, |f| f.d_x(x, t, k), x, t),
            _ => 0.0,
        }
    }

    pub fn grad_x(&self, x: &Vec2, t: f64) -> Vec2 {
        Vec2::new(self.d_x(x, t, 0), self.d_x(x, t, 1))
    }

    pub fn depends_on_t(&self) -> bool {
        match self {
            ScalarFn::Time { coef } => *coef != 0.0,
            ScalarFn::Sum { terms } => terms.iter().any(ScalarFn::depends_on_t),
            ScalarFn::Product { factors } => factors.iter().any(ScalarFn::depends_on_t),
            _ => false,
        }
    }

    pub fn depends_on_x(&self) -> bool {
        match self {
            ScalarFn::Const { .. } | ScalarFn::Time { .. } => false,
            ScalarFn::Monomial { coef, power, .. } => *coef != 0.0 && *power > 0,
            ScalarFn::PositivePartSquared { coef, .. } => *coef != 0.0,
            ScalarFn::Sine { amp, freq, .. } => *amp != 0.0 && *freq != 0.0,
            ScalarFn::Sum { terms } => terms.iter().any(ScalarFn::depends_on_x),
            ScalarFn::Product { factors } => factors.iter().any(ScalarFn::depends_on_x),
        }
    }

    /// Largest axis index referenced anywhere in the tree.
    pub fn max_axis(&self) -> Option<usize> {
        match self {
            ScalarFn::Monomial { axis, .. }
            | ScalarFn::PositivePartSquared { axis, .. }
            | ScalarFn::Sine { axis, .. } => Some(*axis),
            ScalarFn::Sum { terms } => terms.iter().filter_map(ScalarFn::max_axis).max(),
            ScalarFn::Product { factors } => factors.iter().filter_map(ScalarFn::max_axis).max(),
            _ => None,
        }
    }
}

fn product_rule(
    factors: &[ScalarFn],
    deriv: impl Fn(&ScalarFn) -> f64,
    x: &Vec2,
    t: f64,
) -> f64 {
    let values: Vec<f64> = factors.iter().map(|f| f.eval(x, t)).collect();
    let mut total = 0.0;
    for (i, f) in factors.iter().enumerate() {
        let d = deriv(f);
        if d == 0.0 {
            continue;
        }
        let rest: f64 = values
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, v)| v)
            .product();
        total += d * rest;
    }
    total
}

/// Vector function of `(x, t)`, one [`ScalarFn`] per component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VectorFn {
    pub components: [ScalarFn; 2],
}

impl VectorFn {
    pub fn new(c0: ScalarFn, c1: ScalarFn) -> Self {
        Self {
            components: [c0, c1],
        }
    }

    pub fn zero() -> Self {
        Self::new(ScalarFn::constant(0.0), ScalarFn::constant(0.0))
    }

    pub fn eval(&self, x: &Vec2, t: f64) -> Vec2 {
        Vec2::new(self.components[0].eval(x, t), self.components[1].eval(x, t))
    }

    pub fn d_t(&self, x: &Vec2, t: f64) -> Vec2 {
        Vec2::new(self.components[0].d_t(x, t), self.components[1].d_t(x, t))
    }

    pub fn d_x(&self, x: &Vec2, t: f64, k: usize) -> Vec2 {
        Vec2::new(
            self.components[0].d_x(x, t, k),
            self.components[1].d_x(x, t, k),
        )
    }

    pub fn depends_on_t(&self) -> bool {
        self.components.iter().any(ScalarFn::depends_on_t)
    }

    pub fn depends_on_x(&self) -> bool {
        self.components.iter().any(ScalarFn::depends_on_x)
    }
}

/// Symmetric 2x2 matrix function of `(x, t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MatrixFn {
    Identity,
    Zero,
    /// `s(x,t) * I`
    Scalar {
        value: ScalarFn,
    },
    Diag {
        d0: ScalarFn,
        d1: ScalarFn,
    },
    /// Symmetric matrix with entries `a00`, `a01 = a10`, `a11`.
    Symmetric {
        a00: ScalarFn,
        a01: ScalarFn,
        a11: ScalarFn,
    },
}

impl MatrixFn {
    fn entries(&self, mut f: impl FnMut(&ScalarFn) -> f64, one: f64) -> Mat2 {
        match self {
            MatrixFn::Identity => Mat2::identity() * one,
            MatrixFn::Zero => Mat2::zeros(),
            MatrixFn::Scalar { value } => Mat2::identity() * f(value),
            MatrixFn::Diag { d0, d1 } => Mat2::new(f(d0), 0.0, 0.0, f(d1)),
            MatrixFn::Symmetric { a00, a01, a11 } => {
                let off = f(a01);
                Mat2::new(f(a00), off, off, f(a11))
            }
        }
    }

    pub fn eval(&self, x: &Vec2, t: f64) -> Mat2 {
        self.entries(|s| s.eval(x, t), 1.0)
    }

    pub fn d_t(&self, x: &Vec2, t: f64) -> Mat2 {
        self.entries(|s| s.d_t(x, t), 0.0)
    }

    pub fn d_x(&self, x: &Vec2, t: f64, k: usize) -> Mat2 {
        self.entries(|s| s.d_x(x, t, k), 0.0)
    }

    fn scalars(&self) -> Vec<&ScalarFn> {
        match self {
            MatrixFn::Identity | MatrixFn::Zero => vec![],
            MatrixFn::Scalar { value } => vec![value],
            MatrixFn::Diag { d0, d1 } => vec![d0, d1],
            MatrixFn::Symmetric { a00, a01, a11 } => vec![a00, a01, a11],
        }
    }

    pub fn depends_on_t(&self) -> bool {
        self.scalars().into_iter().any(ScalarFn::depends_on_t)
    }

    pub fn depends_on_x(&self) -> bool {
        self.scalars().into_iter().any(ScalarFn::depends_on_x)
    }
}

/// Restricts a vector to the first `dim` components.
pub fn project(v: Vec2, dim: usize) -> Vec2 {
    if dim == 1 {
        Vec2::new(v[0], 0.0)
    } else {
        v
    }
}

/// Restricts a matrix to its leading `dim x dim` block.
pub fn project_matrix(m: Mat2, dim: usize) -> Mat2 {
    if dim == 1 {
        Mat2::new(m[(0, 0)], 0.0, 0.0, 0.0)
    } else {
        m
    }
}
