use super::grid::{FieldHeader, GridField};
use crate::coeffs::Vec2;
use crate::error::{Error, Result};
use crate::hamiltonians::HamiltonianModel;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

pub const CFL_LIMIT: f64 = 0.9;
pub const THETA_SAFETY: f64 = 1.2;
/// Steps between re-estimates of an adaptive theta.
pub const THETA_REFRESH: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    LaxFriedrichs,
    TvdRk2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ThetaPolicy {
    Adaptive,
    Fixed { theta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    pub scheme: Scheme,
    pub theta: ThetaPolicy,
    /// Target `dt sum(theta/dx)`; at most `CFL_LIMIT`.
    pub cfl: f64,
    /// Lower bound for an adaptive theta.
    pub theta_floor: f64,
    /// `dt` is sized for `headroom` times the initial adaptive theta, so the
    /// re-estimated theta may grow by that factor before the CFL bound bites.
    pub headroom: f64,
    /// Keep every `store_every`-th step in the trace.
    pub store_every: usize,
    /// Shift `u0` so that its minimum is zero.
    pub normalize: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            scheme: Scheme::LaxFriedrichs,
            theta: ThetaPolicy::Adaptive,
            cfl: CFL_LIMIT,
            theta_floor: 1.0,
            headroom: 1.5,
            store_every: 1,
            normalize: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaRecord {
    pub step: usize,
    pub theta: [f64; 2],
}

/// Time-ordered fields of one run with constant spacing `dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveTrace {
    pub fields: Vec<GridField>,
    pub dx: f64,
    /// Spacing of the stored fields.
    pub dt: f64,
    /// Spacing of the scheme's steps.
    pub dt_step: f64,
    /// Largest viscosity used, per axis.
    pub theta: [f64; 2],
    pub theta_history: Vec<ThetaRecord>,
    pub scheme: Scheme,
    pub model: String,
    /// Constant added to the input data before solving.
    pub shift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceMeta {
    pub dim: usize,
    pub n: usize,
    #[serde(rename = "L")]
    pub period: f64,
    pub dx: f64,
    pub dt: f64,
    pub dt_step: f64,
    pub theta: [f64; 2],
    pub theta_history: Vec<ThetaRecord>,
    pub scheme: Scheme,
    pub model: String,
    pub shift: f64,
    pub times: Vec<f64>,
}

impl SolveTrace {
    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.fields.iter().map(|f| f.time).collect()
    }

    pub fn last(&self) -> &GridField {
        self.fields.last().expect("a trace holds at least the initial field")
    }

    /// Index of the stored field closest to `t`.
    pub fn index_near(&self, t: f64) -> usize {
        let mut best = 0;
        for (k, f) in self.fields.iter().enumerate() {
            if (f.time - t).abs() < (self.fields[best].time - t).abs() {
                best = k;
            }
        }
        best
    }

    pub fn meta(&self) -> TraceMeta {
        let f = &self.fields[0];
        TraceMeta {
            dim: f.dim,
            n: f.n,
            period: f.period,
            dx: self.dx,
            dt: self.dt,
            dt_step: self.dt_step,
            theta: self.theta,
            theta_history: self.theta_history.clone(),
            scheme: self.scheme,
            model: self.model.clone(),
            shift: self.shift,
            times: self.times(),
        }
    }

    /// Writes `step_<k>.field` for every stored field plus `meta.json`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        for (k, f) in self.fields.iter().enumerate() {
            fs::write(dir.join(format!("step_{k}.field")), f.to_bytes())?;
        }
        fs::write(dir.join("meta.json"), serde_json::to_vec_pretty(&self.meta())?)?;
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let meta: TraceMeta = serde_json::from_slice(&fs::read(dir.join("meta.json"))?)?;
        let fields = meta
            .times
            .iter()
            .enumerate()
            .map(|(k, &t)| {
                let header = FieldHeader {
                    dim: meta.dim,
                    n: meta.n,
                    period: meta.period,
                    time_stamp: t,
                };
                GridField::from_bytes(&header, &fs::read(dir.join(format!("step_{k}.field")))?)
            })
            .collect::<Result<Vec<_>>>()?;
        if fields.is_empty() {
            return Err(Error::Grid("trace has no fields".into()));
        }
        Ok(Self {
            fields,
            dx: meta.dx,
            dt: meta.dt,
            dt_step: meta.dt_step,
            theta: meta.theta,
            theta_history: meta.theta_history,
            scheme: meta.scheme,
            model: meta.model,
            shift: meta.shift,
        })
    }
}

pub fn cfl_number(dim: usize, dx: f64, dt: f64, theta: [f64; 2]) -> f64 {
    dt * theta[..dim].iter().sum::<f64>() / dx
}

/// One forward-Euler Lax-Friedrichs step:
/// `u - dt [H(x, t, (D-u + D+u)/2) - sum_a theta_a/2 (D+_a u - D-_a u)]`.
pub fn lf_step(field: &GridField, model: &HamiltonianModel, dt: f64, theta: [f64; 2]) -> Result<GridField> {
    if model.dim != field.dim {
        return Err(Error::Misuse(format!(
            "{}-D model on a {}-D grid",
            model.dim, field.dim
        )));
    }
    let dx = field.dx();
    let number = cfl_number(field.dim, dx, dt, theta);
    if number > CFL_LIMIT * (1.0 + 1e-12) {
        return Err(Error::Cfl {
            number,
            limit: CFL_LIMIT,
        });
    }
    let u = &field.values;
    let t = field.time;
    let values: Vec<f64> = (0..u.len())
        .into_par_iter()
        .map(|k| {
            let mut p = Vec2::zeros();
            let mut visc = 0.0;
            for a in 0..field.dim {
                let up = u[field.neighbor(k, a, 1)];
                let um = u[field.neighbor(k, a, -1)];
                p[a] = (up - um) / (2.0 * dx);
                visc += 0.5 * theta[a] * (up - 2.0 * u[k] + um) / dx;
            }
            u[k] - dt * (model.h(&field.point(k), t, &p) - visc)
        })
        .collect();
    let time = t + dt;
    if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite { index, value, time });
    }
    Ok(field.with_values(values, time))
}

/// `THETA_SAFETY * max |dH/dp_a|` over the grid points and a lattice of the
/// current one-sided difference range.
pub fn estimate_theta(field: &GridField, model: &HamiltonianModel) -> [f64; 2] {
    let dim = field.dim;
    let dx = field.dx();
    let u = &field.values;
    let mut lo = [0.0f64; 2];
    let mut hi = [0.0f64; 2];
    for a in 0..dim {
        let (l, h) = (0..u.len())
            .map(|k| (u[field.neighbor(k, a, 1)] - u[k]) / dx)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), d| (l.min(d), h.max(d)));
        lo[a] = l;
        hi[a] = h;
    }
    const LATTICE: usize = 5;
    let lattice: Vec<Vec2> = if dim == 1 {
        (0..LATTICE)
            .map(|i| Vec2::new(lo[0] + (hi[0] - lo[0]) * i as f64 / (LATTICE - 1) as f64, 0.0))
            .collect()
    } else {
        (0..LATTICE * LATTICE)
            .map(|i| {
                let (i0, i1) = (i / LATTICE, i % LATTICE);
                Vec2::new(
                    lo[0] + (hi[0] - lo[0]) * i0 as f64 / (LATTICE - 1) as f64,
                    lo[1] + (hi[1] - lo[1]) * i1 as f64 / (LATTICE - 1) as f64,
                )
            })
            .collect()
    };
    let t = field.time;
    let m = (0..u.len())
        .into_par_iter()
        .map(|k| {
            let x = field.point(k);
            let mut m = [0.0f64; 2];
            for p in &lattice {
                let g = model.h_p(&x, t, p);
                for a in 0..dim {
                    m[a] = m[a].max(g[a].abs());
                }
            }
            m
        })
        .reduce(|| [0.0; 2], |a, b| [a[0].max(b[0]), a[1].max(b[1])]);
    [THETA_SAFETY * m[0], if dim == 2 { THETA_SAFETY * m[1] } else { 0.0 }]
}

fn rk2_step(u: &GridField, model: &HamiltonianModel, dt: f64, theta: [f64; 2]) -> Result<GridField> {
    let u1 = lf_step(u, model, dt, theta)?;
    let u2 = lf_step(&u1, model, dt, theta)?;
    let values = u.values.iter().zip(&u2.values).map(|(a, b)| 0.5 * (a + b)).collect();
    Ok(u.with_values(values, u1.time))
}

/// Runs the scheme from `u0.time` to `t_end`.
pub fn solve(model: &HamiltonianModel, u0: &GridField, t_end: f64, opts: &SolveOptions) -> Result<SolveTrace> {
    let t0 = u0.time;
    if !(t_end > t0) || !t_end.is_finite() {
        return Err(Error::Misuse(format!("t_end = {t_end} must exceed the start time {t0}")));
    }
    if !(opts.cfl > 0.0 && opts.cfl <= CFL_LIMIT) {
        return Err(Error::Misuse(format!("cfl = {} not in (0, {CFL_LIMIT}]", opts.cfl)));
    }
    if opts.store_every == 0 {
        return Err(Error::Misuse("store_every must be positive".into()));
    }
    let dim = u0.dim;
    let dx = u0.dx();
    let shift = if opts.normalize { -u0.min() } else { 0.0 };
    let start = u0.map(|v| v + shift);

    let floor = |th: [f64; 2]| -> [f64; 2] {
        let mut th = th;
        for v in th.iter_mut().take(dim) {
            *v = v.max(opts.theta_floor);
        }
        th
    };
    let (mut theta, sizing) = match opts.theta {
        ThetaPolicy::Fixed { theta } => {
            if !(theta > 0.0) {
                return Err(Error::Misuse(format!("fixed theta {theta} must be positive")));
            }
            let th = [theta, if dim == 2 { theta } else { 0.0 }];
            (th, 1.0)
        }
        ThetaPolicy::Adaptive => (floor(estimate_theta(&start, model)), opts.headroom.max(1.0)),
    };
    let dt_max = opts.cfl * dx / (sizing * theta[..dim].iter().sum::<f64>());
    let blocks = ((t_end - t0) / (dt_max * opts.store_every as f64)).ceil().max(1.0) as usize;
    let steps = blocks * opts.store_every;
    let dt = (t_end - t0) / steps as f64;

    let mut max_theta = theta;
    let mut history = vec![ThetaRecord { step: 0, theta }];
    let mut fields = vec![start.clone()];
    let mut u = start;
    for k in 0..steps {
        if k > 0 && k % THETA_REFRESH == 0 && opts.theta == ThetaPolicy::Adaptive {
            let next = floor(estimate_theta(&u, model));
            if next != theta {
                theta = next;
                history.push(ThetaRecord { step: k, theta });
                max_theta = [max_theta[0].max(theta[0]), max_theta[1].max(theta[1])];
            }
        }
        let mut next = match opts.scheme {
            Scheme::LaxFriedrichs => lf_step(&u, model, dt, theta)?,
            Scheme::TvdRk2 => rk2_step(&u, model, dt, theta)?,
        };
        // exact time stamps, free of accumulated rounding
        next.time = t0 + (k + 1) as f64 * dt;
        if (k + 1) % opts.store_every == 0 {
            fields.push(next.clone());
        }
        u = next;
    }
    Ok(SolveTrace {
        fields,
        dx,
        dt: dt * opts.store_every as f64,
        dt_step: dt,
        theta: max_theta,
        theta_history: history,
        scheme: opts.scheme,
        model: model.name.clone(),
        shift,
    })
}

/// Backward difference `(u^k - u^{k-1}) / dt`.
pub fn discrete_time_derivative(trace: &SolveTrace, k: usize) -> Result<GridField> {
    if k == 0 || k >= trace.len() {
        return Err(Error::Index {
            index: k,
            len: trace.len(),
        });
    }
    let (a, b) = (&trace.fields[k - 1], &trace.fields[k]);
    let values = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (y - x) / trace.dt)
        .collect();
    Ok(b.with_values(values, b.time))
}

/// Centered differences per axis.
pub fn discrete_gradient(field: &GridField) -> Vec<Vec2> {
    let dx = field.dx();
    (0..field.len())
        .into_par_iter()
        .map(|k| {
            let mut g = Vec2::zeros();
            for a in 0..field.dim {
                g[a] = (field.values[field.neighbor(k, a, 1)] - field.values[field.neighbor(k, a, -1)])
                    / (2.0 * dx);
            }
            g
        })
        .collect()
}
