use super::grid::GridField;
use crate::coeffs::Vec2;
use crate::error::{Error, Result};
use crate::hamiltonians::HamiltonianModel;
use crate::sampling::Halton;
use rayon::prelude::*;

const LAGRANGIAN_NODES: usize = 4097;
const SUP_NODES: usize = 4001;

/// `u(x, t) = min_y u0(y) + t L((x - y)/t)` over grid points `y` and their
/// periodic images, for a convex 1-D Hamiltonian of `p` only.
///
/// `L` is taken in closed form for `coef |p|^m - offset`; otherwise it is the
/// sup of `p q - H(p)` over `|p| <= p_max`, tabulated and interpolated.
pub fn hopf_lax(model: &HamiltonianModel, u0: &GridField, t: f64, p_max: f64) -> Result<GridField> {
    if model.dim != 1 || u0.dim != 1 {
        return Err(Error::Misuse("the Hopf-Lax oracle is 1-D only".into()));
    }
    if model.is_t_dependent() || model.is_x_dependent() {
        return Err(Error::Misuse("the Hopf-Lax oracle needs H = H(p)".into()));
    }
    if !(t > 0.0) {
        return Err(Error::Misuse(format!("t = {t} must be positive")));
    }
    let h = |p: f64| model.h(&Vec2::zeros(), 0.0, &Vec2::new(p, 0.0));
    check_convex(&h, p_max)?;

    let period = u0.period;
    let q_max = 2.0 * period / t;
    let lagrangian: Box<dyn Fn(f64) -> f64 + Sync> = match model.radial_power {
        Some(rp) => Box::new(move |q| rp.lagrangian(q)),
        None => {
            let table = tabulate(&h, q_max, p_max);
            Box::new(move |q| interpolate(&table, q_max, q))
        }
    };

    let dx = u0.dx();
    let n = u0.n;
    let values: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let x = i as f64 * dx;
            let mut best = f64::INFINITY;
            for (j, &uy) in u0.values.iter().enumerate() {
                let y = j as f64 * dx;
                for k in [-1.0, 0.0, 1.0] {
                    let q = (x - y - k * period) / t;
                    best = best.min(uy + t * lagrangian(q));
                }
            }
            best
        })
        .collect();
    GridField::new(1, n, period, u0.time + t, values)
}

/// Midpoint test on Halton pairs in `[-p_max, p_max]`.
fn check_convex(h: &impl Fn(f64) -> f64, p_max: f64) -> Result<()> {
    let mut seq = Halton::new(2, 17);
    for _ in 0..1000 {
        let u = seq.next_point();
        let a = p_max * (2.0 * u[0] - 1.0);
        let b = p_max * (2.0 * u[1] - 1.0);
        let mid = h(0.5 * (a + b));
        let chord = 0.5 * (h(a) + h(b));
        if mid > chord + 1e-10 * (1.0 + chord.abs()) {
            return Err(Error::NotConvex(format!(
                "H({}) = {mid} exceeds the chord value {chord} between p = {a} and p = {b}",
                0.5 * (a + b)
            )));
        }
    }
    Ok(())
}

fn tabulate(h: &(impl Fn(f64) -> f64 + Sync), q_max: f64, p_max: f64) -> Vec<f64> {
    let hp: Vec<(f64, f64)> = (0..SUP_NODES)
        .map(|i| {
            let p = -p_max + 2.0 * p_max * i as f64 / (SUP_NODES - 1) as f64;
            (p, h(p))
        })
        .collect();
    (0..LAGRANGIAN_NODES)
        .into_par_iter()
        .map(|i| {
            let q = -q_max + 2.0 * q_max * i as f64 / (LAGRANGIAN_NODES - 1) as f64;
            hp.iter().map(|&(p, hv)| p * q - hv).fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}

fn interpolate(table: &[f64], q_max: f64, q: f64) -> f64 {
    let s = (q + q_max) / (2.0 * q_max) * (table.len() - 1) as f64;
    let s = s.clamp(0.0, (table.len() - 1) as f64);
    let i = (s.floor() as usize).min(table.len() - 2);
    let w = s - i as f64;
    (1.0 - w) * table[i] + w * table[i + 1]
}
