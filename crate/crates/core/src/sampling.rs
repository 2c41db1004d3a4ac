//! Reproducible quasi-random sampling of `(x, t, p)` points.
//!
//! A Halton sequence with a seeded Cranley-Patterson rotation: the same seed
//! always yields the same points, and different seeds yield shifted copies of
//! the same low-discrepancy set.

use crate::coeffs::Vec2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

const PRIMES: [u64; 10] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29];

/// Smallest `|p|` a sampler will return; norm-type Hamiltonians have a kink at 0.
pub const KINK_RADIUS: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct Halton {
    dims: usize,
    index: u64,
    shift: Vec<f64>,
}

impl Halton {
    pub fn new(dims: usize, seed: u64) -> Self {
        assert!(dims <= PRIMES.len(), "at most {} dimensions", PRIMES.len());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shift = (0..dims).map(|_| rng.gen::<f64>()).collect();
        // index 0 is the origin in every base; start past it
        Self {
            dims,
            index: 1,
            shift,
        }
    }

    pub fn next_point(&mut self) -> Vec<f64> {
        let i = self.index;
        self.index += 1;
        (0..self.dims)
            .map(|d| (radical_inverse(i, PRIMES[d]) + self.shift[d]).fract())
            .collect()
    }
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

/// Sampling region for `(x, t, p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleBox {
    /// `|x_i| <= x_radius` per axis.
    pub x_radius: f64,
    pub t_min: f64,
    pub t_max: f64,
    /// `|p| <= p_radius` (Euclidean ball).
    pub p_radius: f64,
}

impl Default for SampleBox {
    fn default() -> Self {
        Self {
            x_radius: 5.0,
            t_min: 0.1,
            t_max: 1.0,
            p_radius: 50.0,
        }
    }
}

impl SampleBox {
    pub fn with_p_radius(mut self, p_radius: f64) -> Self {
        self.p_radius = p_radius;
        self
    }

    pub fn with_x_radius(mut self, x_radius: f64) -> Self {
        self.x_radius = x_radius;
        self
    }

    pub fn is_finite(&self) -> bool {
        [self.x_radius, self.t_min, self.t_max, self.p_radius]
            .iter()
            .all(|v| v.is_finite())
    }

    /// Maps unit-cube coordinates `(x.., t, |p|, direction)` to a point.
    /// `u` must hold `dim + 3` entries.
    pub fn map(&self, dim: usize, u: &[f64]) -> SamplePoint {
        let mut x = Vec2::zeros();
        for k in 0..dim {
            x[k] = self.x_radius * (2.0 * u[k] - 1.0);
        }
        let t = self.t_min + (self.t_max - self.t_min) * u[dim];
        // uniform in the ball, away from the kink at the origin
        let r = KINK_RADIUS + (self.p_radius - KINK_RADIUS) * u[dim + 1].powf(1.0 / dim as f64);
        let p = direction(dim, u[dim + 2]) * r;
        SamplePoint { x, t, p }
    }
}

/// Unit vector from a coordinate in `[0, 1)`.
pub fn direction(dim: usize, u: f64) -> Vec2 {
    if dim == 1 {
        Vec2::new(if u < 0.5 { -1.0 } else { 1.0 }, 0.0)
    } else {
        let a = TAU * u;
        Vec2::new(a.cos(), a.sin())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplePoint {
    pub x: Vec2,
    pub t: f64,
    pub p: Vec2,
}

impl SamplePoint {
    pub fn x_vec(&self, dim: usize) -> Vec<f64> {
        self.x.iter().take(dim).copied().collect()
    }

    pub fn p_vec(&self, dim: usize) -> Vec<f64> {
        self.p.iter().take(dim).copied().collect()
    }
}

/// Scales `p` along its ray until `value(scale * p) >= level`, allowing
/// `|scale * p| <= max_norm`. Returns the scaled vector, or `None` when the
/// level is not reached on the ray.
pub fn scale_to_level(
    p: Vec2,
    level: f64,
    max_norm: f64,
    value: impl Fn(&Vec2) -> f64,
) -> Option<Vec2> {
    let v0 = value(&p);
    if v0 >= level {
        return Some(p);
    }
    let norm = p.norm();
    if norm == 0.0 || norm >= max_norm {
        return None;
    }
    let mut lo = 1.0;
    let mut hi = max_norm / norm;
    let top = value(&(p * hi));
    if !(top >= level) {
        return None;
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if value(&(p * mid)) >= level {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    Some(p * hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radical_inverse_base_two() {
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(2, 2), 0.25);
        assert_eq!(radical_inverse(3, 2), 0.75);
        assert!((radical_inverse(1, 3) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn halton_is_reproducible_and_in_unit_cube() {
        let mut a = Halton::new(5, 42);
        let mut b = Halton::new(5, 42);
        for _ in 0..1000 {
            let pa = a.next_point();
            assert_eq!(pa, b.next_point());
            assert!(pa.iter().all(|&u| (0.0..1.0).contains(&u)));
        }
        let mut c = Halton::new(5, 43);
        assert_ne!(Halton::new(5, 42).next_point(), c.next_point());
    }

    #[test]
    fn mapped_points_stay_in_box() {
        let bx = SampleBox::default();
        let mut h = Halton::new(5, 1);
        for _ in 0..500 {
            let s = bx.map(2, &h.next_point());
            assert!(s.x.iter().all(|v| v.abs() <= bx.x_radius));
            assert!(s.t >= bx.t_min && s.t <= bx.t_max);
            let r = s.p.norm();
            assert!(r >= KINK_RADIUS * 0.999 && r <= bx.p_radius * 1.000001);
        }
    }

    #[test]
    fn scaling_reaches_level() {
        let p = Vec2::new(0.1, 0.0);
        let q = scale_to_level(p, 4.0, 10.0, |v| v.norm_squared()).unwrap();
        assert!(q.norm_squared() >= 4.0);
        assert!(q.norm_squared() < 4.0 + 1e-9);
        assert!(scale_to_level(p, 400.0, 10.0, |v| v.norm_squared()).is_none());
    }
}
