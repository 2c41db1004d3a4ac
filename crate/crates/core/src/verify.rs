//! Checks of the a priori estimates on stored solver traces.
//!
//! Every inequality is tested against a scheme-error budget
//! `tol = C_tol (dx + dt) / s_min` with `s_min = 10 dt`; discrete `u_t` is not
//! trusted before `s_min`.

use crate::error::{Error, Result};
use crate::hamiltonians::HamiltonianModel;
use crate::solver::{discrete_gradient, discrete_time_derivative, GridField, SolveTrace};
use crate::structure::StructureProfile;
use crate::transform::u_to_v;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::Path;

/// Default `C_tol`.
pub const DEFAULT_TOL_CONSTANT: f64 = 10.0;

/// Steps before `s_min`, in units of the stored spacing.
pub const S_MIN_STEPS: f64 = 10.0;

/// Stride of the all-pairs time sweep.
pub const SWEEP_STRIDE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Location {
    pub index: usize,
    pub x: Vec<f64>,
    pub s: Option<f64>,
    pub t: f64,
}

/// One row of a check's CSV series.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesRow {
    pub t: f64,
    pub s: Option<f64>,
    pub residual: f64,
    pub x0: f64,
    pub x1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateEntry {
    pub check: String,
    pub status: Status,
    /// Most adverse residual: a minimum for lower bounds, a maximum for
    /// upper bounds (see `sense`).
    pub worst_residual: Option<f64>,
    pub sense: String,
    pub location: Option<Location>,
    pub tolerance: f64,
    pub s_min: f64,
    pub metrics: BTreeMap<String, f64>,
    pub notes: Vec<String>,
    #[serde(skip)]
    pub series: Vec<SeriesRow>,
}

impl EstimateEntry {
    fn new(check: &str, sense: &str, tolerance: f64, s_min: f64) -> Self {
        Self {
            check: check.into(),
            status: Status::Pass,
            worst_residual: None,
            sense: sense.into(),
            location: None,
            tolerance,
            s_min,
            metrics: BTreeMap::new(),
            notes: Vec::new(),
            series: Vec::new(),
        }
    }

    fn not_applicable(check: &str, reason: &str) -> Self {
        let mut e = Self::new(check, "none", 0.0, 0.0);
        e.status = Status::NotApplicable;
        e.notes.push(reason.into());
        e
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }

    /// `max(0, -worst)` for lower-bound checks.
    pub fn worst_negative(&self) -> f64 {
        self.worst_residual.map_or(0.0, |w| (-w).max(0.0))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["t", "s", "residual", "x0", "x1"])?;
        for r in &self.series {
            w.write_record([
                r.t.to_string(),
                r.s.map(|s| s.to_string()).unwrap_or_default(),
                r.residual.to_string(),
                r.x0.to_string(),
                r.x1.map(|s| s.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GridInfo {
    pub dim: usize,
    pub n: usize,
    pub period: f64,
    pub dx: f64,
    pub dt: f64,
    pub theta: [f64; 2],
    pub t_end: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    pub model: String,
    pub grid: GridInfo,
    pub phi: String,
    pub c_star: f64,
    pub t_star: Option<f64>,
    pub tol_constant: f64,
    pub entries: Vec<EstimateEntry>,
    pub notes: Vec<String>,
}

impl EstimateReport {
    pub fn new(trace: &SolveTrace, profile: &StructureProfile, tol_constant: f64) -> Self {
        let f = &trace.fields[0];
        Self {
            model: trace.model.clone(),
            grid: GridInfo {
                dim: f.dim,
                n: f.n,
                period: f.period,
                dx: trace.dx,
                dt: trace.dt,
                theta: trace.theta,
                t_end: trace.last().time,
            },
            phi: profile.phi().label(),
            c_star: profile.c_star,
            t_star: profile.t_star.is_finite().then_some(profile.t_star),
            tol_constant,
            entries: Vec::new(),
            notes: vec![
                "periodic grid: u is bounded below, and growth at spatial infinity is only exercised within one period cell".into(),
            ],
        }
    }

    pub fn entry(&self, check: &str) -> Option<&EstimateEntry> {
        self.entries.iter().find(|e| e.check == check)
    }

    pub fn all_passed(&self) -> bool {
        self.entries.iter().all(|e| e.status != Status::Fail)
    }
}

/// `s_min` and the tolerance for a trace.
pub fn tolerance(trace: &SolveTrace, tol_constant: f64) -> (f64, f64) {
    let s_min = S_MIN_STEPS * trace.dt;
    (s_min, tol_constant * (trace.dx + trace.dt) / s_min)
}

/// Nonnegative copies of the trace's fields, shifted by the trace-wide
/// minimum when that is negative.
fn nonnegative(trace: &SolveTrace) -> (Vec<GridField>, f64) {
    let min = trace.fields.iter().map(GridField::min).fold(f64::INFINITY, f64::min);
    let shift = (-min).max(0.0);
    if shift == 0.0 {
        (trace.fields.clone(), 0.0)
    } else {
        (trace.fields.iter().map(|f| f.map(|v| v + shift)).collect(), shift)
    }
}

fn shift_note(entry: &mut EstimateEntry, shift: f64) {
    if shift > 0.0 {
        entry.notes.push(format!("u shifted by {shift} so that it is nonnegative on the whole trace"));
    }
}

/// Indices `k >= 1` with `s_min <= t_k < horizon`.
fn active_steps(trace: &SolveTrace, s_min: f64, horizon: f64) -> Vec<usize> {
    (1..trace.len())
        .filter(|&k| {
            let t = trace.fields[k].time;
            t >= s_min * (1.0 - 1e-12) && t < horizon
        })
        .collect()
}

fn location_of(field: &GridField, index: usize, s: Option<f64>) -> Location {
    let x = field.point(index);
    Location {
        index,
        x: x.iter().take(field.dim).copied().collect(),
        s,
        t: field.time,
    }
}

fn row(field: &GridField, index: usize, s: Option<f64>, residual: f64) -> SeriesRow {
    let x = field.point(index);
    SeriesRow {
        t: field.time,
        s,
        residual,
        x0: x[0],
        x1: (field.dim == 2).then_some(x[1]),
    }
}

/// `(min, argmin)` over a slice, first index on ties.
fn min_at(values: impl Iterator<Item = f64>) -> (f64, usize) {
    values
        .enumerate()
        .fold((f64::INFINITY, 0), |b, (k, v)| if v < b.0 { (v, k) } else { b })
}

fn max_at(values: impl Iterator<Item = f64>) -> (f64, usize) {
    values
        .enumerate()
        .fold((f64::NEG_INFINITY, 0), |b, (k, v)| if v > b.0 { (v, k) } else { b })
}

/// `v(x,t) - v(x,s) + (t - s) eta(s)` at one grid point of a stored pair.
pub fn theorem_residual(
    trace: &SolveTrace,
    profile: &StructureProfile,
    ks: usize,
    kt: usize,
    index: usize,
) -> Result<f64> {
    let (fields, _) = nonnegative(trace);
    let vs = -(-fields[ks].values[index]).exp();
    let vt = -(-fields[kt].values[index]).exp();
    let (s, t) = (fields[ks].time, fields[kt].time);
    Ok(vt - vs + (t - s) * profile.eta(s)?)
}

/// Stored pairs `(ks, kt)` with `s < t` (the residual vanishes at `s = t`):
/// `s` near `t/4, t/2, 3t/4, t - dt` for every
/// active `t`, plus all pairs on every `SWEEP_STRIDE`-th active step.
fn theorem_pairs(trace: &SolveTrace, active: &[usize], s_min: f64) -> Vec<(usize, usize)> {
    let mut pairs = std::collections::BTreeSet::new();
    for &kt in active {
        let t = trace.fields[kt].time;
        for s in [t / 4.0, t / 2.0, 0.75 * t, t - trace.dt] {
            let ks = trace.index_near(s);
            if ks < kt && trace.fields[ks].time >= s_min * (1.0 - 1e-12) {
                pairs.insert((ks, kt));
            }
        }
    }
    let thin: Vec<usize> = active.iter().copied().step_by(SWEEP_STRIDE).collect();
    for (i, &ks) in thin.iter().enumerate() {
        for &kt in &thin[i + 1..] {
            pairs.insert((ks, kt));
        }
    }
    pairs.into_iter().collect()
}

/// Minimum over grid points and stored pairs `s_min <= s < t < t*` of
/// `v(x,t) - v(x,s) + (t - s) eta(s)`; passes iff it is `>= -tol`.
pub fn check_theorem_main(trace: &SolveTrace, profile: &StructureProfile, tol_constant: f64) -> Result<EstimateEntry> {
    let (s_min, tol) = tolerance(trace, tol_constant);
    let mut entry = EstimateEntry::new("theorem-main", "min", tol, s_min);
    entry.notes.push("pairs with s < s_min are skipped; at s = 0 the eta term is infinite".into());
    let horizon = profile.t_star;
    if trace.last().time >= horizon {
        entry.notes.push(format!("times at or beyond t* = {horizon} excluded"));
    }
    let (fields, shift) = nonnegative(trace);
    shift_note(&mut entry, shift);
    let active = active_steps(trace, s_min, horizon);
    if active.is_empty() {
        entry.status = Status::NotApplicable;
        entry.notes.push("no stored time in [s_min, t*)".into());
        return Ok(entry);
    }
    let vfields: Vec<Option<GridField>> = (0..fields.len())
        .map(|k| {
            if k == 0 {
                Ok(None)
            } else {
                u_to_v(&fields[k]).map(Some)
            }
        })
        .collect::<Result<_>>()?;
    let pairs = theorem_pairs(trace, &active, s_min);
    let etas: BTreeMap<usize, f64> = pairs
        .iter()
        .map(|&(ks, _)| ks)
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .map(|ks| profile.eta(fields[ks].time).map(|e| (ks, e)))
        .collect::<Result<_>>()?;

    let mins: Vec<(f64, usize)> = pairs
        .par_iter()
        .map(|&(ks, kt)| {
            let vs = &vfields[ks].as_ref().expect("active steps are >= 1").values;
            let vt = &vfields[kt].as_ref().expect("active steps are >= 1").values;
            let gap = fields[kt].time - fields[ks].time;
            let eta = etas[&ks];
            min_at(vs.iter().zip(vt).map(|(a, b)| b - a + gap * eta))
        })
        .collect();
    let (mut worst, mut at) = (f64::INFINITY, 0usize);
    let mut per_t: BTreeMap<usize, (f64, usize, usize)> = BTreeMap::new();
    for (i, &(r, idx)) in mins.iter().enumerate() {
        if r < worst {
            worst = r;
            at = i;
        }
        let (ks, kt) = pairs[i];
        let e = per_t.entry(kt).or_insert((f64::INFINITY, ks, idx));
        if r < e.0 {
            *e = (r, ks, idx);
        }
    }
    let (ks, kt) = pairs[at];
    entry.worst_residual = Some(worst);
    entry.location = Some(location_of(&fields[kt], mins[at].1, Some(fields[ks].time)));
    entry.series = per_t
        .into_iter()
        .map(|(kt, (r, ks, idx))| row(&fields[kt], idx, Some(fields[ks].time), r))
        .collect();
    entry.metrics.insert("pairs".into(), pairs.len() as f64);
    entry.status = if worst >= -tol { Status::Pass } else { Status::Fail };
    Ok(entry)
}

/// Discrete `u_t + eta(t) u >= -tol` and `v_t + eta(t) >= -tol` at every
/// active step.
pub fn check_ut_bound(trace: &SolveTrace, profile: &StructureProfile, tol_constant: f64) -> Result<EstimateEntry> {
    ut_bound_scaled(trace, profile, tol_constant, 1.0, "ut-bound")
}

/// As `check_ut_bound` with `eta` multiplied by `scale`; a diagnostic for
/// alternative constants.
pub fn ut_bound_scaled(
    trace: &SolveTrace,
    profile: &StructureProfile,
    tol_constant: f64,
    scale: f64,
    name: &str,
) -> Result<EstimateEntry> {
    let (s_min, tol) = tolerance(trace, tol_constant);
    let mut entry = EstimateEntry::new(name, "min", tol, s_min);
    if scale != 1.0 {
        entry.notes.push(format!("eta scaled by {scale}"));
    }
    let horizon = profile.t_star;
    let (fields, shift) = nonnegative(trace);
    shift_note(&mut entry, shift);
    let active = active_steps(trace, s_min, horizon);
    if active.is_empty() {
        entry.status = Status::NotApplicable;
        entry.notes.push("no stored time in [s_min, t*)".into());
        return Ok(entry);
    }
    let etas: Vec<f64> = active
        .iter()
        .map(|&k| profile.eta(fields[k].time).map(|e| scale * e))
        .collect::<Result<_>>()?;
    let rows = ut_rows(trace, &fields, &active, |i| etas[i])?;
    finish_lower(&mut entry, &fields, &active, &rows, tol);

    // v-form: v_t + eta(t) with v = -exp(-u)
    let vmins: Vec<(f64, usize)> = active
        .par_iter()
        .zip(&etas)
        .map(|(&k, &eta)| {
            let (a, b) = (&fields[k - 1].values, &fields[k].values);
            min_at(a.iter().zip(b).map(|(ua, ub)| ((-ua).exp() - (-ub).exp()) / trace.dt + eta))
        })
        .collect();
    let (vworst, vi) = min_at(vmins.iter().map(|m| m.0));
    entry.metrics.insert("v_form_worst".into(), vworst);
    entry.metrics.insert("v_form_t".into(), fields[active[vi]].time);
    if vworst < -tol {
        entry.status = Status::Fail;
        entry.notes.push("v-form bound violated".into());
    }
    Ok(entry)
}

/// Per active step: `min_x [u_t + eta_i u]` and its grid index.
fn ut_rows(
    trace: &SolveTrace,
    fields: &[GridField],
    active: &[usize],
    eta: impl Fn(usize) -> f64 + Sync,
) -> Result<Vec<(f64, usize)>> {
    active
        .par_iter()
        .enumerate()
        .map(|(i, &k)| {
            let (a, b) = (&fields[k - 1].values, &fields[k].values);
            let e = eta(i);
            Ok(min_at(a.iter().zip(b).map(|(ua, ub)| (ub - ua) / trace.dt + e * ub)))
        })
        .collect()
}

fn finish_lower(entry: &mut EstimateEntry, fields: &[GridField], active: &[usize], rows: &[(f64, usize)], tol: f64) {
    let (worst, i) = min_at(rows.iter().map(|r| r.0));
    entry.worst_residual = Some(worst);
    entry.location = Some(location_of(&fields[active[i]], rows[i].1, None));
    entry.series = active
        .iter()
        .zip(rows)
        .map(|(&k, &(r, idx))| row(&fields[k], idx, None, r))
        .collect();
    entry.status = if worst >= -tol { Status::Pass } else { Status::Fail };
}

/// `u_t + eta_capped(t) u >= -tol` over all steps past `s_min`, including
/// times beyond `t*`.
pub fn check_corollary_capped(trace: &SolveTrace, profile: &StructureProfile, tol_constant: f64) -> Result<EstimateEntry> {
    if !(profile.c_star > 0.0) {
        return Err(Error::Misuse("the capped bound needs c* > 0".into()));
    }
    let (s_min, tol) = tolerance(trace, tol_constant);
    let mut entry = EstimateEntry::new("corollary-capped", "min", tol, s_min);
    let (fields, shift) = nonnegative(trace);
    shift_note(&mut entry, shift);
    let active = active_steps(trace, s_min, f64::INFINITY);
    if active.is_empty() {
        entry.status = Status::NotApplicable;
        entry.notes.push("no stored time past s_min".into());
        return Ok(entry);
    }
    let etas: Vec<f64> = active
        .iter()
        .map(|&k| profile.eta_capped(fields[k].time))
        .collect::<Result<_>>()?;
    entry.metrics.insert("cap".into(), profile.eta_capped(profile.t_star)?);
    let rows = ut_rows(trace, &fields, &active, |i| etas[i])?;
    finish_lower(&mut entry, &fields, &active, &rows, tol);
    Ok(entry)
}

/// Times at which the decay of `(u_t)^-` is sampled.
pub const DECAY_TIMES: [f64; 3] = [1.0, 2.0, 4.0];

/// `d(t) = max_x (u_t)^-` at `t = 1, 2, 4` must be nonincreasing (within tol)
/// with `d(4) <= eta(4) max u(., 4) + tol`.
pub fn check_corollary_decay(trace: &SolveTrace, profile: &StructureProfile, tol_constant: f64) -> Result<EstimateEntry> {
    if profile.c_star != 0.0 {
        return Err(Error::Misuse("the decay check needs c* = 0".into()));
    }
    let end = trace.last().time;
    if end < DECAY_TIMES[2] * (1.0 - 1e-9) {
        return Err(Error::Misuse(format!("the decay check needs T >= 4, trace ends at {end}")));
    }
    let (s_min, tol) = tolerance(trace, tol_constant);
    let mut entry = EstimateEntry::new("corollary-decay", "max", tol, s_min);
    let (fields, shift) = nonnegative(trace);
    shift_note(&mut entry, shift);
    let mut d = Vec::new();
    for t in DECAY_TIMES {
        let k = trace.index_near(t).max(1);
        let ut = discrete_time_derivative(trace, k)?;
        let (dm, idx) = max_at(ut.values.iter().map(|&v| (-v).max(0.0)));
        let bound = profile.eta(fields[k].time)? * fields[k].max();
        entry.metrics.insert(format!("d({t})"), dm);
        entry.metrics.insert(format!("eta_max_u({t})"), bound);
        entry.series.push(row(&fields[k], idx, None, dm));
        d.push((dm, bound, k, idx));
    }
    let nonincreasing = d.windows(2).all(|w| w[1].0 <= w[0].0 + tol);
    let (d4, b4, k4, i4) = d[2];
    entry.worst_residual = Some(d4 - b4);
    entry.location = Some(location_of(&fields[k4], i4, None));
    if !nonincreasing {
        entry.notes.push("d(t) increases between sampled times".into());
    }
    entry.status = if nonincreasing && d4 <= b4 + tol {
        Status::Pass
    } else {
        Status::Fail
    };
    Ok(entry)
}

/// Largest `|Du|` over the stored fields with `t >= t_from`.
pub fn max_gradient(trace: &SolveTrace, t_from: f64) -> f64 {
    trace
        .fields
        .iter()
        .filter(|f| f.time >= t_from)
        .map(|f| discrete_gradient(f).iter().map(|g| g.norm()).fold(0.0, f64::max))
        .fold(0.0, f64::max)
}

/// Accepted range of `max |Du|(dx) / max |Du|(dx/2)`.
pub const REFINEMENT_RANGE: (f64, f64) = (0.8, 1.25);

/// `H(x, t, Du) - eta(t) u <= tol` for `t_from <= t < t*`, plus the Lipschitz
/// constant `max |Du|` and, given a refined trace, its stability under
/// refinement.
pub fn check_gradient_bound(
    model: &HamiltonianModel,
    trace: &SolveTrace,
    profile: &StructureProfile,
    tol_constant: f64,
    t_from: f64,
    refined: Option<&SolveTrace>,
) -> Result<EstimateEntry> {
    if !model.constants.coercive {
        return Ok(EstimateEntry::not_applicable(
            "gradient-bound",
            "model is not coercive",
        ));
    }
    let (s_min, tol) = tolerance(trace, tol_constant);
    let from = t_from.max(s_min);
    let mut entry = EstimateEntry::new("gradient-bound", "max", tol, s_min);
    let (fields, shift) = nonnegative(trace);
    shift_note(&mut entry, shift);
    let active = active_steps(trace, from, profile.t_star);
    if active.is_empty() {
        entry.status = Status::NotApplicable;
        entry.notes.push("no stored time in the checked window".into());
        return Ok(entry);
    }
    let rows: Vec<(f64, usize, f64)> = active
        .par_iter()
        .map(|&k| {
            let f = &fields[k];
            let eta = profile.eta(f.time)?;
            let grad = discrete_gradient(f);
            let (r, idx) = max_at(
                grad.iter()
                    .enumerate()
                    .map(|(i, g)| model.h(&f.point(i), f.time, g) - eta * f.values[i]),
            );
            Ok((r, idx, grad.iter().map(|g| g.norm()).fold(0.0, f64::max)))
        })
        .collect::<Result<_>>()?;
    let (worst, i) = max_at(rows.iter().map(|r| r.0));
    entry.worst_residual = Some(worst);
    entry.location = Some(location_of(&fields[active[i]], rows[i].1, None));
    entry.series = active
        .iter()
        .zip(&rows)
        .map(|(&k, &(r, idx, _))| row(&fields[k], idx, None, r))
        .collect();
    let lip = rows.iter().map(|r| r.2).fold(0.0, f64::max);
    entry.metrics.insert("max_grad".into(), lip);
    entry.metrics.insert("t_from".into(), from);
    let mut ok = worst <= tol && lip.is_finite();
    if let Some(fine) = refined {
        let t_hi = trace.fields[active[active.len() - 1]].time;
        let lip_fine = fine
            .fields
            .iter()
            .filter(|f| f.time >= from && f.time <= t_hi)
            .map(|f| discrete_gradient(f).iter().map(|g| g.norm()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        let ratio = lip / lip_fine;
        entry.metrics.insert("max_grad_refined".into(), lip_fine);
        entry.metrics.insert("refinement_ratio".into(), ratio);
        if !(REFINEMENT_RANGE.0..=REFINEMENT_RANGE.1).contains(&ratio) {
            ok = false;
            entry.notes.push(format!("max |Du| changes by a factor {ratio} under refinement"));
        }
    }
    entry.status = if ok { Status::Pass } else { Status::Fail };
    Ok(entry)
}

/// Worst residual of `u_t + eta u` per step as `(t, residual)`, for
/// convergence studies.
pub fn ut_series(entry: &EstimateEntry) -> Vec<(f64, f64)> {
    entry.series.iter().map(|r| (r.t, r.residual)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonians::{make_exponential, make_power_norm, PowerNormModel};
    use crate::solver::{solve, SolveOptions};
    use crate::structure::{build_profile, PhiFunction};

    fn quadratic(dim: usize) -> HamiltonianModel {
        make_power_norm(PowerNormModel::new(2.0, dim)).unwrap()
    }

    fn linear_profile() -> StructureProfile {
        build_profile(PhiFunction::linear(1.0), 0.0).unwrap()
    }

    fn corner(n: usize, t_end: f64) -> SolveTrace {
        let u0 = GridField::from_fn(1, n, 1.0, |x| x[0].min(1.0 - x[0])).unwrap();
        solve(&quadratic(1), &u0, t_end, &SolveOptions::default()).unwrap()
    }

    #[test]
    fn constant_state_passes_everything() {
        let u0 = GridField::constant(1, 32, 1.0, 0.0).unwrap();
        let trace = solve(&quadratic(1), &u0, 0.5, &SolveOptions::default()).unwrap();
        let p = linear_profile();
        let th = check_theorem_main(&trace, &p, DEFAULT_TOL_CONSTANT).unwrap();
        assert!(th.passed());
        assert!(th.worst_residual.unwrap() >= 0.0);
        let ut = check_ut_bound(&trace, &p, DEFAULT_TOL_CONSTANT).unwrap();
        assert!(ut.passed());
        // u = t and eta = 2/t, so u_t + eta u = 3
        assert!((ut.worst_residual.unwrap() - 3.0).abs() < 1e-9);
        let g = check_gradient_bound(&quadratic(1), &trace, &p, DEFAULT_TOL_CONSTANT, 0.1, None).unwrap();
        assert!(g.passed());
        assert_eq!(g.metrics["max_grad"], 0.0);
    }

    #[test]
    fn corner_data_passes_at_moderate_resolution() {
        let trace = corner(100, 1.0);
        let p = linear_profile();
        let th = check_theorem_main(&trace, &p, DEFAULT_TOL_CONSTANT).unwrap();
        assert!(th.passed(), "{th:?}");
        let loc = th.location.clone().unwrap();
        let ks = trace.index_near(loc.s.unwrap());
        let kt = trace.index_near(loc.t);
        let r = theorem_residual(&trace, &p, ks, kt, loc.index).unwrap();
        assert_eq!(r, th.worst_residual.unwrap());
        let ut = check_ut_bound(&trace, &p, DEFAULT_TOL_CONSTANT).unwrap();
        assert!(ut.passed(), "{ut:?}");
        let g = check_gradient_bound(&quadratic(1), &trace, &p, DEFAULT_TOL_CONSTANT, 0.1, None).unwrap();
        assert!(g.passed(), "{g:?}");
        assert!(g.metrics["max_grad"] <= 1.0 + 1e-9);
    }

    #[test]
    fn misuse_errors() {
        let trace = corner(32, 0.5);
        assert!(check_corollary_capped(&trace, &linear_profile(), 10.0).is_err());
        assert!(check_corollary_decay(&trace, &linear_profile(), 10.0).is_err());
        let exp = build_profile(PhiFunction::exponential_model(), std::f64::consts::E * std::f64::consts::E).unwrap();
        let long = corner(32, 4.0);
        assert!(check_corollary_decay(&long, &exp, 10.0).is_err());
    }

    #[test]
    fn capped_bound_on_constant_exponential_data() {
        let m = make_exponential(1).unwrap();
        let p = build_profile(PhiFunction::exponential_model(), m.constants.c_star()).unwrap();
        let u0 = GridField::constant(1, 32, 1.0, 0.0).unwrap();
        let trace = solve(&m, &u0, 2.0 * p.t_star, &SolveOptions::default()).unwrap();
        let e = check_corollary_capped(&trace, &p, DEFAULT_TOL_CONSTANT).unwrap();
        assert!(e.passed(), "{e:?}");
    }

    #[test]
    fn decay_constant_data() {
        let u0 = GridField::constant(1, 16, 1.0, 0.0).unwrap();
        let trace = solve(&quadratic(1), &u0, 4.0, &SolveOptions::default()).unwrap();
        let e = check_corollary_decay(&trace, &linear_profile(), DEFAULT_TOL_CONSTANT).unwrap();
        assert!(e.passed());
        assert_eq!(e.metrics["d(4)"], 0.0);
    }

    #[test]
    fn csv_series_written() {
        let trace = corner(32, 0.3);
        let e = check_ut_bound(&trace, &linear_profile(), DEFAULT_TOL_CONSTANT).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ut.csv");
        e.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("t,s,residual,x0,x1"));
        assert_eq!(text.lines().count(), e.series.len() + 1);
    }
}
