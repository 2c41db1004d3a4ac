//! Config-driven runs: certification, solving and estimate checks, with every
//! artifact written to one self-describing output directory.

use crate::conditions::{
    check_h0, check_h1, check_h2, check_h3, CertificationReport, CoercivityProbe,
};
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::hamiltonians::HamiltonianModel;
use crate::solver::{discrete_gradient, discrete_time_derivative, solve, GridField, SolveTrace};
use crate::structure::{build_profile, check_integrability, extract_empirical_phi, PhiFunction, StructureProfile};
use crate::transform::{check_g_lemma, TransformedHamiltonian};
use crate::verify::{
    check_corollary_capped, check_corollary_decay, check_gradient_bound, check_theorem_main,
    check_ut_bound, ut_bound_scaled, EstimateEntry, EstimateReport,
};
use serde::Serialize;
use std::fs;
use std::path::Path;

/// Name of the marker left in an output directory by a failed run.
pub const FAILURE_MARKER: &str = "FAILED";

/// Runs `f` on a pool of `workers` threads (all cores when `None`).
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(k) = workers {
        if k == 0 {
            return Err(Error::Config("--workers must be at least 1".into()));
        }
        builder = builder.num_threads(k);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// The family's closed-form phi, or the empirical envelope.
pub fn resolve_phi(model: &HamiltonianModel, cfg: &ScenarioConfig) -> Result<PhiFunction> {
    if let Some(phi) = &model.phi {
        return Ok(phi.clone());
    }
    // the envelope is only a lower bound from its first level on, so start at c0
    let c0 = model.constants.c0;
    let mut levels: Vec<f64> = cfg.checks.empirical_levels.iter().copied().filter(|&s| s > c0).collect();
    levels.insert(0, c0);
    let per_level = (cfg.checks.samples / levels.len()).max(50);
    let emp = extract_empirical_phi(model, &levels, &cfg.checks.sample_box, per_level, cfg.seed)?;
    emp.to_phi(model.constants.c0)
}

pub fn build_structure(model: &HamiltonianModel, cfg: &ScenarioConfig) -> Result<StructureProfile> {
    build_profile(resolve_phi(model, cfg)?, model.constants.c_star())
}

/// Runs the configured hypothesis checks. No files are written.
pub fn certify(cfg: &ScenarioConfig, model: &HamiltonianModel, profile: &StructureProfile) -> Result<CertificationReport> {
    let checks = &cfg.checks;
    let bx = &checks.sample_box;
    let n = checks.samples;
    let seed = cfg.seed;
    let c = model.constants;
    let phi = profile.phi();
    let mut report = CertificationReport::new(model, phi, seed);
    if checks.integrability {
        report.integrability = Some(check_integrability(phi, None));
    }
    for h in &checks.hypotheses {
        let r = match h.as_str() {
            "H0" => check_h0(model, phi, checks.h0_level.unwrap_or(c.c0), bx, n, seed)?,
            "H1" => check_h1(model, profile, c.c1, bx, n, seed.wrapping_add(1))?,
            "H2" => {
                let probe = CoercivityProbe {
                    compacts: vec![*bx],
                    radii: checks.coercivity_radii.clone(),
                    threshold: checks.coercivity_threshold,
                    ..CoercivityProbe::default()
                };
                check_h2(model, &probe, seed.wrapping_add(2))?
            }
            "H3" => check_h3(model, c.c2, bx, n, seed.wrapping_add(3))?,
            other => return Err(Error::Config(format!("unknown hypothesis `{other}`"))),
        };
        report.results.push(r);
    }
    if checks.g_lemma {
        let tr = TransformedHamiltonian::new(model.clone());
        report.g_lemma = Some(check_g_lemma(&tr, profile, bx, n, seed.wrapping_add(4))?);
    }
    Ok(report)
}

/// Solves the configured problem; the second trace is the `2n` run when
/// gradient refinement is requested.
pub fn run_solver(cfg: &ScenarioConfig, model: &HamiltonianModel) -> Result<(SolveTrace, Option<SolveTrace>)> {
    let dim = model.dim;
    let u0 = cfg.initial.field(dim, &cfg.grid)?;
    let opts = cfg.time.solve_options();
    let trace = solve(model, &u0, cfg.time.t_end, &opts)?;
    let refined = if cfg.checks.gradient && cfg.checks.gradient_refinement {
        let mut grid = cfg.grid;
        grid.n *= 2;
        let u0 = cfg.initial.field(dim, &grid)?;
        Some(solve(model, &u0, cfg.time.t_end, &opts)?)
    } else {
        None
    };
    Ok((trace, refined))
}

fn not_applicable(check: &str, reason: String) -> EstimateEntry {
    EstimateEntry {
        check: check.into(),
        status: crate::verify::Status::NotApplicable,
        worst_residual: None,
        sense: "none".into(),
        location: None,
        tolerance: 0.0,
        s_min: 0.0,
        metrics: Default::default(),
        notes: vec![reason],
        series: Vec::new(),
    }
}

/// Runs the configured estimate checks on a trace. Checks whose
/// preconditions fail are recorded as not applicable.
pub fn verify_trace(
    cfg: &ScenarioConfig,
    model: &HamiltonianModel,
    profile: &StructureProfile,
    trace: &SolveTrace,
    refined: Option<&SolveTrace>,
) -> Result<EstimateReport> {
    let checks = &cfg.checks;
    let c_tol = checks.tol_constant;
    let mut report = EstimateReport::new(trace, profile, c_tol);
    if checks.theorem {
        report.entries.push(check_theorem_main(trace, profile, c_tol)?);
    }
    if checks.ut_bound {
        report.entries.push(check_ut_bound(trace, profile, c_tol)?);
    }
    if checks.eta_diagnostic {
        let mut e = ut_bound_scaled(trace, profile, c_tol, 0.5, "ut-bound-half-eta")?;
        e.notes.push("diagnostic only; not an acceptance gate".into());
        report.entries.push(e);
    }
    if checks.corollary_capped {
        report.entries.push(if profile.c_star > 0.0 {
            check_corollary_capped(trace, profile, c_tol)?
        } else {
            not_applicable("corollary-capped", "c* = 0: the bound is not capped".into())
        });
    }
    if checks.corollary_decay {
        let end = trace.last().time;
        report.entries.push(if profile.c_star != 0.0 {
            not_applicable("corollary-decay", format!("c* = {} > 0", profile.c_star))
        } else if end < 4.0 {
            not_applicable("corollary-decay", format!("trace ends at t = {end} < 4"))
        } else {
            check_corollary_decay(trace, profile, c_tol)?
        });
    }
    if checks.gradient {
        report.entries.push(check_gradient_bound(
            model,
            trace,
            profile,
            c_tol,
            checks.gradient_t_from,
            refined,
        )?);
    }
    Ok(report)
}

/// `(t, max |Du|)` for every stored field.
pub fn gradient_series(trace: &SolveTrace) -> Vec<(f64, f64)> {
    trace
        .fields
        .iter()
        .map(|f| (f.time, discrete_gradient(f).iter().map(|g| g.norm()).fold(0.0, f64::max)))
        .collect()
}

/// `(t, max (u_t)^-)` for every stored step past the first.
pub fn ut_negative_series(trace: &SolveTrace) -> Result<Vec<(f64, f64)>> {
    (1..trace.len())
        .map(|k| {
            let ut: GridField = discrete_time_derivative(trace, k)?;
            Ok((ut.time, ut.values.iter().map(|&v| (-v).max(0.0)).fold(0.0, f64::max)))
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
struct RunInfo<'a> {
    package: &'static str,
    version: &'static str,
    command: &'a str,
    seed: u64,
    family: &'static str,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    fs::write(path, bytes)?;
    Ok(())
}

fn write_pairs(path: &Path, header: [&str; 2], rows: &[(f64, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for (a, b) in rows {
        w.write_record([a.to_string(), b.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Creates `out`, clears a stale failure marker and records the resolved
/// config and run info.
fn prepare(cfg: &ScenarioConfig, out: &Path, command: &str) -> Result<()> {
    fs::create_dir_all(out)?;
    let marker = out.join(FAILURE_MARKER);
    if marker.exists() {
        fs::remove_file(marker)?;
    }
    fs::write(out.join("resolved_config.toml"), cfg.to_toml()?)?;
    write_json(
        &out.join("run_info.json"),
        &RunInfo {
            package: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed: cfg.seed,
            family: cfg.model.family(),
        },
    )
}

/// Runs `f`, leaving a failure marker with the error text when it fails.
fn guarded<T>(out: &Path, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let r = f();
    if let Err(e) = &r {
        let _ = fs::create_dir_all(out);
        let _ = fs::write(out.join(FAILURE_MARKER), format!("{e}\n"));
    }
    r
}

/// Certification with its artifacts: `certification.json` and `profile.json`.
pub fn run_certify(cfg: &ScenarioConfig, out: &Path) -> Result<CertificationReport> {
    guarded(out, || {
        prepare(cfg, out, "certify")?;
        let model = cfg.build_model()?;
        let profile = build_structure(&model, cfg)?;
        write_json(&out.join("profile.json"), &profile.dump())?;
        let report = certify(cfg, &model, &profile)?;
        write_json(&out.join("certification.json"), &report)?;
        Ok(report)
    })
}

fn write_estimates(cfg: &ScenarioConfig, out: &Path, trace: &SolveTrace, report: &EstimateReport) -> Result<()> {
    if cfg.output.wants("json") {
        write_json(&out.join("estimates.json"), report)?;
    }
    if cfg.output.wants("csv") {
        for e in &report.entries {
            if !e.series.is_empty() {
                e.write_csv(&out.join(format!("{}.csv", e.check)))?;
            }
        }
        write_pairs(&out.join("max_grad.csv"), ["t", "max_grad"], &gradient_series(trace))?;
        write_pairs(&out.join("ut_negative.csv"), ["t", "max_ut_negative"], &ut_negative_series(trace)?)?;
    }
    Ok(())
}

/// Solve plus estimate checks: the trace, `estimates.json` and the CSVs.
pub fn run_solve_verify(cfg: &ScenarioConfig, out: &Path) -> Result<EstimateReport> {
    guarded(out, || {
        prepare(cfg, out, "solve")?;
        let model = cfg.build_model()?;
        let profile = build_structure(&model, cfg)?;
        let (trace, refined) = run_solver(cfg, &model)?;
        if cfg.output.write_trace {
            trace.write(&out.join("trace"))?;
        }
        let report = verify_trace(cfg, &model, &profile, &trace, refined.as_ref())?;
        write_estimates(cfg, out, &trace, &report)?;
        Ok(report)
    })
}

/// Estimate checks on a stored trace.
pub fn run_verify(cfg: &ScenarioConfig, trace_dir: &Path, out: &Path) -> Result<EstimateReport> {
    guarded(out, || {
        prepare(cfg, out, "verify")?;
        let model = cfg.build_model()?;
        let profile = build_structure(&model, cfg)?;
        let trace = SolveTrace::read(trace_dir)?;
        if trace.model != model.name {
            return Err(Error::Config(format!(
                "trace was computed for `{}`, config builds `{}`",
                trace.model, model.name
            )));
        }
        let report = verify_trace(cfg, &model, &profile, &trace, None)?;
        write_estimates(cfg, out, &trace, &report)?;
        Ok(report)
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub certification: Option<CertificationReport>,
    /// `None` when certification found a violation and the solve was skipped.
    pub estimates: Option<EstimateReport>,
}

impl RunSummary {
    pub fn any_failure(&self) -> bool {
        self.certification.as_ref().is_some_and(|c| c.any_violation())
            || self.estimates.as_ref().is_some_and(|e| !e.all_passed())
    }
}

/// Certification (unless skipped), then solve and verify. A violated
/// certification stops before the solve.
pub fn run_all(cfg: &ScenarioConfig, out: &Path, skip_cert: bool) -> Result<RunSummary> {
    guarded(out, || {
        prepare(cfg, out, "run")?;
        let model = cfg.build_model()?;
        let profile = build_structure(&model, cfg)?;
        write_json(&out.join("profile.json"), &profile.dump())?;
        let certification = if skip_cert {
            None
        } else {
            let r = certify(cfg, &model, &profile)?;
            write_json(&out.join("certification.json"), &r)?;
            Some(r)
        };
        if certification.as_ref().is_some_and(|c| c.any_violation()) {
            return Ok(RunSummary {
                certification,
                estimates: None,
            });
        }
        let (trace, refined) = run_solver(cfg, &model)?;
        if cfg.output.write_trace {
            trace.write(&out.join("trace"))?;
        }
        let estimates = verify_trace(cfg, &model, &profile, &trace, refined.as_ref())?;
        write_estimates(cfg, out, &trace, &estimates)?;
        Ok(RunSummary {
            certification,
            estimates: Some(estimates),
        })
    })
}

/// One built-in family for `list-models`.
#[derive(Debug, Clone, Serialize)]
pub struct CatalogEntry {
    pub family: &'static str,
    pub hamiltonian: &'static str,
    pub phi: &'static str,
    pub parameters: &'static str,
}

pub fn catalog() -> Vec<CatalogEntry> {
    vec![
        CatalogEntry {
            family: "power-norm",
            hamiltonian: "|A(x,t) p|^m - f(x,t)",
            phi: "(m-1) s",
            parameters: "dim, m > 1, a (matrix), f >= 1, coercive",
        },
        CatalogEntry {
            family: "power-norm-drift",
            hamiltonian: "|A(x,t) p|^m - b(x,t).p - f(x,t)",
            phi: "empirical envelope",
            parameters: "dim, m > 1, a, f >= 1, b (vector), coercive",
        },
        CatalogEntry {
            family: "degenerate-drift",
            hamiltonian: "|A(x,t) p|^m - (A^T c)(x,t).p - f(x,t)",
            phi: "empirical envelope",
            parameters: "dim, m > 1, a, f >= 1, c (vector), coercive",
        },
        CatalogEntry {
            family: "scalar-coefficient",
            hamiltonian: "a(x,t) |p|^m",
            phi: "(m-1) s",
            parameters: "dim, m > 1, a >= 0 (scalar)",
        },
        CatalogEntry {
            family: "exponential",
            hamiltonian: "exp(|p|)",
            phi: "s (ln s - 1), c0 = e",
            parameters: "dim",
        },
        CatalogEntry {
            family: "log-growth",
            hamiltonian: "|p| ln(1 + |p|)",
            phi: "r^2/(1+r) with r ln(1+r) = s, c0 = ln 2",
            parameters: "dim",
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(extra: &str) -> ScenarioConfig {
        let text = format!(
            r#"
seed = 3
[model]
family = "power-norm"
dim = 1
m = 2.0
[grid]
n = 32
[time]
t_end = 0.3
[checks]
samples = 300
{extra}
"#
        );
        ScenarioConfig::from_toml_str(&text).unwrap()
    }

    #[test]
    fn certify_writes_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let r = run_certify(&config(""), dir.path()).unwrap();
        assert!(!r.any_violation());
        for f in ["certification.json", "profile.json", "resolved_config.toml", "run_info.json"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        assert!(!dir.path().join(FAILURE_MARKER).exists());
    }

    #[test]
    fn failure_leaves_marker() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = config("");
        cfg.model = crate::config::ModelConfig::PowerNorm {
            dim: 1,
            m: 0.5,
            a: crate::coeffs::MatrixFn::Identity,
            f: crate::coeffs::ScalarFn::constant(1.0),
            coercive: true,
        };
        assert!(run_certify(&cfg, dir.path()).is_err());
        let text = fs::read_to_string(dir.path().join(FAILURE_MARKER)).unwrap();
        assert!(text.contains("m = 0.5"));
        // a later successful run clears it
        run_certify(&config(""), dir.path()).unwrap();
        assert!(!dir.path().join(FAILURE_MARKER).exists());
    }

    #[test]
    fn solve_verify_and_reverify_from_trace() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config("");
        let a = run_solve_verify(&cfg, dir.path()).unwrap();
        assert!(a.all_passed());
        assert!(dir.path().join("trace/meta.json").exists());
        assert!(dir.path().join("ut-bound.csv").exists());
        let other = tempfile::tempdir().unwrap();
        let b = run_verify(&cfg, &dir.path().join("trace"), other.path()).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn worker_count_does_not_change_reports() {
        let cfg = config("");
        let run = |w| {
            let dir = tempfile::tempdir().unwrap();
            with_workers(Some(w), || run_all(&cfg, dir.path(), false).unwrap()).unwrap();
            (
                fs::read(dir.path().join("certification.json")).unwrap(),
                fs::read(dir.path().join("estimates.json")).unwrap(),
            )
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn catalog_lists_all_families() {
        let names: Vec<_> = catalog().iter().map(|c| c.family).collect();
        assert_eq!(names.len(), 6);
        assert!(names.contains(&"log-growth"));
    }
}
