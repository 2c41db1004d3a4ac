//! Acceptance criteria. Each test prints one `criterion N: PASS|FAIL ...` line
//! with the measured values, then asserts.

use hjlab::coeffs::ScalarFn;
use hjlab::conditions::{check_h0, check_h1, check_h2, CoercivityProbe, Verdict};
use hjlab::config::{periodic_distance, ScenarioConfig};
use hjlab::hamiltonians::{
    make_exponential, make_power_norm, make_scalar_coefficient, HamiltonianModel, PowerNormModel,
};
use hjlab::sampling::SampleBox;
use hjlab::scenario::{self, with_workers};
use hjlab::solver::{
    cfl_number, hopf_lax, lf_step, solve, GridField, SolveOptions, SolveTrace,
};
use hjlab::structure::{build_profile, PhiFunction, StructureProfile};
use hjlab::transform::{check_g_lemma, TransformedHamiltonian};
use hjlab::verify::{
    check_corollary_decay, check_gradient_bound, check_theorem_main, check_ut_bound, Status,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

const TOL_CONSTANT: f64 = 10.0;

fn report(k: usize, ok: bool, elapsed: Duration, budget_s: f64, detail: String) {
    let in_time = elapsed.as_secs_f64() < budget_s;
    let verdict = if ok && in_time { "PASS" } else { "FAIL" };
    // written to the handle directly so the line shows up without --nocapture
    let line = format!(
        "criterion {k}: {verdict} {detail}; {:.2}s (budget {budget_s}s)\n",
        elapsed.as_secs_f64()
    );
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
    assert!(ok, "criterion {k} failed: {detail}");
    assert!(in_time, "criterion {k} over budget: {:.2}s", elapsed.as_secs_f64());
}

fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| lo * (hi / lo).powf(k as f64 / (n - 1) as f64))
        .collect()
}

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn quadratic(f: f64) -> HamiltonianModel {
    let mut p = PowerNormModel::new(2.0, 1);
    p.f = ScalarFn::constant(f);
    make_power_norm(p).unwrap()
}

fn corner(n: usize) -> GridField {
    GridField::from_fn(1, n, 1.0, |x| periodic_distance(x[0], 0.0, 1.0)).unwrap()
}

#[test]
fn criterion_01_closed_form_constants() {
    let start = Instant::now();
    let mut worst_psi: f64 = 0.0;
    let mut worst_eta: f64 = 0.0;
    for m in [1.5, 2.0, 3.0] {
        let profile = build_profile(PhiFunction::linear(m - 1.0), 0.0).unwrap();
        for tau in log_spaced(1e-3, 1e3, 20) {
            let want = tau / (2.0 * m);
            worst_psi = worst_psi.max((profile.psi(tau).unwrap() - want).abs() / want);
        }
        for s in log_spaced(1e-2, 1e2, 20) {
            let want = 2.0 / ((m - 1.0) * s);
            worst_eta = worst_eta.max((profile.eta(s).unwrap() - want).abs() / want);
        }
    }
    let ok = worst_psi <= 1e-10 && worst_eta <= 1e-6;
    report(
        1,
        ok,
        start.elapsed(),
        1.0,
        format!("max rel err psi = {worst_psi:.2e} (<= 1e-10), eta = {worst_eta:.2e} (<= 1e-6)"),
    )
}

#[test]
fn criterion_02_structure_identities() {
    let start = Instant::now();
    let cases: Vec<(&str, StructureProfile)> = vec![
        ("linear", build_profile(PhiFunction::linear(1.0), 0.0).unwrap()),
        ("exponential", build_profile(PhiFunction::exponential_model(), std::f64::consts::E).unwrap()),
        ("log-growth", build_profile(PhiFunction::log_growth(), std::f64::consts::LN_2).unwrap()),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, profile) in &cases {
        // keep eta(s) above 2 c0 so the psi identity is in range at every sample
        let c0 = profile.phi().c0;
        let hi = if c0 > 0.0 {
            profile.f(2.1 * c0).unwrap()
        } else {
            1e3
        };
        let hi = hi.min(0.9 * profile.t_star);
        let s = log_spaced(1e-3, hi, 100);
        let r = profile.invariant_residuals(&s).unwrap();
        let pass = r.samples == 100
            && r.psi_checked == 100
            && r.psi <= 1e-8
            && r.round_trip <= 1e-8
            && r.ode <= 1e-6;
        ok &= pass;
        parts.push(format!(
            "{name} s in [1e-3, {hi:.3}]: psi {:.1e}, F(eta) {:.1e}, ode {:.1e}",
            r.psi, r.round_trip, r.ode
        ));
    }
    report(2, ok, start.elapsed(), 5.0, parts.join("; "))
}

#[test]
fn criterion_03_certification_suite() {
    let start = Instant::now();
    let load = |name: &str| {
        let cfg = ScenarioConfig::load(&config_path(name)).unwrap();
        let model = cfg.build_model().unwrap();
        let profile = scenario::build_structure(&model, &cfg).unwrap();
        (cfg, model, profile)
    };

    let (cfg, quad, profile) = load("quadratic-corner-1d.toml");
    let phi = profile.phi();
    let phi_is_identity = [0.5, 1.0, 7.0, 100.0].iter().all(|&s| (phi.eval(s) - s).abs() < 1e-12);
    let h0 = check_h0(&quad, phi, quad.constants.c0, &SampleBox::default(), 10_000, cfg.seed).unwrap();
    let h2 = check_h2(&quad, &CoercivityProbe::default(), cfg.seed + 2).unwrap();
    let ex1_ok = phi_is_identity
        && quad.constants.kappa == 2.0
        && h0.verdict == Verdict::CertifiedOnSample
        && h0.violations == 0
        && h0.samples_requested == 10_000
        && h2.verdict == Verdict::CertifiedOnSample
        && h2.violations == 0;

    let (cfg, bad, profile) = load("time-coefficient-violated.toml");
    let h1_bad = check_h1(&bad, &profile, bad.constants.c1, &SampleBox::default(), cfg.checks.samples, cfg.seed + 1).unwrap();
    let witness = h1_bad.witnesses.first().cloned();
    let bad_ok = h1_bad.verdict == Verdict::Violated && witness.as_ref().is_some_and(|w| w.lhs > w.rhs + w.tol);

    let (cfg, good, profile) = load("time-coefficient-certified.toml");
    let c1 = good.constants.c1;
    let h1_good = check_h1(&good, &profile, c1, &SampleBox::default(), cfg.checks.samples, cfg.seed + 1).unwrap();
    let good_ok = c1 == 4.0 && h1_good.verdict == Verdict::CertifiedOnSample && h1_good.violations == 0;

    let w = witness.map_or("none".to_string(), |w| {
        format!("x = {:.3}, t = {:.3}, p = {:.3}, |H_t| = {:.3} > {:.3}", w.x[0], w.t, w.p[0], w.lhs, w.rhs)
    });
    report(
        3,
        ex1_ok && bad_ok && good_ok,
        start.elapsed(),
        10.0,
        format!(
            "|p|^2 - 1: H0 {:?} ({} violations / {}), H2 {:?}; x^2+t H1 {:?} (witness {w}); g(x)(1+t) c1 = {c1} H1 {:?} ({} violations)",
            h0.verdict, h0.violations, h0.samples_requested, h2.verdict, h1_bad.verdict, h1_good.verdict, h1_good.violations
        ),
    )
}

#[test]
fn criterion_04_g_lemma() {
    let start = Instant::now();
    let mut ok = true;
    let mut parts = Vec::new();
    for model in [quadratic(1.0), make_exponential(1).unwrap()] {
        let phi = model.phi.clone().unwrap();
        let profile = build_profile(phi, model.constants.c_star()).unwrap();
        let name = model.name.clone();
        let tr = TransformedHamiltonian::new(model);
        let r = check_g_lemma(&tr, &profile, &SampleBox::default(), 10_000, 46).unwrap();
        for h in &r.results {
            let applicable = !h.is_vacuous() && h.verdict != Verdict::Unresolved;
            ok &= h.violations == 0 && h.verdict != Verdict::Violated;
            if h.hypothesis == "G0" {
                ok &= applicable && h.samples_resolved >= 9_000;
            }
            parts.push(format!(
                "{name} {} {:?} ({} resolved, {} violations)",
                h.hypothesis, h.verdict, h.samples_resolved, h.violations
            ));
        }
    }
    report(4, ok, start.elapsed(), 10.0, parts.join("; "))
}

/// `max |u - oracle|` at the stored times nearest 0.1 and 0.5.
fn oracle_gaps(n: usize) -> [f64; 2] {
    let model = make_scalar_coefficient(2.0, 1, ScalarFn::constant(1.0)).unwrap();
    let trace = solve(&model, &corner(n), 0.5, &SolveOptions::default()).unwrap();
    [0.1, 0.5].map(|t| {
        let f = &trace.fields[trace.index_near(t)];
        let exact = hopf_lax(&model, &corner(n), f.time, 20.0).unwrap();
        f.values
            .iter()
            .zip(&exact.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    })
}

#[test]
fn criterion_05_oracle_equivalence() {
    let start = Instant::now();
    let coarse = oracle_gaps(400);
    let fine = oracle_gaps(800);
    let bound = 5.0 * (1.0f64 / 400.0).sqrt();
    let ratios = [coarse[0] / fine[0], coarse[1] / fine[1]];
    let ok = coarse.iter().all(|&g| g <= bound) && ratios.iter().all(|&r| r >= 1.3);
    report(
        5,
        ok,
        start.elapsed(),
        30.0,
        format!(
            "n = 400 gaps {:.4} (t = 0.1), {:.4} (t = 0.5) <= {bound:.4}; n = 800 ratios {:.2}, {:.2} (>= 1.3)",
            coarse[0], coarse[1], ratios[0], ratios[1]
        ),
    )
}

struct CornerRuns {
    profile: StructureProfile,
    /// n = 100, 200, 400, 800, each to t = 4.
    traces: Vec<(usize, SolveTrace)>,
}

fn corner_runs() -> &'static CornerRuns {
    static RUNS: OnceLock<CornerRuns> = OnceLock::new();
    RUNS.get_or_init(|| {
        let model = quadratic(1.0);
        let profile = build_profile(model.phi.clone().unwrap(), 0.0).unwrap();
        let traces = [100, 200, 400, 800]
            .into_iter()
            .map(|n| (n, solve(&model, &corner(n), 4.0, &SolveOptions::default()).unwrap()))
            .collect();
        CornerRuns { profile, traces }
    })
}

fn run_of(n: usize) -> &'static SolveTrace {
    &corner_runs().traces.iter().find(|(k, _)| *k == n).unwrap().1
}

fn until(trace: &SolveTrace, t: f64) -> SolveTrace {
    let mut out = trace.clone();
    out.fields.retain(|f| f.time <= t + 1e-9);
    out
}

#[test]
fn criterion_06_theorem_at_desk_scale() {
    let start = Instant::now();
    let runs = corner_runs();
    let mut ok = true;
    let mut worst_neg = Vec::new();
    let mut parts = Vec::new();
    for n in [100, 200, 400] {
        let trace = until(run_of(n), 1.0);
        let thm = check_theorem_main(&trace, &runs.profile, TOL_CONSTANT).unwrap();
        let ut = check_ut_bound(&trace, &runs.profile, TOL_CONSTANT).unwrap();
        ok &= thm.status == Status::Pass && ut.status == Status::Pass;
        worst_neg.push(thm.worst_negative());
        parts.push(format!(
            "n = {n}: theorem min {:.3e} (tol {:.3}), u_t + eta u min {:.3e}",
            thm.worst_residual.unwrap(),
            thm.tolerance,
            ut.worst_residual.unwrap()
        ));
    }
    let monotone = worst_neg.windows(2).all(|w| w[1] <= 1.5 * w[0]);
    ok &= monotone;
    parts.push(format!("worst negative residuals {worst_neg:?} (monotone within 1.5: {monotone})"));
    report(6, ok, start.elapsed(), 60.0, parts.join("; "))
}

#[test]
fn criterion_07_gradient_bound() {
    let start = Instant::now();
    let runs = corner_runs();
    let model = quadratic(1.0);
    let trace = until(run_of(400), 1.0);
    let fine = until(run_of(800), 1.0);
    let e = check_gradient_bound(&model, &trace, &runs.profile, TOL_CONSTANT, 0.1, Some(&fine)).unwrap();
    let ratio = e.metrics["refinement_ratio"];
    let ok = e.status == Status::Pass && e.worst_residual.unwrap() <= e.tolerance && (0.75..=1.25).contains(&ratio);
    report(
        7,
        ok,
        start.elapsed(),
        120.0,
        format!(
            "max H(Du) - eta u = {:.3e} (tol {:.3}) on t in [0.1, 1]; max |Du| {:.4} (n = 400) vs {:.4} (n = 800), ratio {ratio:.3}",
            e.worst_residual.unwrap(),
            e.tolerance,
            e.metrics["max_grad"],
            e.metrics["max_grad_refined"]
        ),
    )
}

#[test]
fn criterion_08_decay() {
    let start = Instant::now();
    let runs = corner_runs();
    let e = check_corollary_decay(run_of(400), &runs.profile, TOL_CONSTANT).unwrap();
    let (d1, d4, b4) = (e.metrics["d(1)"], e.metrics["d(4)"], e.metrics["eta_max_u(4)"]);
    let ok = e.status == Status::Pass && d4 <= d1 && d4 <= b4 + e.tolerance;
    report(
        8,
        ok,
        start.elapsed(),
        120.0,
        format!(
            "max (u_t)^- = {d1:.3e} at t = 1, {d4:.3e} at t = 4; eta(4) max u(4) = {b4:.4} (tol {:.3})",
            e.tolerance
        ),
    )
}

#[test]
fn criterion_09_monotone_scheme() {
    let start = Instant::now();
    let mut p = PowerNormModel::new(2.0, 1);
    p.f = ScalarFn::Sum {
        terms: vec![
            ScalarFn::constant(1.5),
            ScalarFn::Sine { amp: 0.5, freq: 1.0, axis: 0, phase: 0.0 },
        ],
    };
    let model = make_power_norm(p).unwrap();
    let n = 128;
    let steps = 200;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst: f64 = f64::INFINITY;
    for _ in 0..20 {
        let modes: Vec<(f64, f64, f64)> = (0..4)
            .map(|k| (rng.gen_range(-0.2..0.2), (k + 1) as f64, rng.gen_range(0.0..1.0)))
            .collect();
        let bump: Vec<(f64, f64)> = (0..3).map(|_| (rng.gen_range(0.0..0.3), rng.gen_range(0.0..1.0))).collect();
        let wave = |x: f64| -> f64 {
            modes
                .iter()
                .map(|&(a, k, ph)| a * (std::f64::consts::TAU * (k * x + ph)).sin())
                .sum()
        };
        let lift = |x: f64| -> f64 {
            bump.iter()
                .map(|&(a, c)| a * (0.1 - periodic_distance(x, c, 1.0)).max(0.0) * 10.0)
                .sum()
        };
        let mut u = GridField::from_fn(1, n, 1.0, |x| wave(x[0])).unwrap();
        let mut w = GridField::from_fn(1, n, 1.0, |x| wave(x[0]) + lift(x[0])).unwrap();
        let slope = [&u, &w]
            .iter()
            .flat_map(|f| (0..n).map(move |i| (f.values[(i + 1) % n] - f.values[i]).abs() / f.dx()))
            .fold(0.0, f64::max);
        // |H_p| = 2|p|, with room for the slope to grow under the x-dependent source
        let theta = [1.2 * 2.0 * (2.0 * slope + 1.0), 0.0];
        let dt = 0.9 * u.dx() / theta[0];
        assert!(cfl_number(1, u.dx(), dt, theta) <= 0.9 + 1e-12);
        for _ in 0..steps {
            u = lf_step(&u, &model, dt, theta).unwrap();
            w = lf_step(&w, &model, dt, theta).unwrap();
            let gap = w.values.iter().zip(&u.values).map(|(a, b)| a - b).fold(f64::INFINITY, f64::min);
            worst = worst.min(gap);
        }
    }
    report(
        9,
        worst >= -1e-12,
        start.elapsed(),
        30.0,
        format!("20 pairs x {steps} steps, min (w - u) = {worst:.3e} (>= -1e-12)"),
    )
}

fn json_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

#[test]
fn criterion_10_determinism() {
    let start = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for name in ["quadratic-corner-1d.toml", "time-coefficient-certified.toml", "time-coefficient-violated.toml", "exponential-corner-1d.toml"] {
        let mut cfg = ScenarioConfig::load(&config_path(name)).unwrap();
        cfg.grid.n = cfg.grid.n.min(200);
        cfg.time.t_end = cfg.time.t_end.min(1.0);
        cfg.checks.corollary_decay = false;
        let runs: Vec<Vec<(String, Vec<u8>)>> = [1, 4]
            .into_iter()
            .map(|k| {
                let out = tmp.path().join(format!("{name}-{k}"));
                with_workers(Some(k), || scenario::run_all(&cfg, &out, false)).unwrap().unwrap();
                json_files(&out)
            })
            .collect();
        let same = runs[0] == runs[1] && runs[0].len() >= 3;
        ok &= same;
        parts.push(format!(
            "{name}: {} JSON files {}",
            runs[0].len(),
            if same { "identical" } else { "differ" }
        ));
    }
    report(10, ok, start.elapsed(), 120.0, parts.join("; "))
}
