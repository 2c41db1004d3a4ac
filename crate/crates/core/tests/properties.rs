//! Randomized properties of the structure functions, the transform and the scheme.

use hjlab::coeffs::{MatrixFn, ScalarFn, Vec2};
use hjlab::hamiltonians::{
    check_derivatives, make_exponential, make_log_growth, make_power_norm, make_scalar_coefficient,
    HamiltonianModel, PowerNormModel,
};
use hjlab::sampling::SampleBox;
use hjlab::solver::{solve, GridField, SolveOptions, ThetaPolicy};
use hjlab::structure::{build_profile, PhiFunction, StructureProfile};
use hjlab::transform::{u_to_v, v_to_u};
use proptest::prelude::*;
use std::f64::consts::{E, LN_2, TAU};
use std::sync::OnceLock;

fn profiles() -> &'static [(&'static str, StructureProfile)] {
    static P: OnceLock<Vec<(&'static str, StructureProfile)>> = OnceLock::new();
    P.get_or_init(|| {
        vec![
            ("linear", build_profile(PhiFunction::linear(1.0), 0.0).unwrap()),
            ("exponential", build_profile(PhiFunction::exponential_model(), E).unwrap()),
            ("log-growth", build_profile(PhiFunction::log_growth(), LN_2).unwrap()),
        ]
    })
}

fn profile(name: &str) -> &'static StructureProfile {
    &profiles().iter().find(|(n, _)| *n == name).unwrap().1
}

/// `lambda psi(tau) - psi(lambda tau)`, or `None` when `lambda tau` is below
/// the domain of `psi`.
fn sublinearity_excess(p: &StructureProfile, lambda: f64, tau: f64) -> Option<f64> {
    if lambda * tau < p.psi_lower() {
        return None;
    }
    Some(lambda * p.psi(tau).unwrap() - p.psi(lambda * tau).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn psi_is_sublinear_for_linear_phi(lambda in 0.0..=1.0f64, log_tau in -3.0..3.0f64) {
        let p = profile("linear");
        if let Some(e) = sublinearity_excess(p, lambda, 10f64.powf(log_tau)) {
            prop_assert!(e <= 1e-10, "excess {e}");
        }
    }

    #[test]
    fn psi_is_sublinear_for_exponential_phi(lambda in 0.0..=1.0f64, log_tau in 1.0..4.0f64) {
        let p = profile("exponential");
        if let Some(e) = sublinearity_excess(p, lambda, 10f64.powf(log_tau)) {
            prop_assert!(e <= 1e-10, "excess {e}");
        }
    }

    #[test]
    fn eta_inverts_f(name in prop::sample::select(vec!["linear", "exponential", "log-growth"]), u in 0.0..1.0f64) {
        let p = profile(name);
        let c0 = p.phi().c0;
        let hi = p.f(c0 + 1e-3).unwrap().min(1e6);
        let s = 1e-3 + (hi - 1e-3) * u;
        let eta = p.eta(s).unwrap();
        prop_assert!((p.f(eta).unwrap() - s).abs() <= 1e-8 * (1.0 + s));
    }

    #[test]
    fn transform_round_trip_and_order(
        base in prop::collection::vec(0.0..30.0f64, 16..64),
        lift in prop::collection::vec(0.0..5.0f64, 64),
    ) {
        let n = base.len();
        let u = GridField::new(1, n, 1.0, 0.0, base.clone()).unwrap();
        let w = GridField::new(1, n, 1.0, 0.0, base.iter().zip(&lift).map(|(a, b)| a + b).collect()).unwrap();
        let vu = u_to_v(&u).unwrap();
        let vw = u_to_v(&w).unwrap();
        let back = v_to_u(&vu).unwrap();
        for k in 0..n {
            prop_assert!((back.values[k] - u.values[k]).abs() <= 1e-12);
            prop_assert!((-1.0..0.0).contains(&vu.values[k]));
            prop_assert!(vu.values[k] <= vw.values[k]);
        }
    }

    #[test]
    fn power_norm_homogeneity(m in 1.2..4.0f64, a0 in 0.5..2.0f64, a1 in 0.5..2.0f64, p0 in -20.0..20.0f64, p1 in -20.0..20.0f64) {
        let mut params = PowerNormModel::new(m, 2);
        params.a = MatrixFn::Diag { d0: ScalarFn::constant(a0), d1: ScalarFn::constant(a1) };
        params.f = ScalarFn::constant(1.5);
        let model = make_power_norm(params).unwrap();
        let (x, p) = (Vec2::new(0.3, -0.2), Vec2::new(p0, p1));
        prop_assume!(p.norm() > 1e-3);
        let gap = model.legendre_gap(&x, 0.5, &p);
        let ap = Vec2::new(a0 * p0, a1 * p1).norm();
        let want = (m - 1.0) * ap.powf(m) + 1.5;
        prop_assert!((gap - want).abs() <= 1e-12 * want.max(1.0), "{gap} vs {want}");
    }
}

/// Finds the worst sublinearity excess for the log-growth phi on a grid.
#[test]
fn psi_sublinearity_fails_for_log_growth() {
    // phi(s)/s decreases for this phi, so psi(tau)/tau increases and the
    // inequality cannot hold; the check must expose that
    let p = profile("log-growth");
    let worst = (1..=40)
        .flat_map(|i| (1..20).map(move |j| (j as f64 / 20.0, 10f64.powf(i as f64 / 10.0))))
        .filter_map(|(l, t)| sublinearity_excess(p, l, t))
        .fold(f64::NEG_INFINITY, f64::max);
    assert!(worst > 1e-6, "worst excess {worst}");
}

fn builtin_models() -> Vec<HamiltonianModel> {
    let wave = |amp| ScalarFn::Sum {
        terms: vec![
            ScalarFn::constant(1.5),
            ScalarFn::Sine { amp, freq: 1.0, axis: 0, phase: 0.0 },
        ],
    };
    let mut pn = PowerNormModel::new(3.0, 2);
    pn.a = MatrixFn::Scalar { value: wave(0.3) };
    pn.f = wave(0.5);
    vec![
        make_power_norm(pn).unwrap(),
        make_scalar_coefficient(
            2.0,
            1,
            ScalarFn::Product { factors: vec![wave(0.5), ScalarFn::Sum { terms: vec![ScalarFn::constant(1.0), ScalarFn::Time { coef: 1.0 }] }] },
        )
        .unwrap(),
        make_exponential(2).unwrap(),
        make_log_growth(2).unwrap(),
    ]
}

#[test]
fn analytic_derivatives_match_finite_differences() {
    let bx = SampleBox::default().with_p_radius(5.0);
    for model in builtin_models() {
        let r = check_derivatives(&model, &bx, 1000, 3);
        assert!(r.samples >= 900, "{}: {} samples", model.name, r.samples);
        assert!(r.worst() < 1e-5, "{}: {r:?}", model.name);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn solve_preserves_order(
        amps in prop::collection::vec(-0.2..0.2f64, 3),
        lift in 0.0..0.5f64,
        center in 0.0..1.0f64,
    ) {
        let mut params = PowerNormModel::new(2.0, 1);
        params.f = ScalarFn::Sum {
            terms: vec![ScalarFn::constant(1.5), ScalarFn::Sine { amp: 0.5, freq: 1.0, axis: 0, phase: 0.0 }],
        };
        let model = make_power_norm(params).unwrap();
        let wave = |x: f64| -> f64 { amps.iter().enumerate().map(|(k, a)| a * (TAU * (k + 1) as f64 * x).sin()).sum() };
        let bump = |x: f64| lift * (1.0 - 4.0 * (x - center).abs()).max(0.0);
        let u0 = GridField::from_fn(1, 96, 1.0, |x| wave(x[0])).unwrap();
        let w0 = GridField::from_fn(1, 96, 1.0, |x| wave(x[0]) + bump(x[0])).unwrap();
        let slope = [&u0, &w0]
            .iter()
            .flat_map(|f| (0..f.n).map(move |i| (f.values[(i + 1) % f.n] - f.values[i]).abs() / f.dx()))
            .fold(0.0, f64::max);
        // monotone only while theta bounds |H_p| = 2|p| over the differences that occur
        let theta = 1.2 * 2.0 * (2.0 * slope + 1.0);
        let opts = SolveOptions { theta: ThetaPolicy::Fixed { theta }, normalize: false, ..Default::default() };
        let tu = solve(&model, &u0, 0.3, &opts).unwrap();
        let tw = solve(&model, &w0, 0.3, &opts).unwrap();
        prop_assert_eq!(tu.len(), tw.len());
        for (a, b) in tu.fields.iter().zip(&tw.fields) {
            for (x, y) in a.values.iter().zip(&b.values) {
                prop_assert!(x <= &(y + 1e-12));
            }
        }
    }
}
