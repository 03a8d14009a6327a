use proptest::prelude::*;

use svmart::classify::{phi_perpetual, PhiVerdict};
use svmart::model::GridPolicy;
use svmart::report::{emit_estimates, emit_martingale, parse_estimates, parse_martingale};
use svmart::tables::{
    heston_at, hull_white_at, schobel_zhu_at, three_halves_at, HESTON_ALPHAS, HESTON_GAMMAS, HW_ALPHAS, HW_GAMMAS,
    SZ_ALPHAS, THREE_HALVES_AS,
};
use svmart::*;

fn canonical() -> impl Strategy<Value = CanonicalParams> {
    let rho = -0.95..0.95f64;
    prop_oneof![
        (0.1..3.0f64, 0.05..2.0f64, 0.2..3.0f64, rho.clone())
            .prop_map(|(kappa, theta, xi, rho)| CanonicalParams::Heston { kappa, theta, xi, rho }),
        (0.1..2.0f64, -2.0..2.0f64, 0.2..3.0f64, rho.clone())
            .prop_map(|(omega, theta, xi, rho)| CanonicalParams::ThreeHalves { omega, theta, xi, rho }),
        (0.1..3.0f64, 0.1..2.0f64, 0.2..2.0f64, rho.clone(), any::<bool>()).prop_map(|(kappa, theta, gamma, rho, half)| {
            let support = if half { SzSupport::HalfLine } else { SzSupport::RealLine };
            CanonicalParams::SchobelZhu { kappa, theta, gamma, rho, support }
        }),
        (0.05..2.0f64, 0.2..3.0f64, rho).prop_map(|(mu, sigma, rho)| CanonicalParams::HullWhite { mu, sigma, rho }),
    ]
}

fn table_grid() -> Vec<CanonicalParams> {
    let mut out = Vec::new();
    for &a in &HESTON_ALPHAS {
        for &g in &HESTON_GAMMAS {
            out.push(heston_at(a, g));
        }
    }
    for &a in &THREE_HALVES_AS {
        for rho in [-0.5, 0.0, 0.5] {
            out.push(three_halves_at(a, rho));
        }
    }
    for &a in &SZ_ALPHAS {
        out.push(schobel_zhu_at(a, SzSupport::HalfLine));
        out.push(schobel_zhu_at(a, SzSupport::RealLine));
    }
    for &a in &HW_ALPHAS {
        for &g in &HW_GAMMAS {
            out.push(hull_white_at(a, g));
        }
    }
    out
}

fn power_exp(alpha: f64, gamma: f64) -> impl Fn(f64) -> f64 {
    move |y: f64| y.powf(-alpha) * (gamma * y).exp()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn tilde_with_zero_rho_is_pointwise_identity(p in canonical()) {
        let spec = builtin(&p).unwrap().with_rho(0.0).unwrap();
        let t = tilde(&spec);
        for x in spec.sample_grid(40) {
            prop_assert_eq!(t.mu(x).to_bits(), spec.mu(x).to_bits());
            prop_assert_eq!(t.sigma(x).to_bits(), spec.sigma(x).to_bits());
        }
    }

    #[test]
    fn tilde_twice_adds_twice_the_shift(p in canonical()) {
        let spec = builtin(&p).unwrap();
        let tt = tilde(&tilde(&spec));
        for x in spec.sample_grid(40) {
            let want = spec.mu(x) + 2.0 * spec.rho() * spec.b(x) * spec.sigma(x);
            prop_assert!((tt.mu(x) - want).abs() <= 1e-12 * want.abs().max(1.0), "x {} got {} want {}", x, tt.mu(x), want);
        }
    }

    #[test]
    fn builtins_pass_their_conditions(p in canonical()) {
        let r = check_conditions(&builtin(&p).unwrap(), &GridPolicy::default()).unwrap();
        prop_assert_eq!(r.all_hold(), Tri::Yes);
    }

    #[test]
    fn scale_is_strictly_increasing(p in canonical()) {
        let spec = builtin(&p).unwrap();
        // Stay off the outermost probes, where s saturates at float resolution,
        // and skip points where s itself leaves the f64 range.
        let (grid, s): (Vec<f64>, Vec<f64>) = spec
            .sample_grid(12)
            .into_iter()
            .filter(|x| x.abs() < 50.0 && x.abs() > 0.02)
            .filter_map(|x| scale_function(&spec, x).ok().filter(|v| v.is_finite()).map(|v| (x, v)))
            .unzip();
        prop_assert!(grid.len() >= 4, "only {} usable points", grid.len());
        // Strict growth comes from s′ > 0; once s has converged the quadrature
        // can only promise order up to its 1e-12 relative tolerance.
        for &x in &grid {
            prop_assert!(scale_density(&spec, x).unwrap() > 0.0, "s′({}) is not positive", x);
        }
        for (w, x) in s.windows(2).zip(grid.windows(2)) {
            let slack = 1e-12 * w[0].abs().max(w[1].abs());
            prop_assert!(w[1] - w[0] >= -slack, "s({}) = {} !< s({}) = {}", x[0], w[0], x[1], w[1]);
        }
    }

    #[test]
    fn zero_rho_tilde_profile_is_the_original(p in canonical()) {
        let spec = builtin(&p).unwrap().with_rho(0.0).unwrap();
        let o = boundary_profile(&spec, Measure::Original).unwrap();
        let t = boundary_profile(&spec, Measure::Tilde).unwrap();
        prop_assert!(o.same_kinds(&t), "differs on {:?}", o.differing_fields(&t));
    }

    #[test]
    fn unit_exponent_makes_v_and_vb_agree(
        kappa in 0.2..3.0f64,
        theta in -2.0..2.0f64,
        sigma in 0.3..3.0f64,
        rho in -0.9..0.9f64,
    ) {
        let ou = DiffusionSpec::from_fns(
            move |x| kappa * (theta - x), move |_| sigma, |_| 1.0, (f64::NEG_INFINITY, f64::INFINITY), 0.5, rho,
        ).unwrap();
        let cir = DiffusionSpec::from_fns(
            move |x| kappa * (theta.abs() + 0.1 - x), move |x: f64| sigma * x.sqrt(), |_| 1.0, (0.0, f64::INFINITY), 1.0, rho,
        ).unwrap();
        for spec in [ou, cir] {
            for m in [Measure::Original, Measure::Tilde] {
                let p = boundary_profile(&spec, m).unwrap();
                prop_assert!(p.v_left.same_kind(&p.vb_left), "{:?} left {:?} vs {:?}", m, p.v_left, p.vb_left);
                prop_assert!(p.v_right.same_kind(&p.vb_right), "{:?} right {:?} vs {:?}", m, p.v_right, p.vb_right);
            }
        }
    }

    #[test]
    fn expression_heston_matches_builtin(
        kappa in 0.2..3.0f64,
        theta in 0.1..2.0f64,
        xi in 0.3..3.0f64,
        rho in -0.9..0.9f64,
    ) {
        let src = format!(
            "drift = \"{kappa} * ({theta} - x)\"\ndiffusion = \"{xi} * sqrt(x)\"\nexponent = \"sqrt(x)\"\n\
             lower = 0\nupper = \"inf\"\nstart = 1\nrho = {rho}\n"
        );
        let expr = config::parse_model_file(&src).unwrap().spec;
        let native = builtin(&CanonicalParams::Heston { kappa, theta, xi, rho }).unwrap();
        let (a, b) = (full_report(&expr), full_report(&native));
        prop_assert_eq!(a.verdicts(), b.verdicts());
        prop_assert!(a.profile_original.same_kinds(&b.profile_original));
        prop_assert!(a.profile_tilde.same_kinds(&b.profile_tilde));
    }

    #[test]
    fn report_round_trips(p in canonical()) {
        let r = full_report(&builtin(&p).unwrap());
        prop_assert_eq!(parse_martingale(&emit_martingale(&r)).unwrap(), r);
    }

    #[test]
    fn estimate_round_trips(seed in any::<u64>(), paths in 1u64..200, antithetic in any::<bool>()) {
        let spec = builtin(&CanonicalParams::Heston { kappa: 1.0, theta: 1.0, xi: 2.0, rho: 0.5 }).unwrap();
        let cfg = McConfig { seed, path_count: paths, dt: 1e-2, antithetic, ..McConfig::default() };
        let es = vec![estimate_ez(&spec, &cfg).unwrap(), estimate_phi(&spec, &cfg).unwrap()];
        prop_assert_eq!(parse_estimates(&emit_estimates(&es)).unwrap(), es);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, failure_persistence: None, ..ProptestConfig::default() })]

    // On [c, ∞) with c ≥ 1, y^{-α}e^{γy} ≤ y^{-α'}e^{γ'y} whenever α ≥ α' and γ ≤ γ'.
    #[test]
    fn dominated_integrand_is_never_infinite_when_the_bound_is_finite(
        alpha in -1.0..3.0f64,
        gamma in -2.0..0.5f64,
        da in 0.0..1.0f64,
        dg in 0.0..1.0f64,
        c in 1.0..4.0f64,
    ) {
        let policy = ProbePolicy::default();
        let g = classify_improper(power_exp(alpha, gamma), c, Boundary::Right(f64::INFINITY), &policy).unwrap();
        let f = classify_improper(power_exp(alpha + da, gamma - dg), c, Boundary::Right(f64::INFINITY), &policy).unwrap();
        prop_assert!(!(g.is_finite() && f.is_infinite()), "g {:?} f {:?}", g, f);
    }

    // On (0, c] with c ≤ 1 the roles flip for α: y^{-α} grows with α.
    #[test]
    fn dominated_integrand_at_zero(
        alpha in -1.0..3.0f64,
        gamma in -2.0..2.0f64,
        da in 0.0..1.0f64,
        dg in 0.0..1.0f64,
        c in 0.2..1.0f64,
    ) {
        let policy = ProbePolicy::default();
        let g = classify_improper(power_exp(alpha, gamma), c, Boundary::Left(0.0), &policy).unwrap();
        let f = classify_improper(power_exp(alpha - da, gamma - dg), c, Boundary::Left(0.0), &policy).unwrap();
        prop_assert!(!(g.is_finite() && f.is_infinite()), "g {:?} f {:?}", g, f);
    }

    #[test]
    fn anchor_does_not_change_the_corpus_verdict(
        alpha in -1.0..3.0f64,
        gamma in -2.0..2.0f64,
        c1 in 0.2..5.0f64,
        c2 in 0.2..5.0f64,
    ) {
        prop_assume!((alpha - 1.0).abs() >= 0.05 && gamma.abs() >= 0.05);
        let policy = ProbePolicy::default();
        for boundary in [Boundary::Left(0.0), Boundary::Right(f64::INFINITY)] {
            let a = classify_improper(power_exp(alpha, gamma), c1, boundary, &policy).unwrap();
            let b = classify_improper(power_exp(alpha, gamma), c2, boundary, &policy).unwrap();
            if a.is_inconclusive() || b.is_inconclusive() {
                continue;
            }
            prop_assert!(a.same_kind(&b), "{:?}: c={} {:?} vs c={} {:?}", boundary, c1, a, c2, b);
        }
    }
}

#[test]
fn profile_consistency_on_the_table_grids() {
    for p in table_grid() {
        let spec = builtin(&p).unwrap();
        for m in [Measure::Original, Measure::Tilde] {
            let profile = boundary_profile(&spec, m).unwrap();
            assert!(profile.consistency().is_ok(), "{p:?} {m:?}: {:?}", profile.consistency());
        }
    }
}

#[test]
fn ui_implies_martingale_on_the_table_grids() {
    for p in table_grid() {
        let r = full_report(&builtin(&p).unwrap());
        assert!(!(r.ui_martingale == Tri::Yes && r.true_martingale != Tri::Yes), "{p:?}: {r:?}");
    }
}

/// The finiteness table of the perpetual functional, keyed on
/// `(s_left, s_right, vb_left, vb_right)` finiteness.
fn perpetual_table(sl: bool, sr: bool, bl: bool, br: bool) -> PhiVerdict {
    use PhiVerdict::*;
    match (sl, sr, bl, br) {
        (false, false, false, false) => AsInfinite,
        (false, true, false, false) => AsInfinite,
        (false, true, false, true) => AsFinite,
        (true, false, false, false) => AsInfinite,
        (true, false, true, false) => AsFinite,
        (true, true, false, false) => AsInfinite,
        (true, true, false, true) => Mixed,
        (true, true, true, false) => Mixed,
        (true, true, true, true) => AsFinite,
        _ => unreachable!("not a realizable row"),
    }
}

#[test]
fn perpetual_rule_reproduces_the_table_on_every_definite_profile() {
    let fin = |b: bool| if b { Finiteness::FINITE } else { Finiteness::INFINITE };
    let mut realizable = 0;
    for bits in 0u32..64 {
        let f: [bool; 6] = std::array::from_fn(|i| bits >> i & 1 == 1);
        let [sl, sr, vl, vr, bl, br] = f;
        let profile = BoundaryProfile::from_fields(Measure::Original, f.map(fin));
        let consistent = (sl || (!vl && !bl)) && (sr || (!vr && !br));
        let got = phi_perpetual(&profile);
        if consistent {
            realizable += 1;
            assert_eq!(got, perpetual_table(sl, sr, bl, br), "profile {f:?}");
        } else {
            assert!(profile.consistency().is_err(), "profile {f:?}");
            assert_eq!(got, PhiVerdict::Inconclusive, "profile {f:?}");
        }
    }
    // Per side: four (v, v_b) choices when s is finite, one when it is not.
    assert_eq!(realizable, 25);
}

#[test]
fn martingale_verdicts_keep_the_sample_mean_below_one() {
    let policy = GridPolicy::default();
    let cfg = McConfig { path_count: 4000, dt: 5e-3, seed: 7, ..McConfig::default() };
    let mut checked = 0;
    for p in table_grid().into_iter().step_by(3) {
        let spec = builtin(&p).unwrap();
        if martingale(&spec).unwrap() != Tri::Yes || check_conditions(&spec, &policy).unwrap().all_hold() != Tri::Yes {
            continue;
        }
        let e = estimate_ez(&spec, &cfg).unwrap();
        assert!(e.mean <= 1.0 + 5.0 * e.standard_error, "{p:?}: mean {} se {}", e.mean, e.standard_error);
        checked += 1;
    }
    assert!(checked >= 5, "only {checked} martingale points");
}
