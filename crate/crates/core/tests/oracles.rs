use approx::assert_abs_diff_eq;
use vsbbm_core::engine::{sample_max, simulate, SimSpec};
use vsbbm_core::fkpp::{solve_max_law, FkppSolver, GridSpec, InitialCondition};
use vsbbm_core::numerics::{ks_one_sample, normal_upper_tail};
use vsbbm_core::oracle::{bridge_stay_below, many_to_one_level_count};
use vsbbm_core::rng::replicate_key;
use vsbbm_core::{BranchingLaw, Sign, SpeedProfile};

fn profiles(t: f64) -> Vec<SpeedProfile> {
    vec![
        SpeedProfile::homogeneous(t).unwrap(),
        SpeedProfile::two_speed(Sign::Plus, 0.3, t).unwrap(),
        SpeedProfile::two_speed(Sign::Minus, 0.3, t).unwrap(),
    ]
}

#[test]
fn bridge_matches_reflection_formula() {
    for &(a, b, t) in &[(1.0, 1.0, 1.0), (0.5, 2.0, 3.0), (3.0, 0.1, 10.0)] {
        let expected = 1.0 - f64::exp(-2.0 * a * b / t);
        assert_abs_diff_eq!(bridge_stay_below(a, b, t).unwrap(), expected, epsilon = 1e-15);
    }
}

#[test]
fn level_count_is_exponential_growth_times_gaussian_tail() {
    let h = SpeedProfile::homogeneous(8.0).unwrap();
    for &(s, a) in &[(1.0f64, 0.0), (4.0, 2.0), (8.0, 11.0)] {
        let expected = s.exp() * normal_upper_tail(a / s.sqrt());
        assert_abs_diff_eq!(many_to_one_level_count(&h, s, a).unwrap(), expected, epsilon = 1e-12 * expected);
    }
}

#[test]
fn heat_flow_is_a_gaussian_tail_for_every_profile() {
    // Total variance at the horizon equals the horizon for every profile.
    let t = 6.0;
    for profile in profiles(t) {
        let grid = GridSpec::default().with_dx(0.02);
        let mut solver = FkppSolver::heat(profile, &InitialCondition::Heaviside, grid).unwrap();
        solver.advance_to(t).unwrap();
        for &x in &[-3.0, -1.0, 0.5, 2.0, 4.0] {
            let expected = normal_upper_tail(x / t.sqrt());
            let got = solver.field().value_at(x);
            assert!((got - expected).abs() < 2e-3, "{}: u({x}) = {got} vs {expected}", profile.label());
        }
    }
}

#[test]
fn simulated_maximum_follows_the_pde_law() {
    let t = 3.0;
    let law = BranchingLaw::binary();
    for profile in profiles(t) {
        let (field, _) = solve_max_law(profile, &law, &InitialCondition::Heaviside, GridSpec::default(), &[]).unwrap();
        let spec = SimSpec::new(profile, law.clone());
        let maxima: Vec<f64> = (0..4000)
            .map(|i| sample_max(&simulate(&spec, replicate_key(5, i), |_| ()).unwrap().0).unwrap())
            .collect();
        let ks = ks_one_sample(&maxima, |x| field.max_cdf(x));
        // 1.63 / sqrt(n) is the 1% critical value.
        assert!(ks < 1.63 / 4000f64.sqrt(), "{}: KS {ks}", profile.label());
    }
}
