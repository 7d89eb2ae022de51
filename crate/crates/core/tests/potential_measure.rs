use proptest::prelude::*;

use pspin_complexity::measure::{curvature_pushforward, GridMeasure, Moments};
use pspin_complexity::potential::{presets, Potential};

fn presets_all() -> Vec<Potential> {
    vec![presets::sextic_mixed(), presets::quartic(), presets::quartic_sextic_p3(), presets::sextic_p4()]
}

fn central_differences(v: &Potential, x: f64) -> (f64, f64) {
    let h = 1e-5;
    let d1 = (v.value(x + h) - v.value(x - h)) / (2.0 * h);
    let d2 = (v.derivative(x + h) - v.derivative(x - h)) / (2.0 * h);
    (d1, d2)
}

fn random_measure(raw: &[f64]) -> GridMeasure {
    GridMeasure::from_unnormalized(4.0, raw.len(), raw.to_vec()).unwrap()
}

fn weights() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..1.0f64, 101).prop_filter("needs mass", |w| w.iter().sum::<f64>() > 1e-3)
}

#[test]
fn sextic_mixed_at_two_matches_differences() {
    let v = presets::sextic_mixed();
    let (_, d1, d2) = v.eval(2.0);
    let (f1, f2) = central_differences(&v, 2.0);
    assert!((d1 - f1).abs() <= 1e-6 * d1.abs());
    assert!((d2 - f2).abs() <= 1e-6 * d2.abs());
}

#[test]
fn validated_presets_satisfy_growth_on_grid() {
    for v in presets_all() {
        let report = v.validate_default().unwrap();
        assert!(report.passed, "{report:?}");
        let q2 = v.q_second();
        for k in 0..4000 {
            let x = 10f64.powf(-6.0 + 9.0 * k as f64 / 3999.0);
            let (val, d1, d2) = v.eval(x);
            let first = x * d1 - v.q * val;
            let second = x * d2 - (q2 - 1.0) * d1;
            assert!(first >= -1e-12 * (x * d1.abs() + v.q * val.abs()), "x = {x}: {first}");
            assert!(second >= -1e-12 * (x * d2.abs() + (q2 - 1.0) * d1.abs()), "x = {x}: {second}");
        }
    }
}

#[test]
fn sum_of_positive_powers_passes() {
    let v = Potential::from_json_str(r#"{"terms":[[0.5,4],[2.0,5],[1.0,6]],"p":2,"q":4,"q1":4,"q2":6,"c_bound":80}"#).unwrap();
    assert!(v.validate_default().unwrap().passed);
}

#[test]
fn quadratic_rejected() {
    let v = Potential::from_json_str(r#"{"terms":[[1,2]],"p":2,"q":2,"q1":2,"q2":2,"c_bound":2}"#);
    assert!(v.is_err() || v.unwrap().validate_default().is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn derivatives_match_differences(x in prop_oneof![-5.0..-1e-3f64, 1e-3..5.0f64], which in 0usize..4) {
        let v = &presets_all()[which];
        let (_, d1, d2) = v.eval(x);
        let (f1, f2) = central_differences(v, x);
        prop_assert!((d1 - f1).abs() <= 1e-6 * d1.abs().max(1e-3));
        prop_assert!((d2 - f2).abs() <= 1e-6 * d2.abs().max(1e-3));
    }

    #[test]
    fn evenness_is_exact(x in -50.0..50.0f64, which in 0usize..4) {
        let v = &presets_all()[which];
        let (a, b, c) = v.eval(x);
        let (a2, b2, c2) = v.eval(-x);
        prop_assert_eq!(a, a2);
        prop_assert_eq!(b, -b2);
        prop_assert_eq!(c, c2);
    }

    #[test]
    fn dilation_scales_third_moment(raw in weights()) {
        let mu = random_measure(&raw);
        let lhs = mu.dilate(2.0).unwrap().moment(3.0);
        let rhs = 8.0 * mu.moment(3.0);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs().max(1e-300));
    }

    #[test]
    fn dilations_compose(raw in weights(), a in 0.2..3.0f64, b in 0.2..3.0f64) {
        let mu = random_measure(&raw);
        let two = mu.dilate(a).unwrap().dilate(b).unwrap();
        let one = mu.dilate(a * b).unwrap();
        for (x, y) in two.nodes().iter().zip(one.nodes()) {
            prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }
        prop_assert_eq!(two.weights(), one.weights());
    }

    #[test]
    fn mass_preserved(raw in weights(), a in 0.1..5.0f64, t in 0.0..2.0f64, which in 0usize..4) {
        let mu = random_measure(&raw);
        let total = |w: &[f64]| w.iter().sum::<f64>();
        prop_assert!((total(mu.dilate(a).unwrap().weights()) - 1.0).abs() <= 1e-12);
        let v = &presets_all()[which];
        let pushed = curvature_pushforward(&mu, v, t, f64::INFINITY).unwrap();
        prop_assert!((total(&pushed.masses) - 1.0).abs() <= 1e-12);
        let capped = curvature_pushforward(&mu, v, t, 10.0).unwrap();
        let bound = 10.0 / ((v.p * (v.p - 1)) as f64).sqrt();
        prop_assert!(capped.locations.iter().all(|&x| (0.0..=bound).contains(&x)));
    }

    #[test]
    fn moments_increase_in_order(raw in weights()) {
        let mu = random_measure(&raw);
        let norms: Vec<f64> = [1.0, 2.0, 4.0].iter().map(|&s| mu.moment(s).powf(1.0 / s)).collect();
        prop_assert!(norms[0] <= norms[1] * (1.0 + 1e-12));
        prop_assert!(norms[1] <= norms[2] * (1.0 + 1e-12));
    }

    #[test]
    fn divergence_nonnegative(raw in weights(), scale in 0.05..3.0f64) {
        let mu = random_measure(&raw);
        prop_assert!(mu.kl_divergence() >= -1e-9);
        let g = GridMeasure::gaussian(8.0, 801, scale).unwrap();
        prop_assert!(g.kl_divergence() >= -1e-9);
    }
}
