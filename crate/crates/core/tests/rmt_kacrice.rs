use nalgebra::DMatrix;
use proptest::prelude::*;

use pspin_complexity::kacrice::{self, QuadSpec};
use pspin_complexity::potential::{presets, Potential};
use pspin_complexity::rmt;

const SEED: u64 = 11;

fn potentials() -> Vec<Potential> {
    vec![presets::sextic_mixed(), presets::quartic(), presets::quartic_sextic_p3(), presets::sextic_p4()]
}

fn point(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0..3.0f64, n).prop_filter("nonzero", |s| s.iter().all(|x| x.abs() > 1e-2))
}

#[test]
fn largest_eigenvalue_near_edge() {
    let spectra = rmt::sample_spectra(&vec![0.0; 2000], 20, SEED).unwrap();
    let mean = spectra.iter().map(|s| s.iter().cloned().fold(f64::MIN, f64::max)).sum::<f64>() / 20.0;
    assert!((1.9..=2.05).contains(&mean), "mean top eigenvalue {mean}");
}

#[test]
fn operator_norm_tail_is_empty() {
    let spectra = rmt::sample_spectra(&vec![0.0; 50], 10_000, SEED).unwrap();
    let big = spectra.iter().filter(|s| s.iter().any(|l| l.abs() >= 8.0)).count();
    assert_eq!(big, 0);
}

#[test]
fn top_eigenvector_is_delocalised() {
    let spread = (0..1000u64)
        .filter(|&k| {
            let g = rmt::sample_goe(200, 200, SEED.wrapping_mul(1000).wrapping_add(k)).unwrap();
            let (_, v) = rmt::top_eigenpair(&g);
            v.iter().map(|x| x.abs()).fold(0.0, f64::max) < 0.5
        })
        .count();
    assert!(spread >= 990, "{spread} of 1000");
}

#[test]
fn trace_of_square_mean() {
    let n = 20;
    let traces: Vec<f64> = (0..10_000u64)
        .map(|k| {
            let g = rmt::sample_goe(n, n, SEED + k).unwrap().matrix;
            g.iter().map(|x| x * x).sum()
        })
        .collect();
    let mean = traces.iter().sum::<f64>() / traces.len() as f64;
    let var = traces.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (traces.len() - 1) as f64;
    let se = (var / traces.len() as f64).sqrt();
    assert!((mean - (n as f64 + 1.0)).abs() <= 3.0 * se, "{mean} +- {se}");
}

#[test]
fn wegner_counts_scale_linearly() {
    let fit = rmt::wegner_scaling(&vec![0.0; 500], 0.0, &[2e-1, 2e-2, 2e-3], 400, SEED).unwrap();
    assert!(fit.constant <= 5.0, "{fit:?}");
    assert!((fit.slope - 1.0).abs() <= 0.2, "{fit:?}");
    for pair in fit.reports.windows(2) {
        let ratio = pair[0].mean_count / pair[1].mean_count;
        assert!((5.0..=20.0).contains(&ratio), "count ratio {ratio} for a tenfold width change");
    }
    let narrow = &fit.reports[2];
    assert!(narrow.mean_count <= fit.constant * 500.0 * 2e-3 + 1e-12);
}

#[test]
fn large_mean_determinant_bound() {
    let mean = DMatrix::from_row_slice(3, 3, &[12.0, 1.0, 0.0, 1.0, 11.0, 0.5, 0.0, 0.5, 14.0]);
    let eig = mean.clone().symmetric_eigenvalues();
    assert!(eig.iter().all(|l| *l >= 10.0));
    let draws = kacrice::abs_det_draws(&mean, 4, 2000, SEED);
    let avg = draws.iter().sum::<f64>() / draws.len() as f64;
    let floor: f64 = eig.iter().map(|l| l - 9.0).product();
    assert!(avg >= floor, "{avg} < {floor}");
}

#[test]
fn folded_normal_at_three() {
    let m = 3.0;
    let closed = kacrice::folded_normal_mean(m, 1.0);
    assert!((closed - 3.000_764).abs() < 1e-6);
    let draws = kacrice::abs_det_draws(&DMatrix::from_element(1, 1, m), 2, 20_000, SEED);
    let avg = draws.iter().sum::<f64>() / draws.len() as f64;
    let se = (draws.iter().map(|d| (d - avg).powi(2)).sum::<f64>() / (draws.len() - 1) as f64 / draws.len() as f64).sqrt();
    assert!((avg - closed).abs() <= 3.0 * se);
}

#[test]
fn kac_rice_decreases_to_zero() {
    let v = presets::quartic();
    let values: Vec<f64> = [0.0, 0.5, 1.0, 2.0, 4.0, 8.0]
        .iter()
        .map(|&u| kacrice::expected_crt(2, &v, u, &QuadSpec::default(), SEED).unwrap().value)
        .collect();
    assert!(values.windows(2).all(|w| w[1] < w[0]), "{values:?}");
    assert!(*values.last().unwrap() < 1e-6, "{values:?}");
}

#[test]
fn radial_slice_rate_near_origin() {
    for v in [presets::quartic(), presets::sextic_mixed()] {
        let rate = v.q1 - v.p as f64 - 1.0;
        for n in [2, 3] {
            let spec = QuadSpec { mc_samples: 20_000, ..QuadSpec::default() };
            let a = kacrice::radial_slice(n, &v, 1e-3, &spec, SEED).unwrap();
            let b = kacrice::radial_slice(n, &v, 1e-2, &spec, SEED).unwrap();
            let slope = (b / a).log10();
            assert!((slope - rate).abs() <= 0.05, "N = {n}: slope {slope}, expected {rate}");
        }
    }
}

#[test]
fn origin_is_the_only_critical_point_without_coupling() {
    for v in potentials().into_iter().filter(|v| v.p == 2) {
        for n in [1, 2] {
            let c = kacrice::count_critical_points(&DMatrix::zeros(n, n), &v, 0.0).unwrap();
            assert_eq!((c.total, c.above_level), (1, 0));
        }
    }
}

#[test]
fn scalar_count_matches_explicit_roots() {
    let v = presets::quartic();
    for g in [-2.0, -0.1, 0.3, 1.7] {
        let c = kacrice::count_critical_points(&DMatrix::from_element(1, 1, g), &v, 0.0).unwrap();
        assert_eq!(c.total, if g > 0.0 { 3 } else { 1 }, "g = {g}");
    }
}

#[test]
fn covariance_examples_at_three_points() {
    let v = presets::quartic_sextic_p3();
    let samples = 20_000;
    for (k, sigma) in [[0.4, -0.8, 1.1], [1.0, 1.0, 1.0], [-0.3, 0.2, 0.9]].iter().enumerate() {
        let r = kacrice::covariance_test(sigma, &v, samples, SEED + k as u64).unwrap();
        assert!(r.var_h_rel_error <= 15.0 / (samples as f64).sqrt(), "{}", r.var_h_rel_error);
        assert!(r.residual_ratio <= 1e-2);
        for e in r.entries.iter().filter(|e| e.name.starts_with("E[d2H")) {
            assert!(e.z.abs() <= 4.0, "{e:?}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn integrand_structure(sigma in point(3), which in 0usize..4) {
        let v = &potentials()[which];
        let p = kacrice::integrand(&sigma, v).unwrap();
        prop_assert!(p.inner > 0.0);
        prop_assert!(p.f_n >= p.gradient_term * (1.0 - 1e-12));
        prop_assert!(p.f_n <= v.p as f64 * p.gradient_term * (1.0 + 1e-12));
    }

    #[test]
    fn spectral_floor_holds(sigma in point(4), which in 0usize..4) {
        let v = &potentials()[which];
        let m = kacrice::build_hessian_model(&sigma, v, None).unwrap();
        let lowest = kacrice::smallest_eigenvalue(&m.mean_part);
        prop_assert!(lowest >= kacrice::spectral_floor(&sigma, v) - 1e-9 * (1.0 + lowest.abs()));
    }

    #[test]
    fn completion_choice_does_not_matter(sigma in point(4), which in 0usize..4) {
        let v = &potentials()[which];
        let spectra: Vec<Vec<f64>> = (0..4)
            .map(|pivot| {
                let m = kacrice::build_hessian_model_with_pivot(&sigma, v, None, pivot).unwrap();
                let gram = m.basis.transpose() * &m.basis;
                assert!((gram - DMatrix::identity(3, 3)).amax() <= 1e-12);
                let along = m.basis.transpose() * nalgebra::DVector::from_column_slice(&sigma);
                assert!(along.amax() <= 1e-12 * nalgebra::DVector::from_column_slice(&sigma).norm().max(1.0));
                let mut e: Vec<f64> = m.mean_part.symmetric_eigenvalues().iter().copied().collect();
                e.sort_by(f64::total_cmp);
                e
            })
            .collect();
        for s in &spectra[1..] {
            for (a, b) in s.iter().zip(&spectra[0]) {
                prop_assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()));
            }
        }
    }

    #[test]
    fn level_set_contains_outer_shell(sigma in point(3), u in 0.01..20.0f64, stretch in 1.0..3.0f64, which in 0usize..4) {
        let v = &potentials()[which];
        let radius = kacrice::level_radius(v, u);
        let norm = (sigma.iter().map(|x| x * x).sum::<f64>() / 3.0).sqrt();
        let scaled: Vec<f64> = sigma.iter().map(|x| x * stretch * radius / norm).collect();
        let p = kacrice::integrand(&scaled, v).unwrap();
        prop_assert!(p.omega_membership >= u * (1.0 - 1e-12), "{} < {u}", p.omega_membership);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn determinant_reduction_holds(sigma in point(3), which in 0usize..4) {
        let v = &potentials()[which];
        let r = kacrice::determinant_reduction(&sigma, v, 40_000, SEED).unwrap();
        prop_assert!(r.z_score().abs() <= 3.0, "{r:?}");
    }
}
