use pspin_complexity::functional;
use pspin_complexity::measure::GridMeasure;
use pspin_complexity::optimizer::{self, SolverConfig};
use pspin_complexity::potential::presets;

#[test]
fn curve_invariants_on_sextic_mixed() {
    let v = presets::sextic_mixed();
    let config = SolverConfig { seed: 5, ..SolverConfig::default() };
    let levels = [0.0, 0.5, 1.0, 2.0, 4.0];
    let curve = optimizer::sigma_curve(&v, &levels, &config).unwrap();
    for pair in curve.windows(2) {
        assert!(pair[1].sigma <= pair[0].sigma + 1e-6, "{} then {}", pair[0].sigma, pair[1].sigma);
    }
    for r in &curve {
        let fresh = functional::complexity(&r.best_measure, &v).unwrap().total;
        assert!((fresh - r.sigma).abs() <= 1e-9, "u = {}: {fresh} vs {}", r.u, r.sigma);
        assert!(r.feasibility_slack >= -1e-9);
        assert!(functional::level_constraint(1.0, &r.best_measure, &v) >= r.u - 1e-9);
        for s in &r.restarts {
            assert!(s.final_value <= r.sigma + 1e-9, "u = {}: {s:?} above {} (replaced {})", r.u, r.sigma, r.replaced_by_larger_level);
        }
        if r.symmetrization_gain > 1e-6 {
            eprintln!("u = {}: symmetrising gains {:.3e}", r.u, r.symmetrization_gain);
        }
    }
    let zero = &curve[0];
    assert!(zero.sigma.is_finite() && zero.sigma <= functional::finiteness_cap(&v));
    for r in &zero.restarts {
        assert!(r.initial_value <= zero.sigma + 1e-9);
    }
    for scale in [0.1, 0.3, 0.5, 0.8, 1.0] {
        let start = GridMeasure::gaussian(config.grid_half_width, config.grid_points, scale).unwrap();
        if functional::level_constraint(1.0, &start, &v) >= 0.0 {
            assert!(zero.sigma >= functional::complexity(&start, &v).unwrap().total);
        }
    }
}

#[test]
fn small_dilations_give_positive_complexity_for_p3() {
    let v = presets::quartic_sextic_p3();
    let tiny = GridMeasure::gaussian(8.0, 4001, 1e-2).unwrap();
    let limit = 0.5 * 2f64.ln();
    let value = functional::complexity(&tiny, &v).unwrap().total;
    assert!((value - limit).abs() <= 0.05, "{value}");
    let config = SolverConfig { restarts: 4, random_starts: 1, ..SolverConfig::default() };
    let zero = optimizer::maximize_sigma(&v, 0.0, &config).unwrap();
    assert!(zero.sigma >= limit - 0.05, "{}", zero.sigma);
}
