use std::time::Instant;

use pspin_complexity::optimizer::{maximize_sigma, SolverConfig};
use pspin_complexity::potential::presets;

fn main() {
    let v = presets::sextic_mixed();
    let cfg = SolverConfig::default();
    for u in [0.0, 0.5, 1.0, 2.0, 4.0] {
        let t = Instant::now();
        let r = maximize_sigma(&v, u, &cfg).unwrap();
        println!("u={u} sigma={:.6} slack={:.2e} t={:.3} gain={:.2e} {:?}", r.sigma, r.feasibility_slack, r.value.t, r.symmetrization_gain, t.elapsed());
        for rec in &r.restarts {
            println!("   {} {:.6} -> {:.6} in {} stalled={}", rec.label, rec.initial_value, rec.final_value, rec.iterations, rec.stalled);
        }
    }
}
