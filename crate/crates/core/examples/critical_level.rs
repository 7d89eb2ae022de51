//! Locate the critical level for the mixed sextic potential.

use pspin_complexity::optimizer::{find_critical_level, SolverConfig};
use pspin_complexity::potential::presets;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let v = presets::sextic_mixed();
    let cfg = SolverConfig { restarts: 4, random_starts: 0, ..Default::default() };
    let r = find_critical_level(&v, &cfg)?;
    println!("sigma(0) = {:.6}", r.sigma_at_zero);
    for (u, s) in &r.evaluations {
        match s {
            Some(s) => println!("  u = {u:.5}  sigma = {s:.6}"),
            None => println!("  u = {u:.5}  infeasible"),
        }
    }
    println!("u_c = {:.4} in [{:.4}, {:.4}]", r.u_c, r.bracket.0, r.bracket.1);
    Ok(())
}
