//! The complexity functional along Gaussian dilations, and the level constraint it must meet.

use pspin_complexity::functional;
use pspin_complexity::measure::GridMeasure;
use pspin_complexity::potential::presets;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let v = presets::sextic_mixed();
    println!("{:>6} {:>10} {:>10} {:>10} {:>10} {:>10}", "scale", "t", "kl", "log-pot", "total", "level");
    for scale in [0.3, 0.4, 0.5, 0.6, 0.8, 1.0] {
        let nu = GridMeasure::gaussian(8.0, 2001, scale)?;
        let f = functional::complexity(&nu, &v)?;
        let level = functional::level_constraint(1.0, &nu, &v);
        println!("{scale:>6} {:>10.5} {:>10.5} {:>10.5} {:>10.5} {:>10.5}", f.t, f.kl, f.log_potential, f.total, level);
    }
    Ok(())
}
