//! Kac-Rice integral against direct root counting for N = 2, p = 2, V(x) = x^4.

use std::time::Instant;

use pspin_complexity::kacrice::{self, QuadSpec};
use pspin_complexity::potential::presets;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let trials: usize = std::env::args().nth(1).map_or(Ok(1000), |s| s.parse())?;
    let seed = std::env::var("PSPIN_SEED").ok().and_then(|s| s.parse().ok()).unwrap_or(0);
    let v = presets::quartic();
    println!("{:>5} {:>10} {:>10} {:>8} {:>6}", "u", "kac-rice", "counted", "stderr", "z");
    for u in [0.0, 0.1, 0.5] {
        let start = Instant::now();
        let est = kacrice::expected_crt(2, &v, u, &QuadSpec::default(), seed)?;
        let counts = kacrice::count_ensemble(2, &v, u, trials, seed)?;
        let z = (est.value - counts.mean) / est.stderr.hypot(counts.stderr);
        println!("{u:>5} {:>10.5} {:>10.5} {:>8.5} {z:>6.2}  ({:.1?})", est.value, counts.mean, counts.stderr, start.elapsed());
    }
    let three = kacrice::expected_crt(3, &v, 0.0, &QuadSpec::default(), seed)?;
    println!("N = 3, u = 0: {:.4} +- {:.4}", three.value, three.stderr);
    Ok(())
}
