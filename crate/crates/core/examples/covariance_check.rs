//! Monte Carlo covariances of (H, grad H, Hess H) at one point against the closed forms.

use pspin_complexity::kacrice;
use pspin_complexity::potential::presets;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let samples: usize = std::env::args().nth(1).map_or(Ok(100_000), |s| s.parse())?;
    let seed = std::env::var("PSPIN_SEED").ok().and_then(|s| s.parse().ok()).unwrap_or(0);
    let sigma = [0.4, -0.8, 1.1];
    for v in [presets::quartic(), presets::quartic_sextic_p3(), presets::sextic_p4()] {
        let report = kacrice::covariance_test(&sigma, &v, samples, seed)?;
        println!(
            "p = {}: {} entries, max |z| {:.2}, conditional max |z| {:.2}, residual ratio {:.1e}",
            v.p,
            report.entries.len() + report.conditional.len() + report.conditional_mean.len(),
            report.max_z(),
            report.max_conditional_z(),
            report.residual_ratio
        );
        if let Some(w) = report.worst() {
            println!("    worst {}: predicted {:.5}, empirical {:.5} +- {:.5}", w.name, w.predicted, w.empirical, w.stderr);
        }
        let red = kacrice::determinant_reduction(&sigma, &v, 20_000, seed)?;
        println!("    E|det| full {:.5} vs reduced {:.5} (z = {:.2})", red.full, red.reduced, red.z_score());
    }
    Ok(())
}
