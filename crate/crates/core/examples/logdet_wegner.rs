//! Normalised log-determinant of D + GOE against the free convolution, and Wegner counts.

use pspin_complexity::rmt;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n: usize = std::env::args().nth(1).map_or(Ok(400), |s| s.parse())?;
    let seed = std::env::var("PSPIN_SEED").ok().and_then(|s| s.parse().ok()).unwrap_or(0);
    let diagonals: [(&str, Vec<f64>); 3] = [
        ("zero", vec![0.0; n]),
        ("alternating +-2", (0..n).map(|i| if i % 2 == 0 { 2.0 } else { -2.0 }).collect()),
        ("constant 3", vec![3.0; n]),
    ];
    for (name, d) in &diagonals {
        let r = rmt::log_det_experiment(d, 40, seed)?;
        println!("{name:<16} empirical {:.5} +- {:.5}  predicted {:.5}  gap {:.2e}", r.empirical, r.stderr, r.predicted, r.gap());
    }
    let widths = [0.4, 0.2, 0.1, 0.05];
    let fit = rmt::wegner_scaling(&diagonals[0].1, 0.0, &widths, 40, seed)?;
    for r in &fit.reports {
        println!("interval {:?}: mean count {:.3}, count / (N|I|) = {:.4}", r.interval, r.mean_count, r.constant);
    }
    println!("log-log slope {:.3}, constant {:.4}", fit.slope, fit.constant);
    Ok(())
}
