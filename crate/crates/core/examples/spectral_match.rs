//! Eigenvalues of diag(+-2) + GOE against the free convolution prediction.

use std::time::Instant;

use pspin_complexity::freeconv::{convolve_semicircle, FreeConvOptions};
use pspin_complexity::measure::DiscreteMeasure;
use pspin_complexity::rmt;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n: usize = std::env::args().nth(1).map_or(Ok(2000), |s| s.parse())?;
    let samples: usize = std::env::args().nth(2).map_or(Ok(50), |s| s.parse())?;
    let seed = std::env::var("PSPIN_SEED").ok().and_then(|s| s.parse().ok()).unwrap_or(0);
    let shift: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 2.0 } else { -2.0 }).collect();
    let start = Instant::now();
    let mut eig: Vec<f64> = rmt::sample_spectra(&shift, samples, seed)?.concat();
    eig.sort_by(f64::total_cmp);
    let sampled = start.elapsed();
    let nu = DiscreteMeasure::parse_atoms("-2:1,2:1")?;
    let predicted = convolve_semicircle(&nu, &FreeConvOptions::default())?;
    let w1 = rmt::wasserstein1(&eig, &predicted);
    println!("N = {n}, samples = {samples}: W1 = {w1:.4} (sampling {sampled:.2?}, total {:.2?})", start.elapsed());
    Ok(())
}
