//! Density of nu [+] semicircle for atoms given as `x:mass,...` (default two atoms at +-1).

use pspin_complexity::freeconv::{self, FreeConvOptions};
use pspin_complexity::measure::DiscreteMeasure;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let atoms = std::env::args().nth(1).unwrap_or_else(|| "-1:0.5,1:0.5".into());
    let nu = DiscreteMeasure::parse_atoms(&atoms)?;
    let conv = freeconv::convolve_semicircle(&nu, &FreeConvOptions::default())?;
    println!("mass {:.8}  support within +-{:.3}", conv.mass, conv.support_bound);
    println!("log potential at 0: density route {:.8}, exact {:.8}", conv.log_potential(), freeconv::log_potential_at(&nu, 0.0)?);

    let peak = conv.density.iter().cloned().fold(0.0, f64::max);
    let stride = conv.lambda.len() / 40;
    for (x, d) in conv.lambda.iter().zip(&conv.density).step_by(stride.max(1)) {
        let bar = "#".repeat((60.0 * d / peak).round() as usize);
        println!("{x:>7.3} {d:.4} {bar}");
    }
    Ok(())
}
