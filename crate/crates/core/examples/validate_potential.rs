//! Growth-condition report for each bundled potential.

use pspin_complexity::potential::Potential;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/potentials");
    let mut paths: Vec<_> = std::fs::read_dir(dir)?.map(|e| e.map(|e| e.path())).collect::<Result<_, _>>()?;
    paths.sort();
    for path in paths {
        let v = Potential::from_json_file(&path)?;
        let report = v.validate(1e3, 4001)?;
        let name = path.file_stem().unwrap_or_default().to_string_lossy();
        println!("{name:<20} p = {}  c_bound = {:<5} passed = {:<5} minimal constant {:.3}", v.p, v.c_bound, report.passed, report.min_c_bound);
        for c in report.checks.iter().filter(|c| !c.passed) {
            println!("    {} violated at x = {:.4} (margin {:.3e})", c.name, c.at_x, c.worst_margin);
        }
    }
    Ok(())
}
