//! ΔI against α at several transmittances, with contrast-optimal settings.

use teleqkd::keyrate::{linspace, sweep, Axis, SettingsMode};
use teleqkd::{Basis, ProtocolParams};

fn main() -> teleqkd::Result<()> {
    let grid = linspace(0.25, 4.0, 16);
    for (eta, beta) in [(0.9, 1.0), (0.9, 0.8), (0.2, 1.0), (0.0, 0.8)] {
        let template = ProtocolParams::matched(grid[0], Basis::Real, 1.0, 0.5, eta, beta)?;
        let rows = sweep(&template, Axis::Alpha, &grid, SettingsMode::PiOptimal)?;
        println!("η = {eta}, β = {beta}");
        for row in rows {
            let bar = "#".repeat((row.delta_i.max(0.0) * 100.0).round() as usize);
            println!("  α = {:4.2}  ΔI = {:+.5}  {bar}", row.value, row.delta_i);
        }
    }
    Ok(())
}
