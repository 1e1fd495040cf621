//! Teleports a coherent state through the modified protocol and compares
//! the output overlap with the optimal-gain closed forms.

use teleqkd::teleport::{bob_kernel, fidelity_imag_closed, fidelity_numeric, fidelity_real_closed};
use teleqkd::{CoherentState, MeasurementOutcome, TeleportSettings};

fn main() -> teleqkd::Result<()> {
    let (alpha, r) = (1.5, 0.8);
    let theta = 0.6;
    let settings = TeleportSettings::optimal(r, theta)?;
    println!("r = {r}, θ = {theta}, g_u = {:.6}, g_v = {:.6}", settings.g_u, settings.g_v);

    for (label, input, closed) in [
        ("|α⟩ ", CoherentState::new(alpha, 0.0)?, fidelity_real_closed(alpha, r, theta)),
        ("|iα⟩", CoherentState::new(alpha, std::f64::consts::FRAC_PI_2)?, fidelity_imag_closed(alpha, r, theta)),
    ] {
        println!("{label}: closed form F = {closed:.12}");
        for (x, p) in [(0.0, 0.0), (1.1, -0.4), (-2.0, 1.3)] {
            let chi = bob_kernel(&input, r, &settings, &MeasurementOutcome::new(x, p))?;
            println!("      outcome ({x:5.2}, {p:5.2}) → F = {:.12}", fidelity_numeric(&input, &chi)?);
        }
    }
    Ok(())
}
