//! Bob's and Eve's states behind a lossy line, and their vacuum
//! detection probabilities.

use teleqkd::channel::{bob_density, eve_density, vacuum_prob_unconditional, Side};
use teleqkd::{Basis, MeasurementOutcome, ProtocolParams, Sign};

fn main() -> teleqkd::Result<()> {
    let theta = 0.19f64.sqrt().acos();
    let outcome = MeasurementOutcome::new(0.5, -0.3);
    println!("{:>5} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10}", "η", "purity_B", "purity_E", "q0_B(-α)", "q0_B(+α)", "q0_E(-α)", "q0_E(+α)");
    for k in 0..=10 {
        let eta = k as f64 / 10.0;
        let p = ProtocolParams::matched(2.9, Basis::Real, 1.1, theta, eta, 0.8)?;
        let (minus, plus) = (p.key_state(Sign::Minus), p.key_state(Sign::Plus));
        let rho_b = bob_density(&minus, p.r, p.theta, &outcome, eta)?;
        let rho_e = eve_density(&minus, p.r, p.theta, &outcome, eta)?;
        println!(
            "{eta:5.1} {:10.6} {:10.6} {:10.6} {:10.6} {:10.6} {:10.6}",
            rho_b.purity()?,
            rho_e.purity()?,
            vacuum_prob_unconditional(&p, &minus, Side::Bob)?,
            vacuum_prob_unconditional(&p, &plus, Side::Bob)?,
            vacuum_prob_unconditional(&p, &minus, Side::Eve)?,
            vacuum_prob_unconditional(&p, &plus, Side::Eve)?,
        );
    }
    Ok(())
}
