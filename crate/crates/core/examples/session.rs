//! A seeded Monte Carlo run of the protocol with sifting statistics.

use teleqkd::sim::{run_session, sift};
use teleqkd::{Basis, ProtocolParams};

fn main() -> teleqkd::Result<()> {
    let theta = 0.19f64.sqrt().acos();
    for eta in [1.0, 0.7] {
        let params = ProtocolParams::matched(2.9, Basis::Real, 1.1, theta, eta, 0.8)?;
        let (records, s) = run_session(&params, 100_000, 42)?;
        println!("η = {eta}: {} rounds, {} sifted ({:.4})", s.n_rounds, s.n_sifted, s.sift_fraction);
        println!("  q̂0 = {:.5} (expected {:.5}, z = {:+.2})", s.q0_hat, s.expected.q0, s.q0_z);
        println!("  q̂1 = {:.5} (expected {:.5}, z = {:+.2})", s.q1_hat, s.expected.q1, s.q1_z);
        println!("  bit error rate {:.5} (expected {:.5})", s.bit_error_rate, s.expected.error_rate());
        let first: Vec<String> = sift(&records[..12]).iter().map(|r| format!("{}{}", r.alice_bit, r.bob_bit)).collect();
        println!("  first sifted (alice, bob) bits: {}", first.join(" "));
    }
    Ok(())
}
