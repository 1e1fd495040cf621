//! Settings that maximize the real/imaginary fidelity contrast, per α.

use teleqkd::states::squeezing_to_db;
use teleqkd::teleport::optimize_settings;
use teleqkd::Basis;

fn main() -> teleqkd::Result<()> {
    println!("{:>5} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}", "α", "r", "dB", "cos²θ", "g_u", "g_v", "F_re", "F_im");
    for k in 1..=12 {
        let alpha = 0.25 * k as f64;
        let s = optimize_settings(alpha, Basis::Real)?;
        println!(
            "{alpha:5.2} {:8.4} {:8.3} {:8.4} {:8.4} {:8.4} {:8.4} {:8.4}",
            s.r,
            squeezing_to_db(s.r),
            s.theta.cos().powi(2),
            s.g_u,
            s.g_v,
            s.f_match,
            s.f_cross
        );
    }
    let im = optimize_settings(2.0, Basis::Imaginary)?;
    println!("imaginary branch at α = 2: cos²θ = {:.4} (mirror of the real one)", im.theta.cos().powi(2));
    Ok(())
}
