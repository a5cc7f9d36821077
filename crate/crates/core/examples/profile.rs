//! Admissible smoothing profiles for a given spectrum and cutoff, with the
//! margin of every condition.

use symcap::body::ConvexBody;
use symcap::profile::{
    build_profile, profile_check, smoothed_fenchel_grad, smoothed_k, ProfileFamily,
};

pub fn run_example() -> symcap::Result<()> {
    let spectrum = [1.0, 2.0, 2.0, 3.0, 4.0];
    for family in [ProfileFamily::FstarLin, ProfileFamily::FLin] {
        let p = build_profile(3.15, &spectrum, family)?;
        let report = profile_check(&p);
        println!(
            "{family:?}: eps = {:.4}, eta = {}, all pass = {}",
            p.epsilon(),
            p.eta,
            report.all_pass()
        );
        for c in &report.conditions {
            println!("  {:<20} {:>5} {:+.3e}", c.name, c.pass, c.margin);
        }
    }

    let body = ConvexBody::ellipsoid(&[1.0, 2.0])?;
    let p = build_profile(3.15, &spectrum, ProfileFamily::FstarLin)?;
    let w = [0.4, 0.1, -0.3, 0.2];
    let grad = smoothed_fenchel_grad(&body, &p, &w)?;
    let (k, residual) = smoothed_k(&p, body.fenchel_eval(&w)?)?;
    println!(
        "grad H*_eta(w) = {:?}\nk = {k:.6}, scalar residual = {residual:.1e}",
        grad.as_slice()
    );
    Ok(())
}

fn main() -> symcap::Result<()> {
    run_example()
}
