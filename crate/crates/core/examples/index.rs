//! Transverse indices from the reduced Hessian of the smoothed free functional.

use symcap::body::ConvexBody;
use symcap::dual::DualConfig;
use symcap::profile::{build_profile, ProfileFamily};
use symcap::solver::{find_critical_free, free_seed_from_ratio, multistart, SolverOptions};
use symcap::spectrum::{index_hessian, index_of};

pub fn run_example() -> symcap::Result<()> {
    let body = ConvexBody::ellipsoid(&[1.0, 1.3])?;
    let cfg = DualConfig::new(body, None, 32, 512)?;
    let opts = SolverOptions {
        m_max: Some(3),
        ..SolverOptions::default()
    };
    let circles = multistart(&cfg, 3, &opts)?;
    let spectrum: Vec<f64> = circles.iter().map(|c| c.action).collect();
    let profile = build_profile(2.2, &spectrum, ProfileFamily::FstarLin)?;
    let pcfg = cfg.with_profile(Some(profile));
    println!("reduction level l = {}", pcfg.reduction_level());
    for c in circles.iter().filter(|c| c.action < 2.2) {
        let seed = free_seed_from_ratio(&pcfg, c).expect("action inside the band");
        let free = find_critical_free(&pcfg, &seed, &opts)?;
        let rh = index_hessian(&pcfg, &free)?;
        let (m, nu) = index_of(&pcfg, &free)?;
        let low: Vec<String> = rh
            .eigenvalues
            .iter()
            .take(6)
            .map(|v| format!("{v:+.3}"))
            .collect();
        println!(
            "action {:.6}: transverse index {m}, nullity {nu}, lowest eigenvalues [{}]",
            c.action,
            low.join(", ")
        );
    }
    Ok(())
}

fn main() -> symcap::Result<()> {
    run_example()
}
