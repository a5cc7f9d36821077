//! Closed characteristic recovered from the minimizer on a translated body.

use symcap::body::ConvexBody;
use symcap::dual::DualConfig;
use symcap::loops::FourierLoop;
use symcap::solver::{minimize_ratio, SolverOptions};
use symcap::spectrum::{orbit_residual, reconstruct_orbit};

pub fn run_example() -> symcap::Result<()> {
    let body = ConvexBody::from_json(
        r#"{"type":"transform","base":{"type":"ellipsoid","a":[1.0,1.5]},
            "M":[[1,0,0,0],[0,1,0,0],[0,0,1,0],[0,0,0,1]],"b":[0.1,-0.05,0.02,0.0]}"#,
    )?;
    let cfg = DualConfig::new(body.clone(), None, 32, 512)?;
    let seed = FourierLoop::single_mode(2, 32, 1, &[0.4, 0.1, 0.2, -0.1]);
    let c = minimize_ratio(&cfg, &seed, &SolverOptions::default())?;
    let orbit = reconstruct_orbit(&body, &c)?;
    let (boundary, ode) = orbit_residual(&body, &orbit, orbit.period);
    println!(
        "period {:.12} after {} iterations (residual {:.1e})",
        orbit.period, c.iterations, c.residual
    );
    println!("boundary residual {boundary:.2e}, ode residual {ode:.2e}");
    let centroid: Vec<f64> = (0..4)
        .map(|i| orbit.points.iter().map(|p| p[i]).sum::<f64>() / orbit.points.len() as f64)
        .collect();
    println!("orbit centroid {centroid:.4?}");
    Ok(())
}

fn main() -> symcap::Result<()> {
    run_example()
}
