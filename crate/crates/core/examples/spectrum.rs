//! Action spectrum of a linearly distorted ellipsoid by multistart on the
//! ratio functional.

use symcap::body::ConvexBody;
use symcap::pipeline::{spectrum, PipelineOptions};

pub fn run_example() -> symcap::Result<()> {
    let body = ConvexBody::from_json(
        r#"{"type":"transform","base":{"type":"ellipsoid","a":[1.0,1.3]},
            "M":[[1,0.3,0,0.2],[0,1,0.1,0],[0.2,0,1.2,0.1],[0,0.1,0,0.9]]}"#,
    )?;
    let opts = PipelineOptions {
        l_max: 16,
        grid: 256,
        ..PipelineOptions::default()
    };
    let circles = spectrum(&body, &opts)?;
    println!(
        "{:>4} {:>14} {:>10} {:>10} {:>10}  seed",
        "id", "action", "residual", "boundary", "ode"
    );
    for c in &circles {
        println!(
            "{:>4} {:>14.10} {:>10.1e} {:>10.1e} {:>10.1e}  {}",
            c.id,
            c.action,
            c.residual,
            c.boundary_residual.unwrap_or(f64::NAN),
            c.ode_residual.unwrap_or(f64::NAN),
            c.provenance.seed_id
        );
    }
    println!("proxy axes {:?}", body.ellipsoid_equivalent());
    Ok(())
}

fn main() -> symcap::Result<()> {
    run_example()
}
