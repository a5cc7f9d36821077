//! Capacities c_1..c_4 from indexed critical circles, checked against the
//! ellipsoid oracle.

use symcap::body::ConvexBody;
use symcap::pipeline::{analyze, PipelineOptions};

pub fn run_example() -> symcap::Result<()> {
    for a in [vec![1.0, 2.0], vec![1.0, 2f64.sqrt()], vec![1.0, 1.3, 2.7]] {
        let body = ConvexBody::ellipsoid(&a)?;
        let an = analyze(&body, &PipelineOptions::default())?;
        println!("E{a:?}  eta = {:.4}", an.eta);
        for c in &an.capacities.caps {
            println!(
                "  c_{} = {:?}  from {:?} via {:?}",
                c.k, c.value, c.source, c.method
            );
        }
        println!(
            "  oracle {:?}  match = {}",
            an.oracle.oracle, an.oracle.matches
        );
        for w in &an.capacities.warnings {
            println!("  warning: {w}");
        }
    }
    Ok(())
}

fn main() -> symcap::Result<()> {
    run_example()
}
