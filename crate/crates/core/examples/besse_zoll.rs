//! Besse and Zoll verdicts from capacity coincidences.

use symcap::body::ConvexBody;
use symcap::capacities::{besse_check, zoll_check};
use symcap::pipeline::{analyze, PipelineOptions};

pub fn run_example() -> symcap::Result<()> {
    for a in [vec![1.0, 2.0], vec![1.0, 1.0], vec![1.0, 2f64.sqrt()]] {
        let an = analyze(&ConvexBody::ellipsoid(&a)?, &PipelineOptions::default())?;
        let besse = besse_check(&an.capacities, 1e-6)?;
        let zoll = zoll_check(&an.capacities, 1e-6)?;
        println!(
            "E{a:?}: caps {:?}  besse {besse:?}  zoll {zoll}",
            an.capacities.values()
        );
    }
    Ok(())
}

fn main() -> symcap::Result<()> {
    run_example()
}
