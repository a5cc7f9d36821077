//! Closed-form capacities of ellipsoids: the k smallest of {m·a_i}.

use symcap::capacities::ellipsoid_oracle;

pub fn run_example() -> symcap::Result<()> {
    for a in [
        vec![1.0, 1.0],
        vec![1.0, 2.0],
        vec![1.0, 2f64.sqrt()],
        vec![1.0, 1.3, 2.7],
    ] {
        println!("E{a:?}: {:?}", ellipsoid_oracle(&a, 6));
    }
    Ok(())
}

fn main() -> symcap::Result<()> {
    run_example()
}
